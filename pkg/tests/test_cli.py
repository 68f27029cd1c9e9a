import csv
import json
import xml.etree.ElementTree as ET

import pytest
from click.testing import CliRunner

from shorttraj.cli import format_complex, main, parse_complex, read_polyline_csv, write_polyline_csv
from shorttraj.geometry import PathPolyline

SVG = "{http://www.w3.org/2000/svg}"


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


@pytest.mark.parametrize("text, want", [
    ("2", 2), ("1+0.1i", 1 + 0.1j), ("-1-0.1i", -1 - 0.1j), ("0.5i", 0.5j), ("+i", 1j),
    ("-i", -1j), ("1e-3-2.5e1i", 0.001 - 25j), (".5", 0.5),
])
def test_parse_complex(text, want):
    assert parse_complex(text) == want


@pytest.mark.parametrize("text", ["", "1,5", "i1", "1+2j", "abc", "1+-2i"])
def test_parse_complex_malformed(text):
    with pytest.raises(ValueError):
        parse_complex(text)


def test_format_roundtrip():
    z = -0.25 + 1e-7j
    assert parse_complex(format_complex(z)) == z


def test_check_p_one_short():
    r = run("check-p", "--A", "1+0.1i", "--B", "-1+0.1i")
    assert r.exit_code == 0
    assert "satisfied" in r.output.lower()


def test_check_p_json():
    r = run("check-p", "--A", "1+0.1i", "--B", "-1-0.1i", "--json")
    d = json.loads(r.output)
    assert d["property_p"]["satisfied"] is True
    assert sorted(d["property_p"]["classes"]) == ["1", "A+B+1"]


def test_malformed_literal_exit_2():
    r = CliRunner().invoke(main, ["check-p", "--a", "1,5", "--b", "2", "--lam", "1"])
    assert r.exit_code == 2 and "malformed" in r.output


@pytest.mark.parametrize("args", [
    ["check-p", "--a", "1", "--b", "2", "--lam", "1"],
    ["check-p", "--a", "2", "--b", "3"],
    ["check-p", "--a", "2", "--b", "3", "--lam", "1", "--A", "1", "--B", "1"],
    ["check-p", "--A", "1", "--B", "-2"],
])
def test_invalid_parameters_exit_2(args):
    assert CliRunner().invoke(main, args).exit_code == 2


def test_graph_outputs(tmp_path):
    prefix = tmp_path / "fig"
    r = run("graph", "--A", "1+0.1i", "--B", "-1+0.1i", "--prefix", prefix)
    assert r.exit_code == 0, r.output
    report = json.loads((tmp_path / "fig.json").read_text())
    assert report["topology"] and len(report["shorts"]) == 1
    root = ET.parse(tmp_path / "fig.svg").getroot()
    assert len(root.findall(f".//{SVG}path")) == len(report["trajectories"])
    with open(tmp_path / "fig.csv") as f:
        assert next(csv.reader(f)) == ["traj_id", "s", "re", "im"]


def test_graph_deterministic(tmp_path):
    for name in ("x", "y"):
        assert run("graph", "--A", "2", "--B", "3", "--prefix", tmp_path / name).exit_code == 0
    for ext in (".json", ".csv", ".svg"):
        assert (tmp_path / f"x{ext}").read_bytes() == (tmp_path / f"y{ext}").read_bytes()


def test_graph_csv_into_periods(tmp_path):
    prefix = tmp_path / "g"
    args = ["--A", "1+0.1i", "--B", "-1+0.1i"]
    assert run("graph", *args, "--prefix", prefix).exit_code == 0
    r = run("periods", *args, "--arc", tmp_path / "g.csv")
    assert r.exit_code == 0, r.output
    assert "matched class: 1 " in r.output


def _arc_csv(path, pts, traj="arc"):
    write_polyline_csv([(traj, PathPolyline(pts))], path)
    return path


def test_periods_reversed_file_negates(tmp_path):
    args = ["--a", "1-1i", "--b", "1+2i", "--lam", "1+0.5i"]
    fwd = [1 - 1j, -0.5 + 0.5j, 1 + 2j]
    f1 = _arc_csv(tmp_path / "f.csv", fwd)
    f2 = _arc_csv(tmp_path / "r.csv", fwd[::-1])
    v = []
    for f in (f1, f2):
        r = run("periods", *args, "--arc", f)
        assert r.exit_code == 0, r.output
        line = next(ln for ln in r.output.splitlines() if ln.startswith("value = "))
        v.append(parse_complex(line.split()[2]))
    assert abs(v[0] + v[1]) < 1e-9 * abs(v[0])


def test_periods_through_pole_fails(tmp_path):
    f = _arc_csv(tmp_path / "s.csv", [1 - 1j, 1 + 0.5j, 1 + 2j])
    r = CliRunner().invoke(main, ["periods", "--a", "1-1i", "--b", "1+2i", "--lam", "1+0.5i", "--arc", str(f)])
    assert r.exit_code == 1 and "period failure" in r.output


def test_periods_arc_not_joining(tmp_path):
    f = _arc_csv(tmp_path / "s.csv", [0.5j, 3 + 3j])
    r = CliRunner().invoke(main, ["periods", "--A", "2", "--B", "3", "--arc", str(f)])
    assert r.exit_code == 1


def test_csv_roundtrip(tmp_path):
    pl = PathPolyline.through(0, 1 + 1j, 2, per_leg=5)
    write_polyline_csv([("t0", pl)], tmp_path / "c.csv")
    got = read_polyline_csv(tmp_path / "c.csv")["t0"]
    assert (got == pl.points).all()


def test_jacobi_degree_zero(tmp_path):
    r = run("jacobi", "--A", "1+0.1i", "--B", "-1+0.1i", "--n", "0", "--prefix", tmp_path / "j")
    assert r.exit_code == 0 and "skipped" in r.output
    assert (tmp_path / "j_roots.csv").read_text() == "index,re,im\n"


def test_jacobi_degree_one(tmp_path):
    r = run("jacobi", "--A", "1+0.1i", "--B", "-1+0.1i", "--n", "1", "--prefix", tmp_path / "j")
    assert r.exit_code == 0, r.output
    want = (-1 + 0.1j - (1 + 0.1j)) / (0.2j + 2)
    rows = list(csv.DictReader(open(tmp_path / "j_roots.csv")))
    assert complex(float(rows[0]["re"]), float(rows[0]["im"])) == pytest.approx(want)


def test_jacobi_n64(tmp_path):
    r = run("jacobi", "--A", "1+0.1i", "--B", "-1+0.1i", "--n", "64", "--prefix", tmp_path / "j")
    assert r.exit_code == 0, r.output
    d = json.loads((tmp_path / "j.json").read_text())
    assert d["roots"]["degree"] == 64
    assert abs(d["comparison"]["mass_check"][0] ** 2 + d["comparison"]["mass_check"][1] ** 2 - 1) < 1e-6
    assert len(open(tmp_path / "j_roots.csv").read().splitlines()) == 65


def test_jacobi_needs_jacobi_parameters(tmp_path):
    r = CliRunner().invoke(main, ["jacobi", "--a", "2", "--b", "3", "--lam", "1", "--n", "3",
                                  "--prefix", str(tmp_path / "j")])
    assert r.exit_code == 2


def test_jacobi_unreachable_tolerance(tmp_path):
    r = CliRunner().invoke(main, ["jacobi", "--A", "1+0.1i", "--B", "-1+0.1i", "--n", "8",
                                  "--tol-root", "1e-30", "--prefix", str(tmp_path / "j")])
    assert r.exit_code == 1


def test_config_file_defaults(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"check-p": {"A": "1+0.1i", "B": "-1-0.1i", "json": True}}))
    r = run("--config", cfg, "check-p")
    assert r.exit_code == 0, r.output
    assert json.loads(r.output)["property_p"]["satisfied"] is True
