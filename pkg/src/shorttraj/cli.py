"""Command-line front end: Property P reports, critical-graph figures, arc periods,
Jacobi zero overlays and the invariant suite.

Exit codes: 0 success, 1 verification or consistency failure, 2 usage error.
"""

from __future__ import annotations

import csv
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import jacobi, qdiff, suite, tracer
from .geometry import PathPolyline
from .periods import PeriodError, classify_arc
from .svg import Figure, Window

_COMPLEX = re.compile(
    r"^\s*(?P<re>[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)?"
    r"((?P<sign>[+-])(?P<im>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)?i)?\s*$"
)
CSV_HEADER = ["traj_id", "s", "re", "im"]

COLORS = {
    "ToPoleMinus1": "#1f77b4",
    "ToPolePlus1": "#2ca02c",
    "ToInfinity": "#7f7f7f",
    "ToOtherZero": "#d62728",
    "ClosedLoop": "#9467bd",
    "Truncated": "#ff7f0e",
}


def parse_complex(text: str) -> complex:
    """``RE``, ``RE+IMi``, ``RE-IMi``, ``IMi`` or ``+i``; the decimal point is always '.'."""
    s = text.strip()
    if s.endswith("i") and re.fullmatch(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?i", s):
        return complex(0.0, float(s[:-1]))
    m = _COMPLEX.match(s)
    if not s or m is None or (m.group("re") is None and m.group("sign") is None):
        raise ValueError(f"malformed complex literal {text!r}")
    real = float(m.group("re")) if m.group("re") else 0.0
    imag = 0.0
    if m.group("sign"):
        imag = float(m.group("im")) if m.group("im") else 1.0
        if m.group("sign") == "-":
            imag = -imag
    return complex(real, imag)


def format_complex(z: complex) -> str:
    return f"{z.real:.12g}{z.imag:+.12g}i"


class ComplexParam(click.ParamType):
    name = "complex"

    def convert(self, value, param, ctx):
        if isinstance(value, complex):
            return value
        try:
            return parse_complex(str(value))
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


COMPLEX = ComplexParam()


@dataclass
class RunConfig:
    command: str
    a: complex | None = None
    b: complex | None = None
    lam: complex | None = None
    A: complex | None = None
    B: complex | None = None
    limits: tracer.StepLimits = field(default_factory=tracer.StepLimits)
    prefix: Path | None = None
    center: complex | None = None
    half_width: float | None = None
    seed: int = 0

    def params(self) -> qdiff.QDParams:
        direct = [self.a, self.b, self.lam]
        jac = [self.A, self.B]
        has_direct = any(x is not None for x in direct)
        has_jac = any(x is not None for x in jac)
        if has_direct == has_jac:
            raise click.UsageError("give exactly one parameter source: --a/--b/--lam or --A/--B")
        if has_direct and None in direct:
            raise click.UsageError("--a, --b and --lam must be given together")
        if has_jac and None in jac:
            raise click.UsageError("--A and --B must be given together")
        if has_jac:
            return qdiff.from_jacobi(self.A, self.B)
        return qdiff.validate(self.a, self.b, self.lam)

    def window(self, p: qdiff.QDParams) -> Window:
        auto = Window.around([p.a, p.b, -1, 1])
        return Window(auto.center if self.center is None else self.center,
                      auto.half_width if self.half_width is None else self.half_width)


def _clean(obj):
    """JSON-safe copy: complex as [re, im], non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dump_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_clean(obj), f, indent=2, sort_keys=True)
        f.write("\n")


def structure_report(p: qdiff.QDParams, graph: tracer.CriticalGraph | None = None) -> dict:
    res = qdiff.residues(p)
    out: dict = {"params": p.to_dict()}
    out["residues"] = {"-1": res.res_minus1, "+1": res.res_plus1, "inf": res.res_inf}
    try:
        types = qdiff.classify_poles(res)
        out["pole_types"] = {"-1": types[0].value, "+1": types[1].value, "inf": types[2].value}
    except qdiff.ParameterError as exc:
        out["pole_types"] = {"error": str(exc)}
    out["property_p"] = qdiff.property_p(p).to_dict()
    if graph is not None:
        out.update(graph.to_dict())
        out["retried"] = graph.retried
        out["property_p_satisfied"] = graph.property_p_satisfied
    return out


def graph_polylines(graph: tracer.CriticalGraph) -> list[tuple[str, PathPolyline]]:
    """Every polyline of the graph under a stable id: t<k>, short<k>, loop<k>."""
    items = [(f"t{k}", t.polyline) for k, t in enumerate(graph.trajectories)]
    items += [(f"short{k}", s.polyline) for k, s in enumerate(graph.shorts)]
    items += [(f"loop{k}", lp.polyline) for k, lp in enumerate(graph.loops)]
    return items


def write_polyline_csv(items: list[tuple[str, PathPolyline]], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for ident, poly in items:
            pts = poly.loop_points()
            s = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(pts)))))
            for sk, z in zip(s, pts):
                w.writerow([ident, repr(float(sk)), repr(float(z.real)), repr(float(z.imag))])


def read_polyline_csv(path: Path) -> dict[str, np.ndarray]:
    out: dict[str, list[complex]] = {}
    with open(path, encoding="utf-8", newline="") as f:
        rows = csv.reader(f)
        header = next(rows, None)
        if header != CSV_HEADER:
            raise ValueError(f"expected header {','.join(CSV_HEADER)}, got {header}")
        for row in rows:
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"malformed row {row}")
            out.setdefault(row[0], []).append(complex(float(row[2]), float(row[3])))
    if not out:
        raise ValueError("no polyline samples in file")
    return {k: np.array(v) for k, v in out.items()}


def draw_graph(p: qdiff.QDParams, graph: tracer.CriticalGraph | None, window: Window, title: str) -> Figure:
    fig = Figure(window, title)
    if graph is not None:
        for lp in graph.loops:
            fig.polyline(lp.polyline.points, "#c5b0d5", 1.0, closed=True)
        for k, t in enumerate(graph.trajectories):
            fig.path(t.polyline.points, COLORS[t.fate.value], 1.5, ident=f"t{k}")
        for s in graph.shorts:
            fig.polyline(s.polyline.points, "#d62728", 3.5)
    for pole in (-1, 1):
        fig.cross(complex(pole))
    for name, z in (("a", p.a), ("b", p.b)):
        fig.dot(z, "black")
        fig.label(z, name)
    return fig


def _limits(rtol: float | None, eps_launch: float | None) -> tracer.StepLimits:
    kw = {}
    if rtol is not None:
        kw["rtol"] = rtol
    if eps_launch is not None:
        kw["eps_launch"] = eps_launch
    for k, v in kw.items():
        if not v > 0:
            raise click.BadParameter(f"{k} must be positive")
    return tracer.StepLimits(**kw)


def _params_or_exit(cfg: RunConfig) -> qdiff.QDParams:
    try:
        return cfg.params()
    except qdiff.ParameterError as exc:
        raise click.UsageError(f"invalid parameters ({exc.code}): {exc}") from exc


def param_options(f):
    for opt in reversed([
        click.option("--a", "a", type=COMPLEX, help="First zero of phi."),
        click.option("--b", "b", type=COMPLEX, help="Second zero of phi."),
        click.option("--lam", "lam", type=COMPLEX, help="Leading factor lambda."),
        click.option("--A", "A", type=COMPLEX, help="Jacobi parameter A (alpha = nA)."),
        click.option("--B", "B", type=COMPLEX, help="Jacobi parameter B (beta = nB)."),
    ]):
        f = opt(f)
    return f


def window_options(f):
    f = click.option("--center", type=COMPLEX, default=None, help="Figure window center.")(f)
    f = click.option("--half-width", type=float, default=None, help="Figure window half-width.")(f)
    return f


# config keys whose flag name differs from the parameter name
_ALIASES = {"json": "as_json", "arc": "arc_file", "traj": "traj_id"}


def _load_config(ctx: click.Context, param, value):
    if value:
        with open(value, encoding="utf-8") as f:
            data = json.load(f)
        ctx.default_map = {cmd: {_ALIASES.get(k, k.replace("-", "_")): v for k, v in opts.items()}
                           for cmd, opts in data.items()}
    return value


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), callback=_load_config, is_eager=True,
              expose_value=False, help="JSON file mapping command names to flag defaults.")
def main() -> None:
    """Critical graphs of lambda^2 (z-a)(z-b)/(z^2-1)^2 dz^2 and the zeros of Jacobi polynomials."""


@main.command("check-p")
@param_options
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
def cmd_check_p(a, b, lam, A, B, as_json) -> None:
    """Property P: the four period values and whether one of them is real."""
    cfg = RunConfig("check-p", a, b, lam, A, B)
    p = _params_or_exit(cfg)
    rep = qdiff.property_p(p)
    if as_json:
        click.echo(json.dumps(_clean(structure_report(p)), indent=2, sort_keys=True))
        return
    click.echo(f"a = {format_complex(p.a)}  b = {format_complex(p.b)}  lambda = {format_complex(p.lam)}")
    for pair in qdiff.SIGN_PAIRS:
        v = rep.values[pair]
        click.echo(f"  {qdiff.pair_label(pair)} {rep.labels[pair]:<6} value = {format_complex(v)}"
                   f"  Im = {rep.im_parts[pair]:.3e}")
    verdict = "satisfied" if rep.satisfied else "not satisfied"
    classes = f" via {', '.join(rep.satisfied_labels)}" if rep.satisfied else ""
    click.echo(f"Property P {verdict}{classes}")


@main.command("graph")
@param_options
@window_options
@click.option("--prefix", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="Output prefix for .svg, .json and .csv.")
@click.option("--rtol", type=float, default=None, help="Relative integration tolerance.")
@click.option("--eps-launch", type=float, default=None, help="Launch offset from the zeros.")
@click.option("--workers", type=int, default=1, show_default=True, help="Parallel traces.")
def cmd_graph(a, b, lam, A, B, center, half_width, prefix, rtol, eps_launch, workers) -> None:
    """Trace the critical graph and write SVG, JSON and CSV."""
    cfg = RunConfig("graph", a, b, lam, A, B, _limits(rtol, eps_launch), prefix, center, half_width)
    p = _params_or_exit(cfg)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    try:
        graph = tracer.build_graph(p, cfg.limits, workers=workers)
    except tracer.TracerError as exc:
        report = structure_report(p)
        report["error"] = {"message": str(exc), "location": exc.location}
        dump_json(report, prefix.with_suffix(".json"))
        click.echo(f"tracer failure: {exc}", err=True)
        sys.exit(1)
    dump_json(structure_report(p, graph), prefix.with_suffix(".json"))
    write_polyline_csv(graph_polylines(graph), prefix.with_suffix(".csv"))
    draw_graph(p, graph, cfg.window(p), f"critical graph, topology {graph.topology.value}").save(
        prefix.with_suffix(".svg"))
    click.echo(f"topology {graph.topology.value}; {len(graph.shorts)} short trajectories; "
               f"fates {[t.fate.value for t in graph.trajectories]}")
    for k, s in enumerate(graph.shorts):
        click.echo(f"  short{k}: class {s.matched_class}, {len(s.polyline)} points")
    if graph.inconsistencies:
        for msg in graph.inconsistencies:
            click.echo(f"inconsistency: {msg}", err=True)
        sys.exit(1)


@main.command("periods")
@param_options
@click.option("--arc", "arc_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True,
              help="CSV with header traj_id,s,re,im.")
@click.option("--traj", "traj_id", default=None, help="Which polyline to use; default: the one joining a and b.")
def cmd_periods(a, b, lam, A, B, arc_file, traj_id) -> None:
    """Period of an arc from a to b read from a CSV file."""
    cfg = RunConfig("periods", a, b, lam, A, B)
    p = _params_or_exit(cfg)
    try:
        polys = read_polyline_csv(arc_file)
    except (ValueError, OSError) as exc:
        raise click.UsageError(f"cannot read {arc_file}: {exc}") from exc
    tol = 1e-6 * p.scale

    def joins(pts: np.ndarray) -> bool:
        ends = (complex(pts[0]), complex(pts[-1]))
        return (abs(ends[0] - p.a) <= tol and abs(ends[1] - p.b) <= tol) or \
               (abs(ends[0] - p.b) <= tol and abs(ends[1] - p.a) <= tol)

    if traj_id is None:
        ids = [k for k, v in polys.items() if len(v) > 1 and joins(v)]
        ids.sort(key=lambda k: not k.startswith("short"))
        if not ids:
            click.echo("no polyline in the file joins a and b", err=True)
            sys.exit(1)
        traj_id = ids[0]
    if traj_id not in polys:
        raise click.UsageError(f"no polyline {traj_id!r} in {arc_file}")
    pts = polys[traj_id].copy()
    if not joins(pts):
        click.echo(f"polyline {traj_id} does not join a and b", err=True)
        sys.exit(1)
    # snap the endpoints onto the zeros exactly
    pts[0] = p.a if abs(pts[0] - p.a) <= tol else p.b
    pts[-1] = p.b if pts[0] == p.a else p.a
    try:
        arc = PathPolyline(pts)
        rep = classify_arc(p, arc)
    except PeriodError as exc:
        click.echo(f"period failure: {exc}", err=True)
        sys.exit(1)
    click.echo(f"arc {traj_id}: {len(pts)} points")
    click.echo(f"value = {format_complex(rep.value)}  est_error = {rep.est_error:.3e}")
    click.echo(f"matched class: {rep.matched_class}  sign: {rep.sign}  winding (-1,+1): {rep.winding}")
    if rep.jacobi_value is not None:
        click.echo(f"jacobi-normalized value = {format_complex(rep.jacobi_value)}")
    for d in rep.diagnostics:
        click.echo(f"note: {d}")
    if rep.matched_class is None:
        sys.exit(1)


@main.command("jacobi")
@param_options
@window_options
@click.option("--n", "n", type=click.IntRange(min=0), required=True, help="Polynomial degree.")
@click.option("--prefix", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="Output prefix for _roots.csv, .json and .svg.")
@click.option("--tol-root", type=float, default=jacobi.TOL_POLY, show_default=True,
              help="Root certificate tolerance.")
def cmd_jacobi(a, b, lam, A, B, center, half_width, n, prefix, tol_root) -> None:
    """Zeros of P_n^(nA, nB) against the short trajectory of the critical graph."""
    cfg = RunConfig("jacobi", a, b, lam, A, B, prefix=prefix, center=center, half_width=half_width)
    if A is None or B is None:
        raise click.UsageError("the jacobi command needs --A and --B")
    p = _params_or_exit(cfg)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    try:
        rs = jacobi.roots(jacobi.build(n, n * A, n * B), tol=tol_root)
    except jacobi.JacobiError as exc:
        click.echo(f"root finding failed: {exc}", err=True)
        sys.exit(1)
    roots_path = Path(f"{prefix}_roots.csv")
    with open(roots_path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["index", "re", "im"])
        for k, z in enumerate(sorted(rs.roots, key=lambda z: (z.real, z.imag))):
            w.writerow([k, repr(float(z.real)), repr(float(z.imag))])
    report = structure_report(p)
    report["n"] = n
    report["roots"] = {"degree": rs.degree, "certificate": rs.residual, "residual_norm": rs.residual_norm,
                       "method": rs.method_report}
    graph = None
    status = 0
    if rs.degree == 0:
        click.echo("empty root set: comparison skipped")
        report["comparison"] = None
    else:
        graph = tracer.build_graph(p)
        report["topology"] = graph.topology.value
        if not graph.shorts:
            report["comparison"] = {"error": "the critical graph has no short trajectory"}
            click.echo("no short trajectory; Property P report:", err=True)
            click.echo(json.dumps(_clean(report["property_p"]), sort_keys=True), err=True)
            status = 1
        else:
            cmp = jacobi.compare(A, B, n, graph)
            report["comparison"] = cmp.to_dict()
            click.echo(f"n = {n}: mean distance {cmp.mean_dist:.4g}, max {cmp.max_dist:.4g}, "
                       f"outliers {cmp.outliers}, |mass| {abs(cmp.mass_check) if cmp.mass_check else float('nan'):.12g}")
    if rs.degree == 1:
        click.echo(f"single root {format_complex(complex(rs.roots[0]))}")
    dump_json(report, prefix.with_suffix(".json"))
    fig = draw_graph(p, graph, cfg.window(p), f"zeros of P_{n} over the critical graph")
    for z in rs.roots:
        fig.dot(complex(z), "#1f77b4", 2.5)
    fig.save(prefix.with_suffix(".svg"))
    sys.exit(status)


@main.command("verify")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for the random cases.")
@click.option("--tol-root", type=float, default=jacobi.TOL_POLY, show_default=True,
              help="Root certificate tolerance.")
@click.option("--graphs", type=click.IntRange(min=0), default=6, show_default=True,
              help="Random triples for the Property P check.")
def cmd_verify(seed, tol_root, graphs) -> None:
    """Run the seeded invariant suite; exit 0 iff every check passes."""
    RunConfig("verify", seed=seed)
    checks = [
        lambda: suite.check_identities(seed),
        lambda: suite.check_residue_oracle(seed),
        lambda: suite.check_period_classes(seed),
        lambda: suite.check_jacobi(seed, tol_root=tol_root),
    ]
    if graphs:
        checks.append(lambda: suite.check_property_p(seed, graphs))
    failed = False
    for run in checks:
        res = run()
        click.echo(res.row())
        for case in res.failures:
            click.echo("    " + json.dumps(_clean(case), sort_keys=True))
        failed = failed or not res.passed
    click.echo("all checks passed" if not failed else "verification FAILED")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
