import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shorttraj.geometry import (
    PathPolyline,
    distance_to_polyline,
    hausdorff_distance,
    point_segment_distance,
    winding_number,
)

coord = st.floats(-10, 10, allow_nan=False)


def test_segment_endpoints_are_exact():
    z0, z1 = 0.1 + 0.7j, -0.3 + 0.2j
    seg = PathPolyline.segment(z0, z1, 7)
    assert seg.start == z0 and seg.end == z1
    path = PathPolyline.through(z0, 2j, z1, per_leg=5)
    assert path.start == z0 and path.end == z1
    assert 2j in path.points


def test_length_and_reverse():
    seg = PathPolyline.segment(0, 3 + 4j, 10)
    assert seg.length == pytest.approx(5.0)
    assert seg.reversed().start == 3 + 4j


def test_closed_polyline_drops_repeated_point():
    pts = np.array([0, 1, 1j, 0])
    loop = PathPolyline(pts, closed=True)
    assert len(loop) == 3
    assert loop.length == pytest.approx(2 + math.sqrt(2))


def test_concat_keeps_junction_once():
    a = PathPolyline.segment(0, 1, 2)
    b = PathPolyline.segment(1, 1 + 1j, 2)
    assert len(a.concat(b)) == 5


def test_winding_numbers():
    c = PathPolyline.circle(0, 1.0)
    assert winding_number(c, 0) == 1
    assert winding_number(c, 2) == 0
    assert winding_number(PathPolyline.circle(0, 1.0, clockwise=True), 0.2j) == -1
    double = PathPolyline(np.exp(1j * np.linspace(0, 4 * math.pi, 400, endpoint=False)), closed=True)
    assert winding_number(double, 0.1) == 2


def test_winding_on_the_curve_is_an_error():
    with pytest.raises(ValueError):
        winding_number(PathPolyline.circle(0, 1.0, n=4), 1.0)


@given(coord, coord, coord, coord, coord, coord)
@settings(max_examples=200, deadline=None)
def test_point_segment_distance_matches_dense_sampling(x0, y0, x1, y1, px, py):
    z0, z1, p = complex(x0, y0), complex(x1, y1), complex(px, py)
    d = float(point_segment_distance(p, z0, z1))
    dense = np.min(np.abs(z0 + (z1 - z0) * np.linspace(0, 1, 20001) - p))
    assert d <= dense + 1e-12
    assert dense - d <= abs(z1 - z0) / 20000 + 1e-12


def test_distance_and_hausdorff():
    seg = PathPolyline.segment(-1, 1)
    assert distance_to_polyline(np.array([0.5j, 2.0]), seg) == pytest.approx([0.5, 1.0])
    other = PathPolyline.segment(-1 + 0.1j, 1 + 0.1j, 5)
    assert hausdorff_distance(seg, other) == pytest.approx(0.1)
