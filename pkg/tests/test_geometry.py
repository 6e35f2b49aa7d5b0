from fractions import Fraction

import numpy as np
import pytest
from shapely.geometry import LineString, Polygon

from acclab.geometry import (
    bond_triangle_density,
    clip_interval,
    clip_segments_triangles,
    orient_triangles,
    point_in_triangles,
    segments_touch_hexagon,
)
from acclab.lattice import DET_A6, hexnorm, to_cartesian


def _random_lattice_triangle(rng, span=6):
    while True:
        T = rng.integers(-span, span + 1, size=(3, 2))
        e1, e2 = T[1] - T[0], T[2] - T[0]
        if e1[0] * e2[1] - e1[1] * e2[0] != 0:
            return orient_triangles(T[None])[0]


def test_clip_interval_exact_rationals():
    # t >= 1/3 and t <= 3/4
    res = clip_interval([[-1, 3]], [[3, -4]])
    assert (Fraction(int(res.lo_num[0]), int(res.lo_den[0])), Fraction(int(res.hi_num[0]), int(res.hi_den[0]))) == (
        Fraction(1, 3),
        Fraction(3, 4),
    )
    assert res.positive[0]
    # infeasible parallel constraint
    assert not clip_interval([[-1]], [[0]]).hit[0]


def test_segment_through_vertex_is_a_point():
    tri = orient_triangles(np.array([[[0, 0], [2, 0], [0, 2]]]))
    res = clip_segments_triangles(np.array([[2, 0]]), np.array([[1, 0]]), tri)
    assert res.hit[0] and not res.positive[0]


def test_segment_on_edge_flagged():
    tri = orient_triangles(np.array([[[0, 0], [2, 0], [0, 2]]]))
    res = clip_segments_triangles(np.array([[0, 0]]), np.array([[1, 0]]), tri)
    assert res.positive[0] and res.on_boundary[0]
    assert res.length[0] == 1.0


def test_clipped_length_matches_shapely(rng):
    for _ in range(300):
        T = _random_lattice_triangle(rng)
        x = rng.integers(-6, 7, size=2)
        r = rng.integers(-4, 5, size=2)
        if not r.any():
            continue
        res = clip_segments_triangles(x[None], r[None], T[None])
        seg = LineString(to_cartesian(np.array([x, x + r])))
        poly = Polygon(to_cartesian(T))
        ref = seg.intersection(poly).length / np.linalg.norm(to_cartesian(r))
        assert res.length[0] == pytest.approx(ref, abs=1e-12)


def test_bond_density_identity(rng):
    for _ in range(20):
        T = _random_lattice_triangle(rng, 4)
        area = abs(np.linalg.det(np.c_[to_cartesian(T[1] - T[0]), to_cartesian(T[2] - T[0])]))/2
        for r in ([1, 0], [1, 1], [2, -1], [0, 3]):
            assert bond_triangle_density(T, np.array(r)) == pytest.approx(area / DET_A6, rel=1e-12)


def test_point_in_triangle_closed():
    tri = orient_triangles(np.array([[[0, 0], [3, 0], [0, 3]]]))
    pts = np.array([[0, 0], [1, 1], [3, 0], [2, 2], [-1, 0]])
    assert point_in_triangles(pts, tri).tolist() == [True, True, True, False, False]


def test_hexagon_touch_matches_sampling(rng):
    K = 3
    x = rng.integers(-7, 8, size=(400, 2))
    r = rng.integers(-3, 4, size=(400, 2))
    got = segments_touch_hexagon(x, r, K)
    # lattice segments touch the lattice hexagon iff one of their sample points
    # at parameter k/L (L = 60) lies inside it (hexnorm is piecewise linear)
    t = np.linspace(0, 1, 61)
    pts = x[:, None, :] + t[None, :, None] * r[:, None, :]
    s = pts[..., 0] + pts[..., 1]
    hn = np.maximum.reduce([np.abs(pts[..., 0]), np.abs(pts[..., 1]), np.abs(s)])
    ref = (hn <= K + 1e-12).any(axis=1)
    assert np.array_equal(got, ref)
    assert hexnorm(np.array([K, 0])) == K
