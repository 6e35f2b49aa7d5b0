"""Exact segment clipping against lattice triangles and hexagons.

Every input point is an integer lattice point, so all incidence decisions
reduce to sign tests of integer cross products. A segment x + t r,
t in [0, 1], satisfies a half-plane constraint iff a + t c >= 0 with
integers a, c; the clipped parameter interval has rational end points
that are compared by cross-multiplication.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeDomain, hexnorm


def cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass
class ClipResult:
    lo_num: np.ndarray
    lo_den: np.ndarray
    hi_num: np.ndarray
    hi_den: np.ndarray
    hit: np.ndarray  # interval nonempty (possibly a single point)
    positive: np.ndarray  # interval has positive length
    on_boundary: np.ndarray  # the clipped part lies on one of the constraint lines

    @property
    def t0(self):
        return self.lo_num / self.lo_den

    @property
    def t1(self):
        return self.hi_num / self.hi_den

    @property
    def length(self):
        # one rounding only: numerator and denominator are exact integers
        num = self.hi_num * self.lo_den - self.lo_num * self.hi_den
        return np.where(self.positive, num / (self.hi_den * self.lo_den), 0.0)


def clip_interval(a, c) -> ClipResult:
    """Intersect [0, 1] with {t : a_k + t c_k >= 0 for all k}.

    ``a`` and ``c`` are integer arrays of shape (m, k).
    """
    a = np.asarray(a, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    m, k = a.shape
    lo_n = np.zeros(m, dtype=np.int64)
    lo_d = np.ones(m, dtype=np.int64)
    hi_n = np.ones(m, dtype=np.int64)
    hi_d = np.ones(m, dtype=np.int64)
    feasible = np.ones(m, dtype=bool)
    on_line = np.zeros(m, dtype=bool)
    for j in range(k):
        aj, cj = a[:, j], c[:, j]
        par = cj == 0
        feasible &= ~(par & (aj < 0))
        on_line |= par & (aj == 0)
        # lower bound t >= -a/c for c > 0
        up = cj > 0
        n, d = -aj, cj
        better = up & (n * lo_d > lo_n * d)
        lo_n = np.where(better, n, lo_n)
        lo_d = np.where(better, d, lo_d)
        # upper bound t <= a/(-c) for c < 0
        dn = cj < 0
        n, d = aj, -cj
        better = dn & (n * hi_d < hi_n * d)
        hi_n = np.where(better, n, hi_n)
        hi_d = np.where(better, d, hi_d)
    cmp = hi_n * lo_d - lo_n * hi_d
    hit = feasible & (cmp >= 0)
    positive = feasible & (cmp > 0)
    return ClipResult(lo_n, lo_d, hi_n, hi_d, hit, positive, on_line & positive)


def clip_segments_triangles(x, r, tri) -> ClipResult:
    """Clip segments x + t r against closed, positively oriented triangles (all integer)."""
    x = np.asarray(x, dtype=np.int64)
    r = np.asarray(r, dtype=np.int64)
    tri = np.asarray(tri, dtype=np.int64)
    a = np.empty((len(x), 3), dtype=np.int64)
    c = np.empty((len(x), 3), dtype=np.int64)
    for k in range(3):
        e = tri[:, (k + 1) % 3] - tri[:, k]
        a[:, k] = cross(e, x - tri[:, k])
        c[:, k] = cross(e, r)
    return clip_interval(a, c)


def hexagon_constraints(x, r, K, centre=(0, 0)):
    """Constraints describing the closed hexagon {hexnorm(p - centre) <= K}."""
    x = np.asarray(x, dtype=np.int64) - np.asarray(centre, dtype=np.int64)
    r = np.asarray(r, dtype=np.int64)
    s = x[:, 0] + x[:, 1]
    rs = r[:, 0] + r[:, 1]
    a = np.stack([K - x[:, 0], K + x[:, 0], K - x[:, 1], K + x[:, 1], K - s, K + s], axis=1)
    c = np.stack([-r[:, 0], r[:, 0], -r[:, 1], r[:, 1], -rs, rs], axis=1)
    return a, c


def segments_touch_hexagon(x, r, K, centre=(0, 0)) -> np.ndarray:
    """True where the closed segment x + t r meets the closed hexagon of side K."""
    a, c = hexagon_constraints(x, r, K, centre)
    return clip_interval(a, c).hit


def orient_triangles(tri) -> np.ndarray:
    """Return triangles with counterclockwise vertex order."""
    tri = np.array(tri, dtype=np.int64)
    area2 = cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    flip = area2 < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return tri


@dataclass
class TraceRecords:
    """Pieces of bonds lying in triangles.

    Each record is a bond (site, direction) and a triangle with the
    parameter interval [t0, t1] of the bond inside the closed triangle.
    ``weight`` is the interval length, halved when the piece lies on an
    edge of the triangle (the pointwise characteristic function equals
    1/2 there).
    """

    triangle: np.ndarray
    site: np.ndarray
    direction: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    weight: np.ndarray
    on_edge: np.ndarray

    def __len__(self):
        return len(self.triangle)


def _concat(parts, n_fields=7):
    if not parts:
        return [np.zeros(0, dtype=np.int64)] * 3 + [np.zeros(0)] * 3 + [np.zeros(0, dtype=bool)]
    return [np.concatenate([p[k] for p in parts]) for k in range(n_fields)]


def trace_triangles(domain: LatticeDomain, tri_coords, directions, bond_mask=None, triangles=None) -> TraceRecords:
    """Trace all bonds of the periodic lattice through the given triangles.

    For each triangle T (integer vertex coordinates, any position in the
    plane) this finds every bond (x, x + r) with x in the cell such that the
    segment meets a periodic copy of T in a set of positive length.

    Parameters
    ----------
    tri_coords : (nt, 3, 2) int array, counterclockwise.
    directions : (nd, 2) int array of bond directions.
    bond_mask : optional (n_sites, nd) bool array; only bonds marked True are traced.
    triangles : optional subset of triangle indices to process.
    """
    tri_coords = np.asarray(tri_coords, dtype=np.int64)
    directions = np.asarray(directions, dtype=np.int64)
    if triangles is None:
        triangles = np.arange(len(tri_coords))
    rmin = directions.min(axis=0)
    rmax = directions.max(axis=0)
    parts = []
    for t in triangles:
        T = tri_coords[t]
        lo = T.min(axis=0)
        hi = T.max(axis=0)
        # candidate start points: segment bounding box meets triangle bounding box
        gi = np.arange(lo[0] - rmax[0], hi[0] - rmin[0] + 1)
        gj = np.arange(lo[1] - rmax[1], hi[1] - rmin[1] + 1)
        I, J = np.meshgrid(gi, gj, indexing="ij")
        P = np.c_[I.ravel(), J.ravel()]
        nP = len(P)
        xs = np.repeat(P, len(directions), axis=0)
        ds = np.tile(np.arange(len(directions)), nP)
        rs = directions[ds]
        ok = (np.minimum(xs, xs + rs) <= hi).all(axis=1) & (np.maximum(xs, xs + rs) >= lo).all(axis=1)
        xs, ds, rs = xs[ok], ds[ok], rs[ok]
        if len(xs) == 0:
            continue
        site = domain.index(xs)
        if bond_mask is not None:
            keep = bond_mask[site, ds]
            xs, ds, rs, site = xs[keep], ds[keep], rs[keep], site[keep]
            if len(xs) == 0:
                continue
        res = clip_segments_triangles(xs, rs, np.broadcast_to(T, (len(xs), 3, 2)))
        sel = res.positive
        if not np.any(sel):
            continue
        length = res.length[sel]
        on_edge = res.on_boundary[sel]
        w = np.where(on_edge, 0.5 * length, length)
        parts.append(
            (
                np.full(sel.sum(), t, dtype=np.int64),
                site[sel],
                ds[sel],
                res.t0[sel],
                res.t1[sel],
                w,
                on_edge,
            )
        )
    f = _concat(parts)
    return TraceRecords(*f)


def bond_triangle_density(tri, r) -> float:
    """Sum over all lattice bonds (x, x + r) of the averaged characteristic function of T.

    The sum runs over the infinite lattice; only bonds meeting T contribute.
    The result equals |T| / det A6 for lattice triangles.
    """
    tri = orient_triangles(np.asarray(tri, dtype=np.int64)[None])[0]
    r = np.asarray(r, dtype=np.int64)
    lo = tri.min(axis=0)
    hi = tri.max(axis=0)
    gi = np.arange(lo[0] - max(r[0], 0), hi[0] - min(r[0], 0) + 1)
    gj = np.arange(lo[1] - max(r[1], 0), hi[1] - min(r[1], 0) + 1)
    I, J = np.meshgrid(gi, gj, indexing="ij")
    xs = np.c_[I.ravel(), J.ravel()]
    rs = np.broadcast_to(r, xs.shape)
    res = clip_segments_triangles(xs, rs, np.broadcast_to(tri, (len(xs), 3, 2)))
    w = np.where(res.on_boundary, 0.5, 1.0) * res.length
    return float(w.sum())


def point_in_triangles(p, tri) -> np.ndarray:
    """Closed point-in-triangle test for integer points and counterclockwise triangles."""
    p = np.asarray(p, dtype=np.int64)
    tri = np.asarray(tri, dtype=np.int64)
    inside = np.ones(np.broadcast_shapes(p.shape[:-1], tri.shape[:-2]), dtype=bool)
    for k in range(3):
        e = tri[..., (k + 1) % 3, :] - tri[..., k, :]
        inside &= cross(e, p - tri[..., k, :]) >= 0
    return inside


def min_hexnorm_of_box(lo, hi) -> int:
    """Smallest hexagonal norm of an integer point in the box [lo, hi]."""
    gi = np.arange(lo[0], hi[0] + 1)
    gj = np.arange(lo[1], hi[1] + 1)
    I, J = np.meshgrid(gi, gj, indexing="ij")
    return int(hexnorm(np.stack([I, J], axis=-1)).min())
