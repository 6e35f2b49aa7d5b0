"""Micro-triangulation, graded coupled meshes and bond traces.

Triangles are stored by the integer lattice coordinates of their vertices
(unwrapped, so a triangle crossing the cell boundary keeps its true shape)
together with the site indices of those vertices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import (
    TraceRecords,
    bond_triangle_density,
    clip_segments_triangles,
    cross,
    orient_triangles,
    point_in_triangles,
)
from .lattice import (
    A6,
    DET_A6,
    NN_DIRECTIONS,
    LatticeDomain,
    hexnorm,
    to_cartesian,
)

ATOMISTIC = 0
CONTINUUM = 1


class MeshError(ValueError):
    pass


# ----------------------------------------------------------------------------
# basic triangle mesh


@dataclass(eq=False)
class TriMesh:
    """Periodic triangulation with lattice-point vertices."""

    domain: LatticeDomain
    tri: np.ndarray  # (nt, 3, 2) int, counterclockwise
    region: np.ndarray  # (nt,) ATOMISTIC or CONTINUUM

    def __post_init__(self):
        self.tri = orient_triangles(self.tri)
        self.tri_sites = self.domain.index(self.tri)
        X = to_cartesian(self.tri)
        E = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=2)  # columns are edge vectors
        self.area = 0.5 * (E[:, 0, 0] * E[:, 1, 1] - E[:, 0, 1] * E[:, 1, 0])
        if np.any(self.area <= 0):
            raise MeshError("degenerate or inverted triangle")
        Einv = np.linalg.inv(E)
        # gradients of the barycentric basis functions, (nt, 3, 2)
        g = np.zeros((len(self.tri), 3, 2))
        g[:, 1] = Einv[:, 0, :]
        g[:, 2] = Einv[:, 1, :]
        g[:, 0] = -g[:, 1] - g[:, 2]
        self.basis_grad = g

    @property
    def n_triangles(self) -> int:
        return len(self.tri)

    def cartesian(self) -> np.ndarray:
        return to_cartesian(self.tri)

    def edge_lengths(self) -> np.ndarray:
        X = self.cartesian()
        return np.stack([np.linalg.norm(X[:, (k + 1) % 3] - X[:, k], axis=1) for k in range(3)], axis=1)

    def diameters(self) -> np.ndarray:
        return self.edge_lengths().max(axis=1)

    def angles(self) -> np.ndarray:
        """Interior angles in degrees, (nt, 3)."""
        X = self.cartesian()
        out = np.empty((len(X), 3))
        for k in range(3):
            u = X[:, (k + 1) % 3] - X[:, k]
            v = X[:, (k + 2) % 3] - X[:, k]
            c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            out[:, k] = np.degrees(np.arccos(np.clip(c, -1, 1)))
        return out

    def centroids(self) -> np.ndarray:
        return self.cartesian().mean(axis=1)

    def edges(self):
        """Periodic edge list.

        Returns ``(keys, owners)`` where each unique edge is identified by
        the site of one end point plus the lattice vector to the other, and
        ``owners`` is an (ne, 2) array of the adjacent triangles (-1 if an
        edge has only one neighbour).
        """
        p = self.tri.reshape(-1, 2)
        q = np.roll(self.tri, -1, axis=1).reshape(-1, 2)
        sp_ = self.domain.index(p)
        sq = self.domain.index(q)
        d = q - p
        # canonical orientation: smaller site first, ties by direction sign
        flip = (sq < sp_) | ((sq == sp_) & ((d[:, 0] < 0) | ((d[:, 0] == 0) & (d[:, 1] < 0))))
        s0 = np.where(flip, sq, sp_)
        dv = np.where(flip[:, None], -d, d)
        keys = np.c_[s0, dv]
        uniq, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        owners = -np.ones((len(uniq), 2), dtype=np.int64)
        tri_of = np.repeat(np.arange(len(self.tri)), 3)
        order = np.argsort(inv, kind="stable")
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv[order][1:] != inv[order][:-1]
        owners[inv[order][first], 0] = tri_of[order][first]
        second = ~first
        owners[inv[order][second], 1] = tri_of[order][second]
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        return uniq, owners

    def check_conforming(self, interface_radius: int | None = None):
        """Raise unless every edge is shared by exactly two triangles and the areas tile the cell.

        With ``interface_radius`` set, unpaired edges are tolerated on the
        boundary of the hexagon of that radius, where coarse elements meet
        unit triangles with hanging nodes.
        """
        keys, owners = self.edges()
        single = owners[:, 1] < 0
        if interface_radius is not None and single.any():
            t = owners[single, 0]
            p = self.tri[t]
            on = (hexnorm(p) == interface_radius).sum(axis=1) >= 2
            single[np.flatnonzero(single)[on]] = False
        if np.any(single):
            raise MeshError("mesh has boundary edges or hanging nodes")
        total = self.area.sum()
        if abs(total - self.domain.area) > 1e-9 * self.domain.area:
            raise MeshError(f"triangle areas sum to {total}, cell area is {self.domain.area}")


def _micro_triangles(base):
    """Up and down unit triangles attached to the lattice points ``base``."""
    a1, a2, a3 = NN_DIRECTIONS[0], NN_DIRECTIONS[1], NN_DIRECTIONS[2]
    up = np.stack([base, base + a1, base + a2], axis=1)
    down = np.stack([base, base + a2, base + a3], axis=1)
    return np.concatenate([up, down])


def micro_triangulation(domain: LatticeDomain) -> TriMesh:
    """Unit triangulation of the whole periodic cell (2 |L| triangles)."""
    tri = _micro_triangles(domain.sites)
    return TriMesh(domain, tri, np.full(len(tri), ATOMISTIC))


def hexagon_micro_triangles(K: int) -> np.ndarray:
    """Unit triangles tiling the closed hexagon of side K centred at the origin."""
    g = np.arange(-K - 1, K + 1)
    I, J = np.meshgrid(g, g, indexing="ij")
    tri = _micro_triangles(np.c_[I.ravel(), J.ravel()])
    keep = (hexnorm(tri) <= K).all(axis=1)
    return tri[keep]


# ----------------------------------------------------------------------------
# graded ring meshes


@dataclass(frozen=True)
class MeshPlan:
    """Parameters of a graded coupled mesh.

    K : atoms per side of the hexagonal atomistic region.
    hK : element size along the interface (divides K).
    alpha : grading exponent of h(r) = hK (r/K)^alpha.
    family : "radial" (alpha = 1) or "algebraic".
    """

    K: int
    hK: int = 1
    alpha: float = 1.0
    family: str = "radial"
    min_angle: float = 20.0

    def __post_init__(self):
        if self.family not in ("radial", "algebraic"):
            raise MeshError(f"unknown mesh family {self.family!r}")
        if self.family == "radial" and self.alpha != 1.0:
            object.__setattr__(self, "alpha", 1.0)
        if not (1 <= self.hK <= self.K):
            raise MeshError("need 1 <= hK <= K")
        if self.alpha <= 0:
            raise MeshError("alpha must be positive")

    def h(self, r):
        return self.hK * (np.asarray(r, dtype=float) / self.K) ** self.alpha


def _side_parameters(R: int, n: int) -> np.ndarray:
    m = np.floor(np.arange(n + 1) * R / n + 0.5).astype(np.int64)
    m[0], m[-1] = 0, R
    if np.any(np.diff(m) <= 0):
        raise MeshError(f"cannot place {n} segments on a side of length {R}")
    return m


def _ring_sides(R: int, n: int):
    """Vertex chains of the six sides of the hexagonal ring of radius R.

    Sides 3..5 are the periodic translates (reversed) of sides 0..2, so the
    outer ring matches itself across the cell boundary.
    """
    m = _side_parameters(R, n)
    sides = []
    for k in range(6):
        a, b = NN_DIRECTIONS[k], NN_DIRECTIONS[(k + 1) % 6]
        mk = m if k < 3 else (R - m[::-1])
        sides.append((R - mk)[:, None] * a + mk[:, None] * b)
    return sides


def _zip_strip(P, Q):
    """Triangulate the strip between chains P (inner) and Q (outer) with shortest diagonals."""
    tris = []
    i = j = 0
    XP, XQ = to_cartesian(P), to_cartesian(Q)
    while i < len(P) - 1 or j < len(Q) - 1:
        if i == len(P) - 1:
            adv_inner = False
        elif j == len(Q) - 1:
            adv_inner = True
        else:
            d_inner = np.linalg.norm(XP[i + 1] - XQ[j])
            d_outer = np.linalg.norm(XQ[j + 1] - XP[i])
            adv_inner = d_inner <= d_outer
        if adv_inner:
            tris.append((P[i], Q[j], P[i + 1]))
            i += 1
        else:
            tris.append((P[i], Q[j], Q[j + 1]))
            j += 1
    return tris


def ring_schedule(N: int, plan: MeshPlan):
    """Ring radii R_0 = K < ... < R_L = N and per-side subdivision counts."""
    K, hK = plan.K, plan.hK
    if K % hK:
        raise MeshError("hK must divide K")
    if K >= N:
        raise MeshError("atomistic region must be smaller than the cell (K < N)")
    radii = [K]
    counts = [K // hK]
    while radii[-1] < N:
        R, n = radii[-1], counts[-1]
        g = max(1, int(round(R / n)))
        R_next = R + g
        if N - R_next < 0.6 * g:
            R_next = N
        R_next = min(R_next, N)
        target = R_next / plan.h(R_next)
        lo = max(1, int(np.ceil(n / 2)))
        hi = min(2 * n, R_next)
        n_next = int(np.clip(round(target), lo, hi))
        radii.append(R_next)
        counts.append(n_next)
    return radii, counts


@dataclass(eq=False)
class CoupledMesh(TriMesh):
    """Coupled mesh: unit triangles in the hexagon of side K, graded rings outside."""

    plan: MeshPlan = None
    radii: list = field(default_factory=list)
    counts: list = field(default_factory=list)

    def __post_init__(self):
        super().__post_init__()
        dom = self.domain
        K = self.plan.K
        self.atomistic_triangles = np.flatnonzero(self.region == ATOMISTIC)
        self.continuum_triangles = np.flatnonzero(self.region == CONTINUUM)
        if np.any(hexnorm(dom.vacancy_coords) >= K):
            raise MeshError("every vacancy must lie in the interior of the atomistic region")
        interior = (hexnorm(dom.sites) < K) & ~dom.is_vacancy
        rep = np.zeros(dom.n_sites, dtype=bool)
        rep[interior] = True
        rep[self.tri_sites[self.continuum_triangles].ravel()] = True
        self.repatoms = np.flatnonzero(rep)
        self.dof_of_site = -np.ones(dom.n_sites, dtype=np.int64)
        self.dof_of_site[self.repatoms] = np.arange(len(self.repatoms))
        self.continuum_dofs = self.dof_of_site[self.tri_sites[self.continuum_triangles]]
        self.interpolation = self._build_interpolation()

    @property
    def n_repatoms(self) -> int:
        return len(self.repatoms)

    @property
    def dof_count(self) -> int:
        """Scalar degrees of freedom: two displacement components per repatom."""
        return 2 * len(self.repatoms)

    def _build_interpolation(self):
        """Sparse map from repatom values to values at every lattice site (zero rows at vacancies)."""
        dom = self.domain
        n = dom.n_sites
        rows, cols, vals = [], [], []
        reps = self.repatoms
        rows.append(reps)
        cols.append(np.arange(len(reps)))
        vals.append(np.ones(len(reps)))
        todo = np.ones(n, dtype=bool)
        todo[reps] = False
        todo[dom.is_vacancy] = False
        for t in self.continuum_triangles:
            if not todo.any():
                break
            T = self.tri[t]
            lo, hi = T.min(axis=0), T.max(axis=0)
            gi = np.arange(lo[0], hi[0] + 1)
            gj = np.arange(lo[1], hi[1] + 1)
            I, J = np.meshgrid(gi, gj, indexing="ij")
            P = np.c_[I.ravel(), J.ravel()]
            P = P[point_in_triangles(P, T[None])]
            s = dom.index(P)
            sel = todo[s]
            if not sel.any():
                continue
            P, s = P[sel], s[sel]
            # barycentric coordinates in lattice coordinates (affine invariant)
            a2 = cross(T[1] - T[0], T[2] - T[0])
            lam = np.empty((len(P), 3))
            for k in range(3):
                lam[:, k] = cross(T[(k + 2) % 3] - T[(k + 1) % 3], P - T[(k + 1) % 3]) / a2
            dofs = self.dof_of_site[self.tri_sites[t]]
            for k in range(3):
                nz = lam[:, k] != 0
                rows.append(s[nz])
                cols.append(np.full(nz.sum(), dofs[k]))
                vals.append(lam[nz, k])
            todo[s] = False
        if todo.any():
            raise MeshError("some lattice sites are not covered by the mesh")
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, len(reps))
        )

    def element_sizes(self):
        """(h_T, r_T) of the continuum triangles: longest edge and centroid distance to the origin."""
        c = self.continuum_triangles
        return self.diameters()[c], np.linalg.norm(self.centroids()[c], axis=1)

    def mesh_size_ratio(self) -> np.ndarray:
        h, r = self.element_sizes()
        return h / self.plan.h(r)


def build_graded_mesh(domain: LatticeDomain, plan: MeshPlan, check: bool = True) -> CoupledMesh:
    """Coupled mesh on a hexagonal cell: unit triangles inside the hexagon of side K, rings outside."""
    if domain.cell != "hexagon":
        raise MeshError("graded meshes are built on hexagonal cells")
    N = domain.N
    radii, counts = ring_schedule(N, plan)
    tris = [hexagon_micro_triangles(plan.K)]
    regions = [np.full(len(tris[0]), ATOMISTIC)]
    strip = []
    inner = _ring_sides(radii[0], counts[0])
    for R, n in zip(radii[1:], counts[1:]):
        outer = _ring_sides(R, n)
        for k in range(6):
            strip.extend(_zip_strip(inner[k], outer[k]))
        inner = outer
    strip = np.array(strip, dtype=np.int64)
    tris.append(strip)
    regions.append(np.full(len(strip), CONTINUUM))
    mesh = CoupledMesh(domain, np.concatenate(tris), np.concatenate(regions), plan, radii, counts)
    if check:
        mesh.check_conforming(interface_radius=plan.K if plan.hK > 1 else None)
        amin = mesh.angles()[mesh.continuum_triangles].min()
        if amin < plan.min_angle:
            raise MeshError(f"minimum angle {amin:.1f} deg below the floor {plan.min_angle} deg")
    return mesh


# ----------------------------------------------------------------------------
# bond traces


@dataclass
class BondTrace:
    """Pieces of one bond: triangle index, parameter interval and whether the piece lies on an edge."""

    site: int
    direction: np.ndarray
    triangles: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    on_edge: np.ndarray

    def total_length(self) -> float:
        """Parameter length covered, counting pieces on shared edges once."""
        w = np.where(self.on_edge, 0.5, 1.0) * (self.t1 - self.t0)
        return float(w.sum())


def trace_bond(mesh: TriMesh, site: int, r, triangles=None) -> BondTrace:
    """Exact traversal of the bond (x, x + r) through the periodic mesh."""
    dom = mesh.domain
    r = np.asarray(r, dtype=np.int64)
    x = dom.sites[site]
    if triangles is None:
        triangles = np.arange(mesh.n_triangles)
    shifts = dom.periodic_shifts()
    out_t, out0, out1, oe = [], [], [], []
    for z in shifts:
        T = mesh.tri[triangles] + z
        res = clip_segments_triangles(np.broadcast_to(x, (len(T), 2)), np.broadcast_to(r, (len(T), 2)), T)
        sel = res.positive
        out_t.append(np.asarray(triangles)[sel])
        out0.append(res.t0[sel])
        out1.append(res.t1[sel])
        oe.append(res.on_boundary[sel])
    t0 = np.concatenate(out0)
    order = np.argsort(t0, kind="stable")
    tr = BondTrace(site, r, np.concatenate(out_t)[order], t0[order], np.concatenate(out1)[order], np.concatenate(oe)[order])
    if abs(tr.total_length() - 1.0) > 1e-12 and len(triangles) == mesh.n_triangles:
        raise MeshError("inconsistent bond traversal")
    return tr


def bond_density_check(T, r) -> float:
    """Sum over lattice bonds with direction r of the bond-averaged characteristic function of T."""
    return bond_triangle_density(T, r)


def directional_average(mesh: TriMesh, trace: BondTrace, grads: np.ndarray) -> np.ndarray:
    """Bond average of the directional derivative of a piecewise affine map.

    ``grads`` holds the constant gradient on every triangle, (nt, 2, 2).
    """
    rc = to_cartesian(trace.direction)
    w = np.where(trace.on_edge, 0.5, 1.0) * (trace.t1 - trace.t0)
    return np.einsum("k,kij,j->i", w, grads[trace.triangles], rc)


# ----------------------------------------------------------------------------
# gradients of piecewise affine fields


def triangle_gradients(mesh: TriMesh, site_values: np.ndarray, B=None) -> np.ndarray:
    """Constant gradients (nt, 2, 2) of the piecewise affine interpolant of site values.

    ``site_values`` are displacements at every site (vacancies extended);
    with ``B`` the deformation gradient B + grad u is returned.
    """
    u = np.asarray(site_values, dtype=float)[mesh.tri_sites]  # (nt, 3, 2)
    G = np.einsum("tki,tkj->tij", u, mesh.basis_grad)
    if B is not None:
        G = G + np.asarray(B, dtype=float)
    return G


def jump_seminorm(mesh: TriMesh, site_values: np.ndarray, p: float = 2.0, exclude_atomistic: bool = True) -> float:
    """(sum_f h_f |[grad y]_f|^p)^(1/p) over interior edges, optionally skipping edges inside the atomistic region."""
    G = triangle_gradients(mesh, site_values)
    keys, owners = mesh.edges()
    a, b = owners[:, 0], owners[:, 1]
    ok = b >= 0
    if exclude_atomistic:
        ok &= ~((mesh.region[a] == ATOMISTIC) & (mesh.region[np.maximum(b, 0)] == ATOMISTIC))
    jump = np.linalg.norm((G[a[ok]] - G[b[ok]]).reshape(-1, 4), axis=1)
    h = np.linalg.norm(to_cartesian(keys[ok, 1:]), axis=1)
    if np.isinf(p):
        return float(jump.max(initial=0.0))
    return float((h * jump**p).sum() ** (1.0 / p))
