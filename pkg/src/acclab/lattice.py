"""Periodic triangular lattice, vacancies, bond enumeration and finite differences.

Sites are stored in integer coordinates (i, j) with respect to the basis
a1 = (1, 0), a2 = (1/2, sqrt(3)/2). Cartesian positions are A6 @ (i, j).
All symmetry and wrapping decisions are made in exact integer arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT3 = np.sqrt(3.0)
A6 = np.array([[1.0, 0.5], [0.0, SQRT3 / 2.0]])
DET_A6 = SQRT3 / 2.0

# nearest-neighbour directions a1..a6 in lattice coordinates
NN_DIRECTIONS = np.array([(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)], dtype=np.int64)

# rotation by pi/3 acting on integer lattice coordinates
Q6_INT = np.array([[0, -1], [1, 1]], dtype=np.int64)
Q6 = np.array([[0.5, -SQRT3 / 2.0], [SQRT3 / 2.0, 0.5]])

DEFAULT_CUTOFF = 3.1


class LatticeError(ValueError):
    pass


def to_cartesian(p):
    """Map integer lattice coordinates (..., 2) to cartesian coordinates."""
    return np.asarray(p, dtype=float) @ A6.T


def hexnorm(p):
    """Hexagonal norm max(|i|, |j|, |i+j|); its unit ball is the hexagon with vertices a_k."""
    p = np.asarray(p)
    return np.maximum(np.maximum(np.abs(p[..., 0]), np.abs(p[..., 1])), np.abs(p[..., 0] + p[..., 1]))


def squared_length(p):
    """Exact squared cartesian length i^2 + i j + j^2 of integer lattice vectors."""
    p = np.asarray(p, dtype=np.int64)
    return p[..., 0] ** 2 + p[..., 0] * p[..., 1] + p[..., 1] ** 2


# ----------------------------------------------------------------------------
# directions and orbits


@dataclass(frozen=True)
class OrbitDecomposition:
    """Orbits of lattice directions under the rotation Q6.

    Attributes
    ----------
    representatives : (n, 2) int array
        One member per orbit, the one with polar angle in [0, pi/3).
    lengths : (n,) float array
        Orbit lengths, nondecreasing.
    members : (n, 6, 2) int array
        ``members[k, j] = Q6^j representatives[k]``.
    """

    cutoff: float
    representatives: np.ndarray
    lengths: np.ndarray
    members: np.ndarray

    @property
    def directions(self) -> np.ndarray:
        """All directions, orbit by orbit."""
        return self.members.reshape(-1, 2)

    def __len__(self):
        return len(self.lengths)


def _angle_key(p):
    c = to_cartesian(p)
    return np.mod(np.arctan2(c[..., 1], c[..., 0]), 2 * np.pi)


def orbit_decomposition(cutoff: float = DEFAULT_CUTOFF) -> OrbitDecomposition:
    """Group all nonzero lattice directions with |r| <= cutoff into Q6-orbits."""
    if cutoff < 1:
        raise LatticeError("cutoff must be at least the nearest-neighbour distance 1")
    m = int(np.ceil(2 * cutoff / SQRT3)) + 1
    g = np.arange(-m, m + 1)
    I, J = np.meshgrid(g, g, indexing="ij")
    pts = np.c_[I.ravel(), J.ravel()].astype(np.int64)
    l2 = squared_length(pts)
    c2 = cutoff * cutoff
    keep = (l2 > 0) & (l2 <= c2 + 1e-9)
    pts = pts[keep]
    # representatives: angle in [0, pi/3), i.e. i > 0 and j >= 0
    reps = pts[(pts[:, 0] > 0) & (pts[:, 1] >= 0)]
    order = np.lexsort((_angle_key(reps), squared_length(reps)))
    reps = reps[order]
    members = np.empty((len(reps), 6, 2), dtype=np.int64)
    for k, r in enumerate(reps):
        v = r.copy()
        for j in range(6):
            members[k, j] = v
            v = Q6_INT @ v
    lengths = np.sqrt(squared_length(reps).astype(float))
    return OrbitDecomposition(float(cutoff), reps, lengths, members)


def bond_directions(cutoff: float = DEFAULT_CUTOFF) -> np.ndarray:
    """Lattice directions with |r| <= cutoff, sorted by length then angle."""
    d = orbit_decomposition(cutoff).directions
    order = np.lexsort((_angle_key(d), squared_length(d)))
    return d[order]


# ----------------------------------------------------------------------------
# periodic domain


def hexagon_period(N: int) -> np.ndarray:
    """Integer period matrix (columns) of the hexagonal cell with side N."""
    return N * np.array([[1, -1], [1, 2]], dtype=np.int64)


@dataclass(eq=False)
class LatticeDomain:
    """Periodic triangular lattice with a vacancy set.

    Parameters
    ----------
    N : int
        Period parameter.
    cell : {"parallelogram", "hexagon"}
        ``"parallelogram"`` is the cell A6 (0, N]^2 with sites (i, j) in
        {1..N}^2; ``"hexagon"`` is the hexagon of side N centred at the
        origin with 3 N^2 sites, periodic under the columns of
        ``hexagon_period(N)``.
    vacancies : iterable of (i, j)
        Vacancy sites, wrapped into the cell.
    """

    N: int
    cell: str = "parallelogram"
    vacancy_coords: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        if self.N < 1:
            raise LatticeError("N must be positive")
        if self.cell == "parallelogram":
            self.period = self.N * np.eye(2, dtype=np.int64)
        elif self.cell == "hexagon":
            self.period = hexagon_period(self.N)
        else:
            raise LatticeError(f"unknown cell type {self.cell!r}")
        self._period_inv_num = np.array(
            [[self.period[1, 1], -self.period[0, 1]], [-self.period[1, 0], self.period[0, 0]]], dtype=np.int64
        )
        self._det = int(round(np.linalg.det(self.period)))
        self.sites = self._enumerate_sites()
        lo = self.sites.min(axis=0)
        span = self.sites.max(axis=0) - lo + 1
        self._lo, self._span = lo, span
        table = -np.ones(span[0] * span[1], dtype=np.int64)
        table[(self.sites[:, 0] - lo[0]) * span[1] + self.sites[:, 1] - lo[1]] = np.arange(len(self.sites))
        self._table = table
        vac = np.asarray(self.vacancy_coords, dtype=float).reshape(-1, 2)
        if np.any(vac != np.round(vac)):
            raise LatticeError("vacancy coordinates must be integers")
        vac = self.wrap(vac.astype(np.int64))
        idx = self.index(vac)
        if len(np.unique(idx)) != len(idx):
            raise LatticeError("duplicate vacancies after periodic wrap")
        self.vacancy_coords = vac
        self.vacancy_index = np.sort(idx)
        self.is_vacancy = np.zeros(len(self.sites), dtype=bool)
        self.is_vacancy[self.vacancy_index] = True
        self.active = np.flatnonzero(~self.is_vacancy)

    # -- site bookkeeping -------------------------------------------------
    @property
    def n_sites(self) -> int:
        """|L|: number of lattice sites in the cell, vacancies included."""
        return len(self.sites)

    @property
    def n_active(self) -> int:
        """Number of atoms (sites that are not vacancies)."""
        return len(self.active)

    @property
    def area(self) -> float:
        return self._det * DET_A6

    def _enumerate_sites(self):
        if self.cell == "parallelogram":
            g = np.arange(1, self.N + 1)
            I, J = np.meshgrid(g, g, indexing="ij")
            return np.c_[I.ravel(), J.ravel()].astype(np.int64)
        g = np.arange(-self.N, self.N + 1)
        I, J = np.meshgrid(g, g, indexing="ij")
        pts = np.c_[I.ravel(), J.ravel()].astype(np.int64)
        pts = pts[hexnorm(pts) <= self.N]
        pts = np.unique(self.wrap(pts), axis=0)
        assert len(pts) == 3 * self.N**2
        return pts

    def wrap(self, p) -> np.ndarray:
        """Periodic representative of integer lattice points (..., 2)."""
        p = np.asarray(p, dtype=np.int64)
        shape = p.shape
        p = p.reshape(-1, 2)
        if self.cell == "parallelogram":
            out = np.mod(p - 1, self.N) + 1
            return out.reshape(shape)
        # reduce into the period parallelogram, then pick the minimal hexnorm copy
        num = p @ self._period_inv_num.T
        f = np.floor_divide(num, self._det)
        q = p - f @ self.period.T
        best = None
        best_key = None
        for a in (-1, 0, 1, 2):
            for b in (-1, 0, 1, 2):
                cand = q + self.period @ np.array([a, b], dtype=np.int64) * -1
                # key: hexnorm first, then a fixed lexicographic tie-break
                key = (hexnorm(cand) * (8 * self.N + 8) + (cand[:, 0] + 2 * self.N + 2)) * (8 * self.N + 8) + (
                    cand[:, 1] + 2 * self.N + 2
                )
                if best is None:
                    best, best_key = cand.copy(), key
                else:
                    sel = key < best_key
                    best[sel] = cand[sel]
                    best_key = np.where(sel, key, best_key)
        return best.reshape(shape)

    def index(self, p) -> np.ndarray:
        """Site index of (already wrapped or not) lattice points."""
        q = self.wrap(p)
        shape = q.shape[:-1]
        q = q.reshape(-1, 2)
        k = (q[:, 0] - self._lo[0]) * self._span[1] + q[:, 1] - self._lo[1]
        out = self._table[k]
        assert np.all(out >= 0)
        return out.reshape(shape)

    def positions(self) -> np.ndarray:
        """Cartesian positions of all sites (vacancies included)."""
        return to_cartesian(self.sites)

    def periodic_shifts(self) -> np.ndarray:
        """The zero shift and the nearest period vectors (lattice coordinates)."""
        P = self.period
        combos = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]
        return np.array([P @ np.array(c) for c in combos], dtype=np.int64)

    def with_vacancies(self, vacancies) -> "LatticeDomain":
        return LatticeDomain(self.N, self.cell, np.asarray(vacancies, dtype=np.int64).reshape(-1, 2))


def build_domain(N: int, vacancy_pattern=(), cell: str = "parallelogram") -> LatticeDomain:
    """Build a periodic lattice domain with the given vacancies (wrapped into the cell)."""
    if N < 4:
        raise LatticeError("N must be at least 4")
    vac = np.asarray(list(vacancy_pattern), dtype=float).reshape(-1, 2)
    return LatticeDomain(int(N), cell, vac)


def vacancy_separation(domain: LatticeDomain) -> float:
    """Minimum Euclidean distance between distinct vacancies over all periodic images."""
    v = domain.vacancy_coords
    if len(v) == 0:
        return np.inf
    best = np.inf
    shifts = domain.periodic_shifts()
    for a in range(len(v)):
        for b in range(len(v)):
            d = v[b] - v[a] + shifts
            l2 = squared_length(d)
            if a == b:
                l2 = l2[np.any(d != 0, axis=1)]
            best = min(best, float(np.sqrt(l2.min())))
    return best


# ----------------------------------------------------------------------------
# bonds


@dataclass(frozen=True)
class BondSet:
    """Ordered bonds (x, x + r) with x in the cell.

    ``site`` and ``neighbour`` are site indices, ``direction`` indexes into
    ``directions``. ``full`` marks whether vacancy-touching bonds are kept.
    """

    site: np.ndarray
    neighbour: np.ndarray
    direction: np.ndarray
    directions: np.ndarray
    full: bool
    atomistic: np.ndarray | None = None

    def __len__(self):
        return len(self.site)

    @property
    def vectors(self) -> np.ndarray:
        """Reference bond vectors r_b in lattice coordinates."""
        return self.directions[self.direction]

    @property
    def cartesian(self) -> np.ndarray:
        return to_cartesian(self.vectors)

    @property
    def lengths(self) -> np.ndarray:
        return np.sqrt(squared_length(self.vectors).astype(float))

    def subset(self, mask) -> "BondSet":
        at = None if self.atomistic is None else self.atomistic[mask]
        return BondSet(self.site[mask], self.neighbour[mask], self.direction[mask], self.directions, self.full, at)


def enumerate_bonds(domain: LatticeDomain, directions=None, full: bool = False) -> BondSet:
    """Enumerate bonds up to the cutoff.

    With ``full=False`` only bonds between two atoms are returned; with
    ``full=True`` all bonds from every lattice site are returned, including
    those touching vacancies.
    """
    if directions is None:
        directions = bond_directions(DEFAULT_CUTOFF)
    directions = np.asarray(directions, dtype=np.int64)
    n, nd = domain.n_sites, len(directions)
    site = np.repeat(np.arange(n), nd)
    dirs = np.tile(np.arange(nd), n)
    nbr = domain.index(domain.sites[site] + directions[dirs])
    if not full:
        keep = ~domain.is_vacancy[site] & ~domain.is_vacancy[nbr]
        site, nbr, dirs = site[keep], nbr[keep], dirs[keep]
    return BondSet(site, nbr, dirs, directions, full)


def nearest_neighbour_bonds(domain: LatticeDomain, full: bool = False) -> BondSet:
    return enumerate_bonds(domain, NN_DIRECTIONS, full)


class UnextendedVacancyError(LatticeError):
    pass


def finite_difference(domain: LatticeDomain, v, site, r, B=None) -> np.ndarray:
    """D_b v = v(x + r) - v(x) for bonds starting at ``site`` with lattice direction ``r``.

    ``v`` holds displacements either on all sites (vacancies extended) or on
    the atoms only (length ``domain.n_active``). When a macroscopic strain
    ``B`` is given, the result is the deformation difference B r + D_b v.
    """
    v = np.asarray(v, dtype=float)
    site = np.atleast_1d(np.asarray(site))
    r = np.asarray(r, dtype=np.int64).reshape(-1, 2)
    nbr = domain.index(domain.sites[site] + r)
    if len(v) == domain.n_sites:
        full = v
    elif len(v) == domain.n_active:
        if np.any(domain.is_vacancy[nbr]) or np.any(domain.is_vacancy[site]):
            raise UnextendedVacancyError("bond touches a vacancy; apply the extension operator first")
        full = np.zeros((domain.n_sites, 2))
        full[domain.active] = v
    else:
        raise LatticeError("field has the wrong number of sites")
    d = full[nbr] - full[site]
    if B is not None:
        d = d + to_cartesian(r) @ np.asarray(B, dtype=float).T
    return d


def hexagonal_identities_check(G, r):
    """Return (sum_j |G Q^j r|^2, sum_j [(Q^j r)^T G (Q^j r)]^2) over the six rotations of r."""
    G = np.asarray(G, dtype=float)
    r = np.asarray(r, dtype=float)
    s1 = 0.0
    s2 = 0.0
    v = r
    for _ in range(6):
        Gv = G @ v
        s1 += Gv @ Gv
        s2 += (v @ Gv) ** 2
        v = Q6 @ v
    return s1, s2


def hexagonal_identity_targets(G):
    """Right-hand sides 3|G|^2 and 3/2 |sym G|^2 + 3/4 (tr G)^2 for a unit direction."""
    G = np.asarray(G, dtype=float)
    sym = 0.5 * (G + G.T)
    return 3.0 * np.sum(G * G), 1.5 * np.sum(sym * sym) + 0.75 * np.trace(G) ** 2
