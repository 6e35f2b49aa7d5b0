"""Atomistic and coupled energies, forces, Hessians and error norms.

Displacement fields are (n, 2) arrays. For the atomistic model the degrees
of freedom are the displacements of all atoms; for the coupled model they
are the displacements of the repatoms. A sparse interpolation matrix S maps
degrees of freedom to displacements at every lattice site (zero rows at
vacancies), so deformed bond vectors are B r + (S U)[x + r] - (S U)[x].
Flattened vectors and Hessians use the interleaved ordering 2 i + c.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import trapezoid

from .geometry import segments_touch_hexagon, trace_triangles
from .lattice import (
    DEFAULT_CUTOFF,
    DET_A6,
    BondSet,
    LatticeDomain,
    bond_directions,
    enumerate_bonds,
    hexnorm,
    to_cartesian,
)
from .mesh import CoupledMesh, TriMesh, micro_triangulation
from .potential import PairPotential, cauchy_born_density

ADMISSIBLE_FRACTION = 0.3


@dataclass
class EnergyBreakdown:
    total: float
    atomistic: float
    continuum: float
    interface: float


def _block_coo(rows, cols, blocks, n):
    """Sparse (2n, 2n) matrix from 2x2 blocks at block positions (rows, cols)."""
    r = (2 * rows[:, None, None] + np.arange(2)[None, :, None]).repeat(2, axis=2)
    c = (2 * cols[:, None, None] + np.arange(2)[None, None, :]).repeat(2, axis=1)
    return sp.coo_matrix((blocks.ravel(), (r.ravel(), c.ravel())), shape=(2 * n, 2 * n)).tocsr()


def _symmetrize(H):
    """Exact symmetry (rounding in sparse products can break it at the last digit)."""
    H = H.tocsr()
    return ((H + H.T) * 0.5).tocsr()


def _expand(S):
    """Kronecker product S (x) I_2 in the interleaved ordering."""
    return sp.kron(S, sp.identity(2), format="csr")


class EnergyModel:
    """Common machinery: a bond sum over site displacements pulled back through S."""

    def __init__(self, domain: LatticeDomain, potential: PairPotential, B=None, cutoff: float = DEFAULT_CUTOFF):
        self.domain = domain
        self.potential = potential
        self.cutoff = cutoff
        self.B = np.eye(2) if B is None else np.asarray(B, dtype=float)
        if np.linalg.det(self.B) <= 0:
            raise ValueError("macroscopic strain must have positive determinant")
        self.directions = bond_directions(cutoff)
        self.rc = to_cartesian(self.directions)

    # subclasses set: self.S (n_sites x n_dof), self.bonds (BondSet), self._S2
    @property
    def n_dof(self) -> int:
        return self.S.shape[1]

    def zero(self) -> np.ndarray:
        return np.zeros((self.n_dof, 2))

    def site_displacement(self, U) -> np.ndarray:
        return self.S @ np.asarray(U, dtype=float).reshape(-1, 2)

    def _bond_vectors(self, Us, bonds: BondSet):
        return bonds.cartesian @ self.B.T + Us[bonds.neighbour] - Us[bonds.site]

    def _bond_energy(self, U, bonds):
        D = self._bond_vectors(self.site_displacement(U), bonds)
        return float(np.sum(self.potential.phi(np.linalg.norm(D, axis=1))))

    def _bond_gradient(self, U, bonds):
        D = self._bond_vectors(self.site_displacement(U), bonds)
        _, g, _ = self.potential.value_grad_hess(D)
        n = self.domain.n_sites
        G = np.zeros((n, 2))
        for c in range(2):
            G[:, c] = np.bincount(bonds.neighbour, g[:, c], n) - np.bincount(bonds.site, g[:, c], n)
        return self.S.T @ G

    def _bond_hessian(self, U, bonds):
        D = self._bond_vectors(self.site_displacement(U), bonds)
        _, _, H = self.potential.value_grad_hess(D)
        a, b = bonds.site, bonds.neighbour
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([a, b, b, a])
        blocks = np.concatenate([H, H, -H, -H])
        Hs = _block_coo(rows, cols, blocks, self.domain.n_sites)
        return _symmetrize(self._S2.T @ Hs @ self._S2)

    def _bond_admissible(self, U, bonds, fraction):
        if len(bonds) == 0:
            return True
        D = self._bond_vectors(self.site_displacement(U), bonds)
        return bool(np.all(np.linalg.norm(D, axis=1) >= fraction * bonds.lengths))

    # interface for solvers
    def energy(self, U) -> float:
        raise NotImplementedError

    def gradient(self, U) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, U) -> sp.csr_matrix:
        raise NotImplementedError

    def admissible(self, U, fraction: float = ADMISSIBLE_FRACTION) -> bool:
        raise NotImplementedError

    def translation_modes(self) -> np.ndarray:
        """Orthonormal (2 n_dof, 2) basis of rigid translations."""
        T = np.zeros((2 * self.n_dof, 2))
        T[0::2, 0] = 1.0
        T[1::2, 1] = 1.0
        return T / np.sqrt(self.n_dof)

    def dof_positions(self) -> np.ndarray:
        """Reference Cartesian positions of the degrees of freedom."""
        raise NotImplementedError


class AtomisticModel(EnergyModel):
    """Periodic atomistic energy: sum over bonds between atoms of phi(|D_b y|)."""

    def __init__(self, domain, potential, B=None, cutoff=DEFAULT_CUTOFF):
        super().__init__(domain, potential, B, cutoff)
        self.bonds = enumerate_bonds(domain, self.directions)
        self.dof_sites = domain.active
        self.S = sp.csr_matrix(
            (np.ones(len(self.dof_sites)), (self.dof_sites, np.arange(len(self.dof_sites)))),
            shape=(domain.n_sites, len(self.dof_sites)),
        )
        self._S2 = _expand(self.S)

    def with_strain(self, B) -> "AtomisticModel":
        m = object.__new__(AtomisticModel)
        m.__dict__.update(self.__dict__)
        m.B = np.asarray(B, dtype=float)
        return m

    def energy(self, U):
        return self._bond_energy(U, self.bonds)

    def gradient(self, U):
        return self._bond_gradient(U, self.bonds)

    def hessian(self, U):
        return self._bond_hessian(U, self.bonds)

    def admissible(self, U, fraction=ADMISSIBLE_FRACTION):
        return self._bond_admissible(U, self.bonds, fraction)

    def dof_positions(self):
        return to_cartesian(self.domain.sites[self.dof_sites])

    def from_sites(self, site_values) -> np.ndarray:
        return np.asarray(site_values, dtype=float)[self.dof_sites]


def touching_bond_mask(domain: LatticeDomain, directions, K: int) -> np.ndarray:
    """(n_sites, nd) mask of all bonds (vacancies included) meeting a periodic copy of the closed hexagon of side K."""
    n, nd = domain.n_sites, len(directions)
    x = np.repeat(domain.sites, nd, axis=0)
    r = np.tile(directions, (n, 1))
    mask = np.zeros(n * nd, dtype=bool)
    for z in domain.periodic_shifts():
        mask |= segments_touch_hexagon(x, r, K, centre=z)
    return mask.reshape(n, nd)


def _near_hexagon_triangles(mesh: TriMesh, triangles, K: int, reach: int) -> np.ndarray:
    """Triangles whose bounding box meets the box around a periodic copy of the hexagon of side K + reach."""
    T = mesh.tri[triangles]
    lo, hi = T.min(axis=1), T.max(axis=1)
    keep = np.zeros(len(triangles), dtype=bool)
    R = K + reach
    for z in mesh.domain.periodic_shifts():
        keep |= np.all((lo <= z + R) & (hi >= z - R), axis=1)
    return np.asarray(triangles)[keep]


class CoupledModel(EnergyModel):
    """Energy-based atomistic/continuum coupling with bond integrals.

    Bonds meeting the closed atomistic hexagon (or a periodic copy) are
    kept as atomistic bonds; every other bond is replaced by the average of
    phi along the segment, which is piecewise constant over the continuum
    triangles it crosses. Summed over bonds this gives per-triangle,
    per-direction weights omega[T, r] and

        E(U) = sum_{b atomistic} phi(D_b y) + sum_T sum_r omega[T, r] phi(F_T r).

    The weights are computed from the bond-density identity
    sum_b (bond fraction in T) = |T| / det A6, by subtracting the traced
    fractions of the (few) non-continuum bonds that enter continuum triangles.
    """

    def __init__(self, mesh: CoupledMesh, potential, B=None, cutoff=DEFAULT_CUTOFF, weights: str = "density"):
        super().__init__(mesh.domain, potential, B, cutoff)
        self.mesh = mesh
        dom = self.domain
        K = mesh.plan.K
        self.S = mesh.interpolation
        self._S2 = _expand(self.S)
        touch = touching_bond_mask(dom, self.directions, K)
        self.touch = touch
        all_bonds = enumerate_bonds(dom, self.directions)
        self.bonds = all_bonds.subset(touch[all_bonds.site, all_bonds.direction])
        self.continuum_bonds = all_bonds.subset(~touch[all_bonds.site, all_bonds.direction])
        ct = mesh.continuum_triangles
        self.ct = ct
        self.dofs = mesh.continuum_dofs
        self.tri_area = mesh.area[ct]
        self.basis_grad = mesh.basis_grad[ct]
        # c[t, k, d] = g_k . r_d
        self.coef = np.einsum("tki,di->tkd", self.basis_grad, self.rc)
        self.reach = int(np.ceil(np.max(np.abs(self.directions))))
        if weights == "density":
            self.omega = self._density_weights()
        elif weights == "traced":
            self.omega = self._traced_weights()
        else:
            raise ValueError("weights must be 'density' or 'traced'")

    def with_strain(self, B) -> "CoupledModel":
        m = object.__new__(CoupledModel)
        m.__dict__.update(self.__dict__)
        m.B = np.asarray(B, dtype=float)
        return m

    def _records_to_weights(self, rec, triangles):
        pos = -np.ones(self.mesh.n_triangles, dtype=np.int64)
        pos[self.ct] = np.arange(len(self.ct))
        W = np.zeros((len(self.ct), len(self.directions)))
        np.add.at(W, (pos[rec.triangle], rec.direction), rec.weight)
        return W

    def interface_records(self):
        """Traces of all bonds (vacancy bonds included) that meet the atomistic region, through continuum triangles."""
        if not hasattr(self, "_interface"):
            tris = _near_hexagon_triangles(self.mesh, self.ct, self.mesh.plan.K, self.reach)
            self._interface = trace_triangles(self.domain, self.mesh.tri, self.directions, bond_mask=self.touch, triangles=tris)
        return self._interface

    def _density_weights(self):
        full = np.repeat((self.tri_area / DET_A6)[:, None], len(self.directions), axis=1)
        return full - self._records_to_weights(self.interface_records(), self.ct)

    def _traced_weights(self):
        act = ~self.domain.is_vacancy
        mask = ~self.touch & act[:, None]
        mask &= act[self.domain.index(self.domain.sites[:, None, :] + self.directions[None])]
        rec = trace_triangles(self.domain, self.mesh.tri, self.directions, bond_mask=mask, triangles=self.ct)
        return self._records_to_weights(rec, self.ct)

    # continuum kernels
    def triangle_gradients(self, U) -> np.ndarray:
        """Deformation gradients F_T = B + grad u_h on continuum triangles, (nt, 2, 2)."""
        U = np.asarray(U, dtype=float).reshape(-1, 2)
        u = U[self.dofs]
        return self.B + np.einsum("tki,tkj->tij", u, self.basis_grad)

    def _continuum_vectors(self, U):
        return np.einsum("tij,dj->tdi", self.triangle_gradients(U), self.rc)

    def continuum_energy(self, U, omega=None) -> float:
        omega = self.omega if omega is None else omega
        D = self._continuum_vectors(U)
        return float(np.sum(omega * self.potential.phi(np.linalg.norm(D, axis=2))))

    def atomistic_energy(self, U) -> float:
        return self._bond_energy(U, self.bonds)

    def energy(self, U):
        return self.atomistic_energy(U) + self.continuum_energy(U)

    def gradient(self, U):
        G = self._bond_gradient(U, self.bonds)
        D = self._continuum_vectors(U)
        _, g, _ = self.potential.value_grad_hess(D)
        gk = np.einsum("td,tdi,tkd->tki", self.omega, g, self.coef)
        for c in range(2):
            G[:, c] += np.bincount(self.dofs.ravel(), gk[:, :, c].ravel(), self.n_dof)
        return G

    def hessian(self, U):
        H = self._bond_hessian(U, self.bonds)
        D = self._continuum_vectors(U)
        _, _, h = self.potential.value_grad_hess(D)
        blocks = np.einsum("td,tdij,tkd,tld->tklij", self.omega, h, self.coef, self.coef)
        rows = np.repeat(self.dofs, 3, axis=1).ravel()
        cols = np.tile(self.dofs, (1, 3)).ravel()
        Hc = _block_coo(rows, cols, blocks.reshape(-1, 2, 2), self.n_dof)
        return _symmetrize(H + Hc)

    def admissible(self, U, fraction=ADMISSIBLE_FRACTION):
        if not self._bond_admissible(U, self.bonds, fraction):
            return False
        F = self.triangle_gradients(U)
        if np.any(np.linalg.det(F) <= 0):
            return False
        return bool(np.all(np.linalg.svd(F, compute_uv=False)[:, -1] >= fraction))

    def dof_positions(self):
        return to_cartesian(self.domain.sites[self.mesh.repatoms])

    def from_sites(self, site_values) -> np.ndarray:
        """Nodal interpolation: restrict site displacements to the repatoms."""
        return np.asarray(site_values, dtype=float)[self.mesh.repatoms]

    # verification forms
    def energy_bond_form(self, U) -> float:
        """Atomistic bonds plus bond integrals of every continuum bond traced explicitly."""
        if not hasattr(self, "_omega_traced"):
            self._omega_traced = self._traced_weights()
        return self.atomistic_energy(U) + self.continuum_energy(U, self._omega_traced)

    def energy_practical(self, U) -> EnergyBreakdown:
        """Atomistic bonds + integral of the Cauchy-Born density over the continuum region + interface correction."""
        ea = self.atomistic_energy(U)
        F = self.triangle_gradients(U)
        ec = float(sum(a * cauchy_born_density(self.potential, f, self.cutoff) for a, f in zip(self.tri_area, F)))
        rec = self.interface_records()
        pos = -np.ones(self.mesh.n_triangles, dtype=np.int64)
        pos[self.ct] = np.arange(len(self.ct))
        D = F[pos[rec.triangle]] @ self.rc[rec.direction][:, :, None]
        phi_i = -float(np.sum(rec.weight * self.potential.phi(np.linalg.norm(D[:, :, 0], axis=1))))
        return EnergyBreakdown(ea + ec + phi_i, ea, ec, phi_i)


# ----------------------------------------------------------------------------
# functional wrappers


def atomistic_energy(domain, potential, U, B=None, cutoff=DEFAULT_CUTOFF) -> float:
    return AtomisticModel(domain, potential, B, cutoff).energy(U)


def atomistic_gradient(domain, potential, U, B=None, cutoff=DEFAULT_CUTOFF) -> np.ndarray:
    return AtomisticModel(domain, potential, B, cutoff).gradient(U)


def atomistic_hessian(domain, potential, U, B=None, cutoff=DEFAULT_CUTOFF) -> sp.csr_matrix:
    return AtomisticModel(domain, potential, B, cutoff).hessian(U)


def acc_energy_bond_form(mesh, potential, U, B=None, cutoff=DEFAULT_CUTOFF) -> float:
    return CoupledModel(mesh, potential, B, cutoff, weights="traced").energy(U)


def acc_energy_practical(mesh, potential, U, B=None, cutoff=DEFAULT_CUTOFF) -> EnergyBreakdown:
    return CoupledModel(mesh, potential, B, cutoff).energy_practical(U)


def acc_gradient(mesh, potential, U, B=None, cutoff=DEFAULT_CUTOFF) -> np.ndarray:
    return CoupledModel(mesh, potential, B, cutoff).gradient(U)


def acc_hessian(mesh, potential, U, B=None, cutoff=DEFAULT_CUTOFF) -> sp.csr_matrix:
    return CoupledModel(mesh, potential, B, cutoff).hessian(U)


def interpolate_nodal(site_values, mesh: CoupledMesh) -> np.ndarray:
    """Values at the repatoms of a lattice displacement field."""
    return np.asarray(site_values, dtype=float)[mesh.repatoms]


# ----------------------------------------------------------------------------
# error norms


def micro_gradients(domain: LatticeDomain, site_values, micro: TriMesh | None = None):
    """Gradients of the P1 interpolant of site displacements on the unit triangulation."""
    micro = micro_triangulation(domain) if micro is None else micro
    u = np.asarray(site_values, dtype=float)[micro.tri_sites]
    return micro, np.einsum("tki,tkj->tij", u, micro.basis_grad)


def evaluate_micro_interpolant(domain: LatticeDomain, site_values, points) -> np.ndarray:
    """Evaluate the P1 interpolant on the unit triangulation at points given in lattice coordinates."""
    p = np.asarray(points, dtype=float)
    base = np.floor(p + 1e-12)
    f = p - base
    f = np.where(np.abs(f) < 1e-12, 0.0, f)
    b = base.astype(np.int64)
    v = np.asarray(site_values, dtype=float)
    u00 = v[domain.index(b)]
    u10 = v[domain.index(b + (1, 0))]
    u01 = v[domain.index(b + (0, 1))]
    u11 = v[domain.index(b + (1, 1))]
    f0, f1 = f[:, :1], f[:, 1:]
    up = u00 + f0 * (u10 - u00) + f1 * (u01 - u00)
    down = u11 + (1 - f1) * (u10 - u11) + (1 - f0) * (u01 - u11)
    return np.where((f0 + f1) <= 1.0 + 1e-12, up, down)


def _edge_average(domain, site_values, p, q):
    """Exact average of the micro interpolant along the lattice segment p -> q."""
    d = q - p
    ts = {0.0, 1.0}
    for comp in (d[0], d[1], d[0] + d[1]):
        m = abs(int(comp))
        ts.update(k / m for k in range(1, m))
    t = np.array(sorted(ts))
    vals = evaluate_micro_interpolant(domain, site_values, p[None, :] + t[:, None] * d[None, :])
    return trapezoid(vals, t, axis=0)


def h1_error(mesh: CoupledMesh, ref_sites, h_sites):
    """L2 distance of gradients between a lattice field and a coupled field.

    ``ref_sites`` and ``h_sites`` are displacements at every site (vacancy
    values extended). The reference is interpolated on the unit
    triangulation; the coupled field is affine on each mesh triangle.
    Returns (absolute, relative), the relative error being normalised by
    the gradient norm of the reference displacement.
    """
    dom = mesh.domain
    micro, Gref = micro_gradients(dom, ref_sites)
    ref_sq = float(np.sum(micro.area * np.sum(Gref**2, axis=(1, 2))))
    at = mesh.atomistic_triangles
    h = np.asarray(h_sites, dtype=float)
    Gh = np.einsum("tki,tkj->tij", h[mesh.tri_sites[at]], mesh.basis_grad[at])
    # reference gradients on the atomistic micro triangles of the mesh
    ua = np.asarray(ref_sites, dtype=float)[mesh.tri_sites[at]]
    Ga = np.einsum("tki,tkj->tij", ua, mesh.basis_grad[at])
    err = float(np.sum(mesh.area[at] * np.sum((Ga - Gh) ** 2, axis=(1, 2))))
    # continuum: int |G_ref|^2 over the complement, minus cross terms
    K = mesh.plan.K
    in_a = (hexnorm(micro.tri) <= K).all(axis=1)
    err += float(np.sum(micro.area[~in_a] * np.sum(Gref[~in_a] ** 2, axis=(1, 2))))
    ct = mesh.continuum_triangles
    Gc = np.einsum("tki,tkj->tij", h[mesh.tri_sites[ct]], mesh.basis_grad[ct])
    for t, G in zip(ct, Gc):
        T = mesh.tri[t]
        X = to_cartesian(T)
        I = np.zeros((2, 2))
        for k in range(3):
            p, q = T[k], T[(k + 1) % 3]
            e = X[(k + 1) % 3] - X[k]
            normal = np.array([e[1], -e[0]])  # outward, scaled by the edge length
            I += np.outer(_edge_average(dom, ref_sites, p, q), normal)
        err += -2.0 * float(np.sum(G * I)) + mesh.area[t] * float(np.sum(G * G))
    err = max(err, 0.0)
    absolute = np.sqrt(err)
    denom = np.sqrt(ref_sq)
    relative = absolute / denom if denom > 0 else float("nan")
    return float(absolute), float(relative)


def p1_stiffness(mesh: TriMesh, node_of_site=None, n_nodes=None) -> sp.csr_matrix:
    """Scalar P1 stiffness matrix of the H1 seminorm on the mesh nodes."""
    sites = mesh.tri_sites
    if node_of_site is None:
        uniq, inv = np.unique(sites, return_inverse=True)
        nodes = inv.reshape(sites.shape)
        n_nodes = len(uniq)
    else:
        nodes = node_of_site[sites]
    k = np.einsum("t,tki,tli->tkl", mesh.area, mesh.basis_grad, mesh.basis_grad)
    rows = np.repeat(nodes, 3, axis=1).ravel()
    cols = np.tile(nodes, (1, 3)).ravel()
    return sp.coo_matrix((k.ravel(), (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()


def residual_dual_norm(mesh: CoupledMesh, g) -> float:
    """Discrete dual norm sqrt(g^T L^{-1} g) of a residual on the repatoms.

    L is the P1 stiffness of the full coupled mesh; vacancy vertices carry
    zero residual and are eliminated (harmonic extension). Translations are
    projected out of g and one node is pinned.
    """
    g = np.asarray(g, dtype=float).reshape(-1, 2)
    g = g - g.mean(axis=0)
    dom = mesh.domain
    node = -np.ones(dom.n_sites, dtype=np.int64)
    node[mesh.repatoms] = np.arange(len(mesh.repatoms))
    vac = np.flatnonzero(dom.is_vacancy)
    node[vac] = len(mesh.repatoms) + np.arange(len(vac))
    n = len(mesh.repatoms) + len(vac)
    L = p1_stiffness(mesh, node, n)
    rhs = np.zeros((n, 2))
    rhs[: len(g)] = g
    keep = np.arange(1, n)
    lu = spla.splu(L[keep][:, keep].tocsc(), permc_spec="MMD_AT_PLUS_A")
    w = lu.solve(rhs[keep])
    return float(np.sqrt(max(np.sum(rhs[keep] * w), 0.0)))
