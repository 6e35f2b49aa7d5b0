"""Closed-form coercivity constants and Hessian spectra.

The shell constants bound the second variation from below, orbit by orbit,
in terms of the singular-value range [m, M] of the deformation; gamma
combines them with the strain deviation Delta and the vacancy stability
index kappa into a lower bound for the coupled Hessian relative to
||B^T grad u||^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from .defects import build_extension
from .lattice import DEFAULT_CUTOFF, orbit_decomposition, to_cartesian
from .mesh import micro_triangulation
from .potential import PairPotential

GRID_STEP = 1e-4
TAIL_RADIUS = 30.0


class OutOfTheoryError(ValueError):
    pass


def _grid_min(f, m, M):
    if M - m < GRID_STEP:
        return float(min(f(np.array([m]))[0], f(np.array([M]))[0]))
    s = np.append(np.arange(m, M, GRID_STEP), M)
    v = f(s)
    k = int(np.argmin(v))
    best = float(v[k])
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: float(f(np.array([x]))[0]), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
        best = min(best, float(res.fun))
    return best


@dataclass
class ShellConstants:
    lengths: np.ndarray
    c: np.ndarray
    c_perp: np.ndarray
    tail: float = 0.0
    tail_perp: float = 0.0

    @property
    def c_sum(self) -> float:
        return float(self.c.sum())

    @property
    def c_perp_sum(self) -> float:
        return float(self.c_perp.sum())


def _orbit_terms(potential, ell, m, M, first):
    if first:
        c = _grid_min(lambda s: potential.ddphi(s) / s**2, m, M)
        cp = _grid_min(lambda s: potential.dphi(s) / s**3, m, M)
        return c, cp
    c = min(0.0, _grid_min(lambda s: ell**2 * potential.ddphi(s * ell) / s**2, m, M))
    cp = min(0.0, _grid_min(lambda s: ell * potential.dphi(s * ell) / s**3, m, M))
    return c, cp


def shell_constants(potential: PairPotential, m: float, M: float, cutoff: float = DEFAULT_CUTOFF, tail: bool = False) -> ShellConstants:
    """Per-orbit constants c_n, c_n^perp over stretches s in [m, M].

    Orbits of equal length (the two orbits of length sqrt 7) are counted
    separately. With ``tail`` the contribution of orbits beyond the cutoff
    (up to radius 30) is reported as well.
    """
    if not (0 < m <= M):
        raise ValueError("need 0 < m <= M")
    orb = orbit_decomposition(cutoff)
    c, cp = [], []
    for n, ell in enumerate(orb.lengths):
        a, b = _orbit_terms(potential, ell, m, M, n == 0)
        c.append(a)
        cp.append(b)
    out = ShellConstants(np.array(orb.lengths), np.array(c), np.array(cp))
    if tail:
        far = orbit_decomposition(TAIL_RADIUS)
        extra = [_orbit_terms(potential, ell, m, M, False) for ell in far.lengths if ell > cutoff]
        out.tail = float(sum(e[0] for e in extra))
        out.tail_perp = float(sum(e[1] for e in extra))
    return out


def gamma_hom(potential: PairPotential, m: float, M: float, cutoff: float = DEFAULT_CUTOFF) -> float:
    """Homogeneous coercivity constant min(3/4 c + 9/4 c_perp, 9/4 c + 3/4 c_perp)."""
    sc = shell_constants(potential, m, M, cutoff)
    c, cp = sc.c_sum, sc.c_perp_sum
    return float(min(0.75 * c + 2.25 * cp, 2.25 * c + 0.75 * cp))


@dataclass
class StabilityReport:
    m: float
    M: float
    delta: float
    kappa: float
    shells: ShellConstants
    gamma1: float
    gamma1_perp: float
    gamma2: float
    gamma2_perp: float
    gamma: float
    gamma_hom: float


def _combine(c, cp, delta, kappa):
    d, k = delta, kappa
    sk, s3 = np.sqrt(k), np.sqrt(3.0)
    c1, cn = c[0], c[1:].sum()
    p1, pn = cp[0], cp[1:].sum()
    g1 = min((0.75 * k - 3 * sk * d - 3 * d * d) * c1, (0.75 + 3 * d + 3 * d * d) * c1) + (0.75 + 3 * d + 3 * d * d) * cn
    g1p = min((2.25 * k - 3 * np.sqrt(3 * k) * d - 3 * d * d) * p1, (2.25 + 3 * s3 * d + 3 * d * d) * p1) + (
        2.25 + 3 * s3 * d + 3 * d * d
    ) * pn
    g2 = min((2.25 * k - 6 * sk * d - 3 * d * d) * c1, (2.25 + 6 * d + 3 * d * d) * c1) + (2.25 + 6 * d + 3 * d * d) * cn
    g2p = min((0.75 * k - 2 * np.sqrt(3 * k) * d - 3 * d * d) * p1, (0.75 + 2 * s3 * d + 3 * d * d) * p1) + (
        0.75 + 2 * s3 * d + 3 * d * d
    ) * pn
    return g1, g1p, g2, g2p


def gamma(potential: PairPotential, m: float, M: float, delta: float = 0.0, kappa: float = 1.0, cutoff: float = DEFAULT_CUTOFF) -> StabilityReport:
    """Coercivity constant for deformations with stretches in [m, M], strain deviation delta and vacancy index kappa."""
    if not (0 < kappa <= 1):
        raise ValueError("kappa must lie in (0, 1]")
    if delta < 0 or delta > np.sqrt(kappa) / 2 + 1e-15:
        raise OutOfTheoryError(f"delta={delta} outside [0, sqrt(kappa)/2] = [0, {np.sqrt(kappa) / 2:.6f}]")
    sc = shell_constants(potential, m, M, cutoff)
    g1, g1p, g2, g2p = _combine(sc.c, sc.c_perp, delta, kappa)
    c, cp = sc.c_sum, sc.c_perp_sum
    ghom = min(0.75 * c + 2.25 * cp, 2.25 * c + 0.75 * cp)
    g1, g1p, g2, g2p = (float(g) for g in (g1, g1p, g2, g2p))
    return StabilityReport(m, M, delta, kappa, sc, g1, g1p, g2, g2p, min(g1 + g1p, g2 + g2p), float(ghom))


# ----------------------------------------------------------------------------
# measured deformation parameters


@dataclass
class DeformationClassifier:
    m: float
    M: float
    delta: float
    parts: dict = field(default_factory=dict)

    def contains(self, m: float, M: float, delta: float) -> bool:
        """Membership of the measured deformation in the set with parameters (m, M, delta)."""
        return self.m >= m and self.M <= M and self.delta <= delta


def classify_deformation(model, U) -> DeformationClassifier:
    """Tight (m, M, Delta) for a coupled or atomistic displacement field.

    Bond stretches |D_b y| / |b| and element singular values give m and M;
    Delta is the largest relative bond deviation |B^{-1} D_b y - r_b| / |b|
    or Frobenius deviation ||B^{-1} grad y - I|| on continuum elements.
    """
    Us = model.site_displacement(U)
    bonds = model.bonds
    Binv = np.linalg.inv(model.B)
    parts = {}
    if len(bonds):
        D = model._bond_vectors(Us, bonds)
        L = bonds.lengths
        st = np.linalg.norm(D, axis=1) / L
        dev = np.linalg.norm(D @ Binv.T - bonds.cartesian, axis=1) / L
        parts.update(bond_min=float(st.min()), bond_max=float(st.max()), bond_delta=float(dev.max()))
    if hasattr(model, "triangle_gradients") and len(getattr(model, "ct", [])):
        F = model.triangle_gradients(U)
        sv = np.linalg.svd(F, compute_uv=False)
        dev = np.linalg.norm(Binv @ F - np.eye(2), axis=(1, 2))
        parts.update(elem_min=float(sv[:, -1].min()), elem_max=float(sv[:, 0].max()), elem_delta=float(dev.max()))
    m = min(v for k, v in parts.items() if k.endswith("_min"))
    M = max(v for k, v in parts.items() if k.endswith("_max"))
    delta = max(v for k, v in parts.items() if k.endswith("_delta"))
    return DeformationClassifier(m, M, delta, parts)


def extended_gradient_operator(model, extension=None) -> sp.csr_matrix:
    """Sparse D with |D U|^2 = ||B^T grad u||^2 over the whole cell (U flattened).

    Vacancy values are filled in by the optimal extension of the atom
    values. For a coupled model the gradient is taken on the mesh
    triangles, for an atomistic model on the unit triangulation.
    """
    dom = model.domain
    ext = build_extension(dom) if extension is None else extension
    mesh = getattr(model, "mesh", None) or micro_triangulation(dom)
    nt = mesh.n_triangles
    # rows (t, i, j) of sqrt|T| (B^T G_T)_ij; columns (site, l)
    t, k, i, j, l = np.meshgrid(np.arange(nt), np.arange(3), np.arange(2), np.arange(2), np.arange(2), indexing="ij")
    rows = (4 * t + 2 * i + j).ravel()
    cols = (2 * mesh.tri_sites[t, k] + l).ravel()
    vals = (np.sqrt(mesh.area)[t] * model.B[l, i] * mesh.basis_grad[t, k, j]).ravel()
    G = sp.csr_matrix((vals, (rows, cols)), shape=(4 * nt, 2 * dom.n_sites))
    S_active = sp.kron(model.S[dom.active], sp.identity(2), format="csr")
    return (G @ ext.matrix @ S_active).tocsr()


def extended_gradient_norm_sq(model, U, operator=None) -> float:
    """||B^T grad u||^2 with vacancy values from the optimal extension; see ``extended_gradient_operator``."""
    D = extended_gradient_operator(model) if operator is None else operator
    return float(np.sum((D @ np.asarray(U, dtype=float).ravel()) ** 2))


# ----------------------------------------------------------------------------
# spectra


def homogeneous_atomistic_spectrum(potential: PairPotential, B, cutoff: float = DEFAULT_CUTOFF, n_k: int = 48, n_dir: int = 72):
    """Smallest normalised eigenvalue of the homogeneous lattice Hessian at y = B x.

    Evaluates the dynamical matrix D(theta) = sum_r 2 (1 - cos theta.r) H_r
    on an n_k x n_k grid of the Brillouin torus (theta != 0), normalised by
    the largest 2 (1 - cos theta.r) over the shell, and the acoustic tensor
    sum_r (n.r)^2 H_r for n_dir long-wave directions. Returns the minimum
    over both; the lattice is stable when it is positive.
    """
    orb = orbit_decomposition(cutoff)
    R = orb.directions
    _, _, H = potential.value_grad_hess(to_cartesian(R) @ np.asarray(B, dtype=float).T)
    g = 2 * np.pi * np.arange(n_k) / n_k
    T1, T2 = np.meshgrid(g, g, indexing="ij")
    theta = np.c_[T1.ravel(), T2.ravel()][1:]
    w = 2.0 * (1.0 - np.cos(theta @ R.T))  # (nk, nr)
    Dm = np.einsum("kr,rij->kij", w, H) / w.max(axis=1)[:, None, None]
    lam_short = np.linalg.eigvalsh(Dm)[:, 0].min()
    ang = np.pi * np.arange(n_dir) / n_dir
    n = np.c_[np.cos(ang), np.sin(ang)]
    # long waves: theta = eps n in lattice-coordinate dual; (theta.r)^2 with r integer
    a = (n @ R.T) ** 2
    Am = np.einsum("kr,rij->kij", a, H) / a.max(axis=1)[:, None, None]
    lam_long = np.linalg.eigvalsh(Am)[:, 0].min()
    return float(min(lam_short, lam_long))


def homogeneous_atomistic_stable(potential, m: float, M: float, cutoff: float = DEFAULT_CUTOFF, n_rot: int = 24, tol: float = 1e-10) -> bool:
    """Stability of every sampled B = diag(M, m) V^T (V rotations by multiples of pi / n_rot over a period)."""
    for a in np.pi * np.arange(n_rot) / n_rot:
        V = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        B = np.diag([M, m]) @ V.T
        if homogeneous_atomistic_spectrum(potential, B, cutoff) <= tol:
            return False
    return True


def cell_wavevectors(domain) -> np.ndarray:
    """Wavevectors theta (lattice-coordinate dual, mod 2 pi) of all displacement modes periodic on the cell."""
    P = np.asarray(domain.period, dtype=np.int64)
    n = int(round(abs(np.linalg.det(P))))
    adj = np.array([[P[1, 1], -P[0, 1]], [-P[1, 0], P[0, 0]]])
    e = n // np.gcd.reduce(np.abs(adj).ravel())  # smallest e with e P^-1 integral
    g = np.arange(e)
    I, J = np.meshgrid(g, g, indexing="ij")
    m = np.c_[I.ravel(), J.ravel()]
    frac = np.unique(np.round((m @ np.linalg.inv(P)) * n).astype(np.int64) % n, axis=0)
    assert len(frac) == n
    return 2.0 * np.pi * frac / n


def periodic_lattice_spectrum(potential: PairPotential, B, domain, cutoff: float = DEFAULT_CUTOFF, theta=None) -> float:
    """Lowest non-translational Hessian eigenvalue of the defect-free periodic lattice at y = B x.

    The Hessian is block circulant, so its spectrum is the union of the
    2 x 2 dynamical matrices sum_r 2 (1 - cos theta.r) phi''-blocks over the
    wavevectors of the cell; theta = 0 carries the two translations.
    ``theta`` may pass precomputed ``cell_wavevectors(domain)``.
    """
    if len(domain.vacancy_index):
        raise ValueError("block-circulant spectrum needs a defect-free lattice")
    R = orbit_decomposition(cutoff).directions
    _, _, H = potential.value_grad_hess(to_cartesian(R) @ np.asarray(B, dtype=float).T)
    theta = cell_wavevectors(domain) if theta is None else theta
    theta = theta[np.any(theta != 0, axis=1)]
    D = np.einsum("kr,rij->kij", 2.0 * (1.0 - np.cos(theta @ R.T)), H)
    return float(np.linalg.eigvalsh(D)[:, 0].min())


class EigenvalueError(RuntimeError):
    pass


DENSE_LIMIT = 3000


def lowest_hessian_eigenvalue(H, n_nodes: int | None = None, tol: float = 1e-8, shift: float = -1.0, return_vector: bool = False):
    """Smallest eigenvalue of a symmetric Hessian on the complement of rigid translations.

    Below DENSE_LIMIT unknowns the projected matrix is diagonalised
    directly; above, shift-invert Lanczos is applied to H + alpha T T^T
    (translations moved to alpha) using a rank-2 Woodbury update of the
    sparse factorisation of H - shift I.
    """
    H = sp.csr_matrix(H)
    n = H.shape[0]
    nn = n // 2 if n_nodes is None else n_nodes
    T = np.zeros((n, 2))
    T[0::2, 0] = 1.0
    T[1::2, 1] = 1.0
    T /= np.sqrt(nn)
    if n <= DENSE_LIMIT:
        Q, _ = np.linalg.qr(T, mode="complete")
        Z = Q[:, 2:]
        Hd = H.toarray()
        w, V = sla.eigh(Z.T @ Hd @ Z, subset_by_index=[0, 0])
        vec = Z @ V[:, 0]
        return (float(w[0]), vec) if return_vector else float(w[0])
    alpha = float(abs(H).sum(axis=1).max())  # Gershgorin bound: above the whole spectrum
    lu = spla.splu((H - shift * sp.identity(n)).tocsc(), permc_spec="MMD_AT_PLUS_A")
    Y = lu.solve(T)
    cap = np.linalg.inv(np.eye(2) / alpha + T.T @ Y)

    def op(x):
        y = lu.solve(x)
        return y - Y @ (cap @ (T.T @ y))

    Hdef = spla.LinearOperator((n, n), matvec=lambda x: H @ x + alpha * (T @ (T.T @ x)), dtype=float)
    OPinv = spla.LinearOperator((n, n), matvec=op, dtype=float)
    try:
        w, V = spla.eigsh(Hdef, k=2, sigma=shift, which="LM", OPinv=OPinv, tol=tol * 1e-2, maxiter=5000)
    except spla.ArpackNoConvergence as exc:
        raise EigenvalueError(f"shift-invert Lanczos did not converge: {exc}") from exc
    k = int(np.argmin(w))
    vec = V[:, k]
    res = float(np.linalg.norm(H @ vec + alpha * T @ (T.T @ vec) - w[k] * vec))
    if res > 1e-5 * max(1.0, abs(w[k])):
        raise EigenvalueError(f"eigenvector residual {res:.2e}")
    return (float(w[k]), vec) if return_vector else float(w[k])
