"""Energy minimisation, Newton refinement and load continuation.

Solvers act on any model exposing ``energy``, ``gradient``, ``hessian``,
``admissible``, ``with_strain``, ``S`` and ``n_dof`` (see module assembly).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import NN_DIRECTIONS
from .potential import PotentialSingularityError
from .stability import lowest_hessian_eigenvalue


class SolverError(RuntimeError):
    pass


class LineSearchError(SolverError):
    pass


class BranchLossError(SolverError):
    pass


@dataclass
class SolveConfig:
    tol: float = 1e-8
    maxiter: int = 20000
    c1: float = 1e-4
    c2: float = 0.1
    precond: str = "laplace"
    restart: int = 100
    max_rejections: int = 60

    def __post_init__(self):
        if self.tol <= 0 or self.maxiter <= 0:
            raise ValueError("tolerance and iteration limit must be positive")
        if not (0 < self.c1 < self.c2 < 1):
            raise ValueError("line search needs 0 < c1 < c2 < 1")
        if self.precond not in ("laplace", "none"):
            raise ValueError(f"unknown preconditioner {self.precond!r}")


@dataclass
class SolveResult:
    U: np.ndarray
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)  # (iter, energy, grad_norm, step)

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "energy", "grad_norm", "step"])
            for row in self.trace:
                w.writerow([row[0], repr(float(row[1])), repr(float(row[2])), repr(float(row[3]))])


# ----------------------------------------------------------------------------
# preconditioner


def laplace_matrix(model, shift: float = 1e-2) -> sp.csc_matrix:
    """Nearest-neighbour lattice Laplacian pulled back to the degrees of freedom, plus a small shift.

    For the atomistic model this is the lattice Laplacian of the atoms; for
    the coupled model S^T L S is the stiffness of the interpolated field,
    which on coarse elements equals the P1 stiffness up to a constant factor.
    """
    dom = model.domain
    n = dom.n_sites
    site = np.repeat(np.arange(n), 6)
    nbr = dom.index(dom.sites[site] + NN_DIRECTIONS[np.tile(np.arange(6), n)])
    keep = ~dom.is_vacancy[site] & ~dom.is_vacancy[nbr]
    a, b = site[keep], nbr[keep]
    ones = np.ones(len(a))
    L = sp.coo_matrix((np.r_[ones, ones, -ones, -ones], (np.r_[a, b, a, b], np.r_[a, b, b, a])), shape=(n, n)).tocsr()
    Ld = (model.S.T @ L @ model.S).tocsr()
    scale = float(Ld.diagonal().mean())
    Ld = Ld + shift * scale * sp.identity(Ld.shape[0])
    return sp.kron(Ld, sp.identity(2), format="csc")


class Preconditioner:
    def __init__(self, model, kind: str = "laplace"):
        self.kind = kind
        if kind == "laplace":
            self.lu = spla.splu(laplace_matrix(model), permc_spec="MMD_AT_PLUS_A")
        else:
            self.lu = None

    def solve(self, g):
        if self.lu is None:
            return g.copy()
        return self.lu.solve(g)


# ----------------------------------------------------------------------------
# line search


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimiser of the cubic interpolating values and slopes at a and b (None if undefined)."""
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = gb - ga + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


class _Phi:
    """Energy and slope along a ray, with admissibility guard."""

    def __init__(self, model, U, d):
        self.model, self.U, self.d = model, U, d
        self.cache = {}

    def __call__(self, a):
        if a in self.cache:
            return self.cache[a]
        X = (self.U + a * self.d).reshape(-1, 2)
        if not self.model.admissible(X):
            raise PotentialSingularityError("inadmissible trial step")
        e = self.model.energy(X)
        g = self.model.gradient(X).ravel()
        out = (e, float(np.sum(g * self.d)), g)
        self.cache[a] = out
        return out


def strong_wolfe(model, U, d, e0, s0, a0, c1=1e-4, c2=0.1, max_rejections=60, maxiter=40):
    """Strong Wolfe line search with cubic interpolation; inadmissible steps are halved.

    Returns (step, energy, gradient).
    """
    if s0 >= 0:
        raise LineSearchError("search direction is not a descent direction")
    phi = _Phi(model, U, d)
    rejections = 0
    a = a0
    while True:
        try:
            phi(a)
            break
        except (PotentialSingularityError, FloatingPointError):
            rejections += 1
            if rejections > max_rejections:
                raise LineSearchError("too many inadmissible steps")
            a *= 0.5
    # energies are compared up to round-off, so that steps can still be
    # accepted on slope information once decreases fall below machine precision
    eps = 1e-13 * (1.0 + abs(e0))
    a_prev, e_prev, s_prev = 0.0, e0, s0
    for i in range(maxiter):
        e, s, g = phi(a)
        if e > e0 + c1 * a * s0 + eps or (i > 0 and e >= e_prev + eps):
            return _zoom(phi, a_prev, e_prev, s_prev, a, e, s, e0, s0, c1, c2, eps)
        if abs(s) <= -c2 * s0:
            return a, e, g
        if s >= 0:
            return _zoom(phi, a, e, s, a_prev, e_prev, s_prev, e0, s0, c1, c2, eps)
        a_prev, e_prev, s_prev = a, e, s
        a_new = 2.0 * a
        try:
            phi(a_new)
        except (PotentialSingularityError, FloatingPointError):
            a_new = 0.5 * (a + a_new)
            try:
                phi(a_new)
            except (PotentialSingularityError, FloatingPointError):
                return a, e, g
        a = a_new
    raise LineSearchError("line search did not bracket a step")


def _zoom(phi, lo, elo, slo, hi, ehi, shi, e0, s0, c1, c2, eps, maxiter=60):
    for _ in range(maxiter):
        a = _cubic_min(lo, elo, slo, hi, ehi, shi)
        lo_b, hi_b = min(lo, hi), max(lo, hi)
        width = hi_b - lo_b
        if a is None or not (lo_b + 0.1 * width <= a <= hi_b - 0.1 * width):
            a = 0.5 * (lo + hi)
        try:
            e, s, g = phi(a)
        except (PotentialSingularityError, FloatingPointError):
            hi, ehi, shi = a, np.inf, 0.0
            continue
        if e > e0 + c1 * a * s0 + eps or e >= elo + eps:
            hi, ehi, shi = a, e, s
        else:
            if abs(s) <= -c2 * s0:
                return a, e, g
            if s * (hi - lo) >= 0:
                hi, ehi, shi = lo, elo, slo
            lo, elo, slo = a, e, s
        if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
            break
    if lo > 0 and elo <= e0 + eps:
        e, s, g = phi(lo)
        return lo, e, g
    raise LineSearchError("zoom failed to find an acceptable step")


# ----------------------------------------------------------------------------
# nonlinear conjugate gradients


def minimize(model, U0=None, cfg: SolveConfig | None = None, callback: Callable | None = None) -> SolveResult:
    """Preconditioned Polak-Ribiere+ conjugate gradients with a strong Wolfe line search.

    Convergence is declared when the preconditioned gradient norm
    sqrt(g^T P^{-1} g) (or the Euclidean norm without preconditioner)
    drops below ``cfg.tol``.
    """
    cfg = cfg or SolveConfig()
    U = model.zero() if U0 is None else np.array(U0, dtype=float).reshape(-1, 2)
    if not model.admissible(U):
        raise SolverError("initial guess is not admissible")
    P = Preconditioner(model, cfg.precond)
    e = model.energy(U)
    g = model.gradient(U).ravel()
    z = P.solve(g)
    gn = float(np.sqrt(max(g @ z, 0.0)))
    trace = [(0, e, gn, 0.0)]
    if gn <= cfg.tol:
        return SolveResult(U, e, gn, 0, True, trace)
    d = -z
    step = 1.0
    e_old = None
    k_restart = 0
    for it in range(1, cfg.maxiter + 1):
        s0 = float(g @ d)
        if s0 >= 0:
            d, s0, k_restart = -z, -float(g @ z), 0
        if e_old is None:
            a0 = min(1.0, 0.1 / max(np.abs(d).max(), 1e-300)) if it == 1 else step
        else:
            a0 = min(1.0, 1.01 * 2.0 * (e - e_old) / s0) if e_old > e else step
            a0 = a0 if a0 > 0 else step
        a, e_new, g_new = strong_wolfe(
            model, U.ravel(), d, e, s0, a0, cfg.c1, cfg.c2, cfg.max_rejections
        )
        U = (U.ravel() + a * d).reshape(-1, 2)
        g_new = g_new.ravel()
        z_new = P.solve(g_new)
        e_old, e = e, e_new
        step = a
        gn = float(np.sqrt(max(g_new @ z_new, 0.0)))
        trace.append((it, e, gn, a))
        if callback is not None:
            callback(it, U, e, gn)
        if gn <= cfg.tol:
            return SolveResult(U, e, gn, it, True, trace)
        beta = max(0.0, float(g_new @ (z_new - z)) / float(g @ z))
        k_restart += 1
        if k_restart >= cfg.restart:
            beta, k_restart = 0.0, 0
        d = -z_new + beta * d
        g, z = g_new, z_new
    return SolveResult(U, e, gn, cfg.maxiter, False, trace)


# ----------------------------------------------------------------------------
# Newton


@dataclass
class NewtonResult:
    U: np.ndarray
    grad_norms: list
    converged: bool


def newton_refine(model, U0, tol: float = 1e-10, maxiter: int = 25, require_descent: bool = True) -> NewtonResult:
    """Newton iteration with one pinned node; each step has zero mean (no translation component).

    Convergence is measured by the Euclidean gradient norm.
    """
    U = np.array(U0, dtype=float).reshape(-1, 2)
    norms = []
    for _ in range(maxiter + 1):
        g = model.gradient(U).ravel()
        gn = float(np.linalg.norm(g))
        norms.append(gn)
        if not np.isfinite(gn):
            raise SolverError("non-finite gradient in Newton iteration")
        if gn <= tol:
            return NewtonResult(U, norms, True)
        if len(norms) > maxiter:
            break
        H = model.hessian(U)
        keep = np.arange(2, H.shape[0])
        try:
            lu = spla.splu(H[keep][:, keep].tocsc(), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolverError("singular Hessian; run minimize() first") from exc
        dk = np.zeros_like(g)
        dk[keep] = -lu.solve(g[keep])
        if not np.all(np.isfinite(dk)):
            raise SolverError("singular Hessian; run minimize() first")
        step = dk.reshape(-1, 2)
        step -= step.mean(axis=0)
        if require_descent and float(g @ step.ravel()) >= 0:
            raise SolverError("Hessian is indefinite (Newton step is not a descent direction); run minimize() first")
        Un = U + step
        if not model.admissible(Un):
            raise SolverError("Newton step leaves the admissible set")
        U = Un
    return NewtonResult(U, norms, False)


def solve_equilibrium(model, U0=None, cfg: SolveConfig | None = None, newton_tol: float = 1e-9):
    """Conjugate gradients to a moderate tolerance followed by Newton refinement."""
    cfg = cfg or SolveConfig()
    loose = SolveConfig(max(cfg.tol, 1e-5), cfg.maxiter, cfg.c1, cfg.c2, cfg.precond, cfg.restart, cfg.max_rejections)
    res = minimize(model, U0, loose)
    nr = newton_refine(model, res.U, tol=newton_tol)
    return nr.U, res, nr


# ----------------------------------------------------------------------------
# continuation


@dataclass
class ContinuationConfig:
    dt: float = 1e-3
    bisect_tol: float = 1e-8
    t_max: float = 1.0
    threshold: float = 0.0
    branch_tol: float | None = None
    newton_tol: float = 1e-9

    def __post_init__(self):
        if self.dt <= 0 or self.bisect_tol <= 0:
            raise ValueError("continuation steps must be positive")


@dataclass
class ContinuationResult:
    t_crit: float
    t_stable: float
    t_unstable: float
    U_stable: np.ndarray
    U_unstable: np.ndarray | None
    history: list  # (t, lowest eigenvalue or nan if no equilibrium was found)


def _state(model, path, t, U0, cfg):
    """Equilibrium at B(t) near U0 and its lowest deflated eigenvalue; (None, -inf) if tracking fails."""
    m = model.with_strain(path(t))
    try:
        nr = newton_refine(m, U0, tol=cfg.newton_tol, maxiter=30, require_descent=False)
    except SolverError:
        return None, -np.inf
    if not nr.converged:
        return None, -np.inf
    lam = lowest_hessian_eigenvalue(m.hessian(nr.U), m.n_dof)
    return nr.U, lam


def continuation_critical_t(model, path: Callable, U0=None, cfg: ContinuationConfig | None = None, solve_cfg: SolveConfig | None = None) -> ContinuationResult:
    """March t from 0 in steps dt, tracking equilibria by Newton, until the lowest eigenvalue crosses zero; then bisect.

    A step where Newton fails to find an equilibrium near the previous one
    (a fold of the branch) is treated as unstable.
    """
    cfg = cfg or ContinuationConfig()
    m0 = model.with_strain(path(0.0))
    U, _, _ = solve_equilibrium(m0, U0, solve_cfg, cfg.newton_tol)
    lam = lowest_hessian_eigenvalue(m0.hessian(U), m0.n_dof)
    if lam <= cfg.threshold:
        raise SolverError(f"configuration is not stable at t=0 (lowest eigenvalue {lam:.3e})")
    history = [(0.0, lam)]
    t_lo, U_lo = 0.0, U
    e_lo = m0.energy(U)
    t_hi, U_hi = None, None
    while t_lo < cfg.t_max:
        t = t_lo + cfg.dt
        Ui, lam = _state(model, path, t, U_lo, cfg)
        history.append((t, lam))
        if Ui is not None and cfg.branch_tol is not None:
            e = model.with_strain(path(t)).energy(Ui)
            if abs(e - e_lo) > cfg.branch_tol:
                raise BranchLossError(f"energy jump {abs(e - e_lo):.3e} at t={t:.6f}")
            e_lo = e
        if lam > cfg.threshold:
            t_lo, U_lo = t, Ui
            continue
        t_hi, U_hi = t, Ui
        break
    if t_hi is None:
        raise SolverError(f"no instability found up to t={cfg.t_max}")
    while t_hi - t_lo > cfg.bisect_tol:
        t = 0.5 * (t_lo + t_hi)
        Ui, lam = _state(model, path, t, U_lo, cfg)
        history.append((t, lam))
        if lam > cfg.threshold:
            t_lo, U_lo = t, Ui
        else:
            t_hi, U_hi = t, Ui
    return ContinuationResult(0.5 * (t_lo + t_hi), t_lo, t_hi, U_lo, U_hi, history)
