"""Vacancy extension operator and vacancy stability indices.

Both quadratic forms used here are nearest-neighbour "axial" forms

    Phi(v) = sum_b |r_b . (v(x + r_b) - v(x))|^2,

summed over nearest-neighbour bonds between atoms (partial form) or over
all nearest-neighbour bonds including those touching vacancies (full
form). Vectors are flattened in the interleaved ordering 2 i + c.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .lattice import NN_DIRECTIONS, LatticeDomain, LatticeError, hexnorm, to_cartesian


class ExtensionError(LatticeError):
    pass


class EigenSolverError(RuntimeError):
    pass


def axial_form(domain: LatticeDomain, full: bool) -> sp.csr_matrix:
    """Matrix Q of the nearest-neighbour axial form on all sites, Phi(v) = v^T Q v."""
    n = domain.n_sites
    site = np.repeat(np.arange(n), 6)
    d = np.tile(np.arange(6), n)
    nbr = domain.index(domain.sites[site] + NN_DIRECTIONS[d])
    if not full:
        keep = ~domain.is_vacancy[site] & ~domain.is_vacancy[nbr]
        site, nbr, d = site[keep], nbr[keep], d[keep]
    return _axial_matrix(site, nbr, to_cartesian(NN_DIRECTIONS[d]), n)


def _axial_matrix(a, b, rc, n):
    # row vector g of each bond: +r at b, -r at a
    m = len(a)
    rows = np.repeat(np.arange(m), 4)
    cols = np.stack([2 * b, 2 * b + 1, 2 * a, 2 * a + 1], axis=1).ravel()
    vals = np.stack([rc[:, 0], rc[:, 1], -rc[:, 0], -rc[:, 1]], axis=1).ravel()
    G = sp.csr_matrix((vals, (rows, cols)), shape=(m, 2 * n))
    return (G.T @ G).tocsr()


def axial_energy(domain: LatticeDomain, v, full: bool = True) -> float:
    """Phi(v) for displacements v at every site."""
    v = np.asarray(v, dtype=float).ravel()
    return float(v @ (axial_form(domain, full) @ v))


def _dofs(sites):
    return np.stack([2 * sites, 2 * sites + 1], axis=1).ravel()


@dataclass
class ExtensionOperator:
    """Linear map from displacements of the atoms to displacements at every site.

    ``matrix`` has shape (2 n_sites, 2 n_active); vacancy rows minimise the
    full axial form with the atom values held fixed.
    """

    domain: LatticeDomain
    matrix: sp.csr_matrix

    def __call__(self, u) -> np.ndarray:
        """Extend displacements given on the atoms (n_active, 2) or on all sites (n_sites, 2)."""
        u = np.asarray(u, dtype=float)
        if len(u) == self.domain.n_sites:
            u = u[self.domain.active]
        return (self.matrix @ u.ravel()).reshape(-1, 2)


def build_extension(domain: LatticeDomain) -> ExtensionOperator:
    """Optimal extension: vacancy values minimising the full axial form."""
    n = domain.n_sites
    act = domain.active
    vac = domain.vacancy_index
    P = sp.csr_matrix((np.ones(2 * len(act)), (_dofs(act), np.arange(2 * len(act)))), shape=(2 * n, 2 * len(act)))
    if len(vac) == 0:
        return ExtensionOperator(domain, P)
    Q = axial_form(domain, full=True)
    iv, ia = _dofs(vac), _dofs(act)
    Qvv = Q[iv][:, iv].toarray()
    Qva = Q[iv][:, ia].toarray()
    try:
        c = sla.cho_factor(Qvv)
    except np.linalg.LinAlgError as exc:
        raise ExtensionError("vacancy cluster is not anchored by neighbouring atoms") from exc
    X = -sla.cho_solve(c, Qva)  # (2 nv, 2 na)
    Xs = sp.coo_matrix(X)
    E = P + sp.csr_matrix((Xs.data, (iv[Xs.row], Xs.col)), shape=(2 * n, 2 * len(act)))
    return ExtensionOperator(domain, E.tocsr())


def averaging_extension(domain: LatticeDomain, u) -> np.ndarray:
    """Extension by the mean of the neighbouring atoms' values (vacancies filled in order)."""
    u = np.asarray(u, dtype=float)
    if len(u) == domain.n_active:
        full = np.zeros((domain.n_sites, 2))
        full[domain.active] = u
        u = full
    else:
        u = u.copy()
    for v in domain.vacancy_index:
        nb = domain.index(domain.sites[v] + NN_DIRECTIONS)
        nb = nb[~domain.is_vacancy[nb]]
        if len(nb) == 0:
            raise ExtensionError("vacancy without neighbouring atoms")
        u[v] = u[nb].mean(axis=0)
    return u


def vacancy_gradient(domain: LatticeDomain, v) -> np.ndarray:
    """Partial derivatives of the full axial form with respect to the vacancy values, (n_vac, 2)."""
    v = np.asarray(v, dtype=float).ravel()
    g = 2.0 * (axial_form(domain, full=True) @ v)
    return g[_dofs(domain.vacancy_index)].reshape(-1, 2)


@dataclass
class StabilityIndexResult:
    kappa: float
    mode: np.ndarray  # displacements at every site (vacancies extended)
    residual: float
    n_dof: int
    info: dict = field(default_factory=dict)


def _complement_basis(T):
    """Orthonormal basis of the orthogonal complement of the columns of T."""
    Q, _ = np.linalg.qr(T, mode="complete")
    return Q[:, T.shape[1] :]


def _smallest_generalized(A, Bm, kernel):
    Z = _complement_basis(kernel)
    Az, Bz = Z.T @ A @ Z, Z.T @ Bm @ Z
    w, V = sla.eigh(Az, Bz, subset_by_index=[0, 0])
    x = Z @ V[:, 0]
    res = float(np.linalg.norm(A @ x - w[0] * (Bm @ x)) / max(np.linalg.norm(A @ x), 1e-300))
    return float(w[0]), x, res


MAX_DENSE_DOF = 8000


def stability_index(domain: LatticeDomain) -> StabilityIndexResult:
    """Vacancy stability index of a periodic configuration.

    Largest k with Phi_partial(u) >= k Phi_full(E u) for all periodic u,
    computed as the smallest generalised eigenvalue on the complement of
    the translations.
    """
    ext = build_extension(domain)
    na = domain.n_active
    if len(domain.vacancy_index) == 0:
        return StabilityIndexResult(1.0, np.zeros((domain.n_sites, 2)), 0.0, 2 * na, {"method": "trivial"})
    if 2 * na > MAX_DENSE_DOF:
        raise EigenSolverError(f"{2 * na} unknowns exceed the dense eigensolver limit {MAX_DENSE_DOF}")
    ia = _dofs(domain.active)
    A = axial_form(domain, full=False)[ia][:, ia].toarray()
    E = ext.matrix
    Bm = (E.T @ axial_form(domain, full=True) @ E).toarray()
    T = np.zeros((2 * na, 2))
    T[0::2, 0] = 1.0
    T[1::2, 1] = 1.0
    k, x, res = _smallest_generalized(A, Bm, T)
    if res > 1e-6:
        raise EigenSolverError(f"generalised eigenproblem residual {res:.2e}")
    mode = ext(x.reshape(-1, 2))
    return StabilityIndexResult(k, mode, res, 2 * na, {"method": "dense", "kernel": "translations"})


def patch_stability_index(vacancies, radius: int) -> StabilityIndexResult:
    """Vacancy stability index of a free-standing lattice patch.

    The patch holds every lattice site within hexagonal distance ``radius``
    of some vacancy; only bonds inside the patch count, and the common
    kernel (two translations and the infinitesimal rotation) is deflated.
    The optimal extension is built into the full form by a Schur complement.
    """
    vac = np.atleast_2d(np.asarray(vacancies, dtype=np.int64))
    lo, hi = vac.min(axis=0) - radius, vac.max(axis=0) + radius
    I, J = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    P = np.c_[I.ravel(), J.ravel()]
    d = np.min([hexnorm(P - v) for v in vac], axis=0)
    P = P[d <= radius]
    key = {tuple(p): k for k, p in enumerate(P)}
    n = len(P)
    is_vac = np.zeros(n, dtype=bool)
    for v in vac:
        is_vac[key[tuple(v)]] = True
    a, b, dirs = [], [], []
    for k, p in enumerate(P):
        for dd, r in enumerate(NN_DIRECTIONS):
            q = key.get((p[0] + r[0], p[1] + r[1]))
            if q is not None:
                a.append(k)
                b.append(q)
                dirs.append(dd)
    a, b = np.array(a), np.array(b)
    rc = to_cartesian(NN_DIRECTIONS[np.array(dirs)])
    full = _axial_matrix(a, b, rc, n).toarray()
    keep = ~is_vac[a] & ~is_vac[b]
    part = _axial_matrix(a[keep], b[keep], rc[keep], n).toarray()
    iv = _dofs(np.flatnonzero(is_vac))
    ia = _dofs(np.flatnonzero(~is_vac))
    A = part[np.ix_(ia, ia)]
    Bm = full[np.ix_(ia, ia)] - full[np.ix_(ia, iv)] @ np.linalg.solve(full[np.ix_(iv, iv)], full[np.ix_(iv, ia)])
    X = to_cartesian(P[~is_vac])
    T = np.zeros((len(ia), 3))
    T[0::2, 0] = 1.0
    T[1::2, 1] = 1.0
    T[0::2, 2] = -X[:, 1]
    T[1::2, 2] = X[:, 0]
    k, x, res = _smallest_generalized(A, Bm, T)
    mode = np.zeros((n, 2))
    mode[~is_vac] = x.reshape(-1, 2)
    xv = -np.linalg.solve(full[np.ix_(iv, iv)], full[np.ix_(iv, ia)] @ x)
    mode[is_vac] = xv.reshape(-1, 2)
    return StabilityIndexResult(k, mode, res, len(ia), {"method": "patch", "sites": P, "radius": radius})


# ----------------------------------------------------------------------------
# exact block spectra for an isolated single vacancy


def single_vacancy_blocks(k):
    """Exact 6x6 blocks (A, B) of the partial and full axial forms for Fourier index k."""
    import sympy

    k = sympy.Integer(k)
    c3, s3 = sympy.cos(k * sympy.pi / 3), sympy.sin(k * sympy.pi / 3)
    c6, s6 = sympy.cos(k * sympy.pi / 6), sympy.sin(k * sympy.pi / 6)
    A = sympy.Matrix(
        [
            [3 + (1 + c3), s3, c6, s6, 2, 0],
            [s3, 3 - (1 + c3), -s6, c6, 0, 0],
            [c6, -s6, 1, 0, 0, 0],
            [s6, c6, 0, 5, 2 * s6, 2 * c6],
            [2, 0, 0, 2 * s6, 3, 0],
            [0, 0, 0, 2 * c6, 0, 1],
        ]
    )
    e = 1 - (-1) ** k
    D = sympy.zeros(6)
    D[0, 0] = 2 - sympy.Rational(1, 2) * e * (1 + c3)
    D[0, 1] = D[1, 0] = sympy.Rational(1, 6) * e * s3
    D[1, 1] = sympy.Rational(1, 18) * e * (1 + c3)
    return A, A + D


def single_vacancy_kernel_vector(k):
    """Kernel vector of A^(k) for k in {0, 1, -1}; None otherwise."""
    import sympy

    r3 = sympy.sqrt(3)
    if k == 0:
        return sympy.Matrix([0, 1, 0, -1, 0, 2])
    if k in (1, -1):
        s = 1 if k == 1 else -1
        return sympy.Matrix([-s, r3, s * r3, -1, s, r3])
    return None


@dataclass
class SingleVacancySpectrum:
    blocks: dict  # k -> (A, B) sympy matrices
    determinants: dict  # k -> sympy polynomial in lambda
    eigenvalues: dict  # k -> exact lambda
    kappa: object  # exact rational


def analytic_single_vacancy_index() -> SingleVacancySpectrum:
    """Exact lambda^(k) with A v = lambda (B - A) v for k = -2..3 and kappa = lambda / (1 + lambda)."""
    import sympy

    lam = sympy.Symbol("lambda")
    blocks, dets, eigs = {}, {}, {}
    for k in range(-2, 4):
        A, B = single_vacancy_blocks(k)
        v0 = single_vacancy_kernel_vector(k)
        if v0 is not None:
            if sympy.simplify(A * v0) != sympy.zeros(6, 1) or sympy.simplify(B * v0) != sympy.zeros(6, 1):
                raise ArithmeticError(f"kernel vector for k={k} does not annihilate the blocks")
            M = A + v0 * v0.T
        else:
            M = A
        det = sympy.expand((M - lam * (B - A)).det(method="berkowitz"))
        roots = sympy.solve(det, lam)
        if len(roots) != 1:
            raise ArithmeticError(f"expected one root for k={k}, got {roots}")
        blocks[k] = (A, B)
        dets[k] = sympy.factor(det)
        eigs[k] = sympy.nsimplify(sympy.simplify(roots[0]))
    lmin = min(eigs.values())
    return SingleVacancySpectrum(blocks, dets, eigs, sympy.nsimplify(lmin / (1 + lmin)))
