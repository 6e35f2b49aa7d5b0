"""Mesh-optimality predictions and drivers for the convergence and stability experiments.

Each driver returns table rows (dicts) and, when an output directory is
given, writes ``table.csv``, ``config.resolved.toml`` and field snapshots
under ``fields/``. Failures of individual rows are recorded in the row's
``status`` column instead of aborting the whole table.
"""
from __future__ import annotations

import csv
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import directed_hausdorff

from .assembly import AtomisticModel, CoupledModel, h1_error
from .defects import build_extension
from .io import config_hash, read_vacancy_pattern, write_config, write_snapshot
from .lattice import DEFAULT_CUTOFF, LatticeError, build_domain, to_cartesian
from .mesh import MeshError, MeshPlan, build_graded_mesh
from .potential import PotentialSingularityError, make_potential
from .solver import ContinuationConfig, SolveConfig, SolverError, continuation_critical_t, solve_equilibrium
from .stability import EigenvalueError, cell_wavevectors, lowest_hessian_eigenvalue, periodic_lattice_spectrum

KINDS = ("vacancy", "cavity", "stability-vacancy", "stability-bravais")
VACANCY_STRAIN = ((1.01, 0.01), (0.0, 0.99))
CAVITY_COMPRESSION = 0.03
ROW_ERRORS = (SolverError, MeshError, LatticeError, PotentialSingularityError, EigenvalueError, np.linalg.LinAlgError)


# ----------------------------------------------------------------------------
# error / DoF model


@dataclass
class ErrorModel:
    """Decay exponent beta of the defect's second gradients, norm exponent p and mesh parameters."""

    beta: float
    p: float
    K: float
    N: float
    hK: float = 1.0
    alpha: float | None = None  # None: the equidistributed value beta p / (2 + p)

    @property
    def optimal_alpha(self) -> float:
        if np.isinf(self.p):
            return float(self.beta)
        return self.beta * self.p / (2.0 + self.p)

    @property
    def grading(self) -> float:
        return self.optimal_alpha if self.alpha is None else float(self.alpha)

    @property
    def alpha_consistent(self) -> bool:
        return bool(np.isclose(self.grading, self.optimal_alpha))


@dataclass
class ErrorPrediction:
    err: float  # closed form with the 1 / q prefactor
    err_exact: float  # p-th root of the radial integral
    dof: float
    regime: int  # convergence regime: 1 (alpha > 1), 2 (alpha = 1), 3 (alpha < 1)
    alpha: float
    alpha_consistent: bool
    err_asymptotic: float  # asymptotic rate in terms of dof (radial log form for alpha = 1 meshes in regime 1)


def _regime(beta, p) -> int:
    if beta <= 1:
        return 3
    crit = 2.0 / (beta - 1.0)
    if np.isinf(p) or p > crit + 1e-12:
        return 1
    if abs(p - crit) <= 1e-12:
        return 2
    return 3


def error_model(em: ErrorModel) -> ErrorPrediction:
    """Err and DoF of a graded mesh h(r) = hK (r / K)^alpha for a defect with |grad^2 y| ~ r^-beta.

    Err = (int_K^N (h(r) r^-beta)^p r dr)^(1/p) and
    DoF = K^2 + int_K^N r / h(r)^2 dr.
    """
    beta, p, K, N, hK = float(em.beta), float(em.p), float(em.K), float(em.N), float(em.hK)
    if min(beta, p, K, N, hK) <= 0:
        raise ValueError("error model parameters must be positive")
    a = em.grading
    ip = 0.0 if np.isinf(p) else 1.0 / p
    lead = hK * K ** (2 * ip - beta)
    if np.isinf(p):
        # sup of h(r) r^-beta over [K, N]
        err_exact = hK * K ** (-beta) * max(1.0, (N / K) ** (a - beta))
        err = err_exact
    else:
        q = p * (beta - a) - 2.0
        if abs(q) < 1e-12:
            err_exact = lead * np.log(N / K) ** ip
            err = err_exact
        else:
            bracket = 1.0 - (K / N) ** q
            err_exact = lead * (bracket / q) ** ip
            err = lead * abs(bracket) ** ip / q
    if abs(a - 1.0) < 1e-12:
        dof = K**2 + K**2 / hK**2 * np.log(N / K)
    else:
        dof = K**2 + K ** (2 * a) / hK**2 * (N ** (2 - 2 * a) - K ** (2 - 2 * a)) / (2 - 2 * a)
    reg = _regime(beta, p)
    if reg == 1:
        asym = dof ** (ip - beta / 2)
        if abs(a - 1.0) < 1e-12:
            asym *= np.log(N / K) ** (beta / 2 - ip)
    elif reg == 2:
        asym = dof ** (-0.5) * np.log(N / K) ** (0.5 + ip)
    else:
        asym = dof ** (-0.5) * N ** (0.5 + ip - beta / 2)
    return ErrorPrediction(float(err), float(err_exact), float(dof), reg, a, em.alpha_consistent, float(asym))


def fit_rate(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


# ----------------------------------------------------------------------------
# experiment specification


def cavity_pattern(length: int = 8) -> np.ndarray:
    """A straight row of ``length`` vacancies along the first lattice direction, centred at the origin."""
    start = -((length - 1) // 2)
    return np.array([(start + i, 0) for i in range(length)], dtype=np.int64)


@dataclass
class ExperimentSpec:
    kind: str
    N: int
    K: list = field(default_factory=lambda: [4, 8, 16])
    hK: list = field(default_factory=lambda: [1, 2])
    family: str | None = None  # default: radial for the stability tests, algebraic otherwise
    alpha: float = 1.5
    B: np.ndarray | None = None
    vacancies: np.ndarray | None = None
    compression: float = CAVITY_COMPRESSION
    potential: dict = field(default_factory=lambda: {"kind": "lennard-jones", "params": {}})
    cutoff: float = DEFAULT_CUTOFF
    solve: SolveConfig = field(default_factory=SolveConfig)
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    s_grid: tuple = (-0.12, 0.12, 15)
    t_grid: tuple = (-0.12, 0.12, 15)
    shear: float = 0.1
    beta: float = 3.0
    p: float = 2.0
    output: Path | None = None
    cache_dir: Path | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        self.K = [int(k) for k in np.atleast_1d(self.K)]
        self.hK = [int(h) for h in np.atleast_1d(self.hK)]
        if self.family is None:
            self.family = "radial" if self.kind.startswith("stability") else "algebraic"
        if any(2 * k > self.N for k in self.K):
            raise ValueError("atomistic region too large: need K <= N / 2")
        if self.kind == "stability-vacancy" and self.family != "radial":
            raise ValueError("the vacancy stability test uses radial meshes")
        if self.vacancies is None:
            self.vacancies = {
                "vacancy": np.array([(0, 0)]),
                "cavity": cavity_pattern(8),
                "stability-vacancy": np.array([(0, 0)]),
                "stability-bravais": np.zeros((0, 2)),
            }[self.kind]
        self.vacancies = np.asarray(self.vacancies, dtype=np.int64).reshape(-1, 2)
        if self.B is None:
            if self.kind == "vacancy":
                self.B = np.array(VACANCY_STRAIN)
            elif self.kind == "cavity":
                self.B = (1.0 - self.compression) * np.eye(2)
            else:
                self.B = np.eye(2)
        self.B = np.asarray(self.B, dtype=float).reshape(2, 2)
        if self.output is not None:
            self.output = Path(self.output)
        if self.cache_dir is not None:
            self.cache_dir = Path(self.cache_dir)

    @classmethod
    def from_config(cls, cfg: dict, base_dir: Path | None = None) -> "ExperimentSpec":
        ex = dict(cfg.get("experiment", {}))
        mesh = cfg.get("mesh", {})
        region = cfg.get("region", {})
        base_dir = Path(base_dir or ".")
        if "pattern" in ex:
            ex["vacancies"] = read_vacancy_pattern(base_dir / ex.pop("pattern"))
        pot = cfg.get("potential", {})
        kw = dict(
            kind=ex.pop("kind"),
            N=int(ex.pop("N")),
            potential={"kind": pot.get("kind", "lennard-jones"), "params": dict(pot.get("params", {}))},
            cutoff=float(pot.get("cutoff", DEFAULT_CUTOFF)),
            solve=SolveConfig(**cfg.get("solve", {})),
            continuation=ContinuationConfig(**cfg.get("continuation", {})),
        )
        for key in ("K", "hK", "family", "alpha"):
            if key in mesh:
                kw[key] = mesh[key]
        for key in ("s", "t"):
            if key in region:
                kw[f"{key}_grid"] = tuple(region[key])
        if "shear" in region:
            kw["shear"] = region["shear"]
        for key in ("B", "vacancies", "compression", "beta", "p", "output", "cache_dir"):
            if key in ex:
                kw[key] = ex[key]
        for key in ("output", "cache_dir"):
            if key in kw and not Path(kw[key]).is_absolute():
                kw[key] = base_dir / kw[key]
        return cls(**kw)

    def to_config(self) -> dict:
        ex = {
            "kind": self.kind,
            "N": self.N,
            "B": self.B.tolist(),
            "vacancies": self.vacancies.tolist(),
            "beta": self.beta,
            "p": self.p,
        }
        if self.kind == "cavity":
            ex["compression"] = self.compression
        cfg = {
            "experiment": ex,
            "potential": {"kind": self.potential["kind"], "cutoff": self.cutoff, "params": dict(self.potential.get("params", {}))},
            "mesh": {"K": list(self.K), "hK": list(self.hK), "family": self.family, "alpha": self.alpha},
            "solve": asdict(self.solve),
            "continuation": {k: v for k, v in asdict(self.continuation).items() if v is not None},
        }
        if self.kind == "stability-bravais":
            cfg["region"] = {"s": list(self.s_grid), "t": list(self.t_grid), "shear": self.shear}
        return cfg

    def make_potential(self):
        return make_potential(self.potential["kind"], **self.potential.get("params", {}))

    def domain(self):
        return build_domain(self.N, self.vacancies, cell="hexagon")

    def plan(self, K, hK):
        return MeshPlan(K, hK, self.alpha if self.family == "algebraic" else 1.0, self.family)


@dataclass
class ExperimentResult:
    rows: list
    summary: dict
    fields: dict = field(default_factory=dict)  # name -> (K, B, sites, u)

    @property
    def ok(self) -> bool:
        return all(r.get("status") == "ok" for r in self.rows)


# ----------------------------------------------------------------------------
# atomistic reference with an on-disk cache


def _atomic_save(path: Path, **arrays):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz")
    os.close(fd)
    np.savez(tmp, **arrays)
    os.replace(tmp, path)


def reference_key(spec: ExperimentSpec) -> str:
    return config_hash(
        {
            "N": spec.N,
            "vacancies": sorted(map(tuple, spec.vacancies.tolist())),
            "B": spec.B,
            "potential": spec.potential,
            "cutoff": spec.cutoff,
            "tol": spec.solve.tol,
        }
    )


def atomistic_reference(spec: ExperimentSpec, domain=None, potential=None):
    """Atomistic equilibrium at the spec's strain, as displacements at every site (vacancies extended).

    Returns (site displacements, info dict). Cached on disk under
    ``spec.cache_dir`` when set.
    """
    domain = domain or spec.domain()
    potential = potential or spec.make_potential()
    key = reference_key(spec)
    path = spec.cache_dir / f"reference-{key}.npz" if spec.cache_dir else None
    if path is not None and path.exists():
        data = np.load(path)
        return data["sites"], {"cached": True, "key": key, "energy": float(data["energy"]), "iterations": int(data["iterations"])}
    model = AtomisticModel(domain, potential, spec.B, spec.cutoff)
    U, res, nr = solve_equilibrium(model, None, spec.solve)
    if not nr.converged:
        raise SolverError(f"atomistic reference did not converge (|g| = {nr.grad_norms[-1]:.2e})")
    sites = build_extension(domain)(U)
    info = {"cached": False, "key": key, "energy": model.energy(U), "iterations": res.iterations}
    if path is not None:
        _atomic_save(path, sites=sites, energy=info["energy"], iterations=info["iterations"])
    return sites, info


def cavity_gap(domain, B, sites) -> float:
    """Mean distance across the cavity row between the atoms directly above and below it, in units of det(B)^(1/2)."""
    vac = domain.sites[domain.vacancy_index]
    row = vac[:, 1].min()
    cols = np.arange(vac[:, 0].min(), vac[:, 0].max())
    top = domain.index(np.c_[cols, np.full_like(cols, row + 1)])
    bot = domain.index(np.c_[cols + 1, np.full_like(cols, row - 1)])
    X = to_cartesian(domain.sites) @ np.asarray(B).T + sites
    d = X[top] - X[bot]
    return float(np.linalg.norm(d, axis=1).mean() / np.sqrt(abs(np.linalg.det(B))))


# ----------------------------------------------------------------------------
# drivers


def _failed(row, exc):
    row["status"] = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def _convergence_rows(spec: ExperimentSpec, beta: float):
    domain = spec.domain()
    pot = spec.make_potential()
    t0 = time.perf_counter()
    ref, info = atomistic_reference(spec, domain, pot)
    summary = {"reference_key": info["key"], "reference_cached": info["cached"], "reference_seconds": time.perf_counter() - t0}
    ext = build_extension(domain)
    rows, fields = [], {"reference": (0, spec.B, domain.sites, ref)}
    if spec.kind == "cavity":
        summary["reference_gap"] = cavity_gap(domain, spec.B, ref)
    for K in spec.K:
        for hK in spec.hK:
            row = {"K": K, "hK": hK, "family": spec.family, "alpha": spec.plan(K, hK).alpha}
            row["config_hash"] = config_hash({"spec": spec.to_config(), "K": K, "hK": hK})
            if K % hK:
                row["status"] = "skipped: hK does not divide K"
                rows.append(row)
                continue
            try:
                t0 = time.perf_counter()
                mesh = build_graded_mesh(domain, spec.plan(K, hK))
                model = CoupledModel(mesh, pot, spec.B, spec.cutoff)
                U, res, nr = solve_equilibrium(model, model.from_sites(ref), spec.solve)
                h_sites = ext(model.site_displacement(U))
                err_abs, err_rel = h1_error(mesh, ref, h_sites)
                pred = error_model(ErrorModel(beta, spec.p, K, spec.N, hK, mesh.plan.alpha))
                row.update(
                    dof=mesh.dof_count,
                    n_repatoms=mesh.n_repatoms,
                    err_abs=err_abs,
                    err_rel=err_rel,
                    err_model=pred.err,
                    err_model_exact=pred.err_exact,
                    model_ratio=err_rel / pred.err,
                    energy=model.energy(U),
                    iterations=res.iterations,
                    grad_norm=nr.grad_norms[-1],
                    seconds=time.perf_counter() - t0,
                    status="ok" if nr.converged else "failed: newton did not converge",
                )
                if spec.kind == "cavity":
                    row["gap"] = cavity_gap(domain, spec.B, h_sites)
                fields[f"K{K}_h{hK}"] = (K, spec.B, domain.sites, h_sites)
            except ROW_ERRORS as exc:
                _failed(row, exc)
            rows.append(row)
    ok = [r for r in rows if r.get("status") == "ok"]
    for hK in spec.hK:
        sel = [r for r in ok if r["hK"] == hK]
        summary[f"slope_h{hK}"] = fit_rate([r["dof"] for r in sel], [r["err_rel"] for r in sel])
    summary["slope"] = fit_rate([r["dof"] for r in ok], [r["err_rel"] for r in ok])
    return rows, summary, fields


def run_vacancy_convergence(spec: ExperimentSpec) -> ExperimentResult:
    """Relative H1 error of the coupled solution against the atomistic one for every (K, hK)."""
    rows, summary, fields = _convergence_rows(spec, spec.beta)
    return ExperimentResult(rows, summary, fields)


def run_cavity_convergence(spec: ExperimentSpec, collapsed_gap: float = 1.3) -> ExperimentResult:
    """As the vacancy experiment, for the compressed row-of-vacancies defect.

    The reference is checked for collapse: the mean distance across the
    cavity must fall below ``collapsed_gap`` lattice spacings, otherwise a
    warning is recorded in the summary.
    """
    rows, summary, fields = _convergence_rows(spec, spec.beta)
    summary["collapsed"] = bool(summary["reference_gap"] < collapsed_gap)
    if not summary["collapsed"]:
        summary["warning"] = f"cavity did not collapse (gap {summary['reference_gap']:.3f})"
    return ExperimentResult(rows, summary, fields)


def stretch_path(t):
    """Uniaxial stretch B(t) = diag(1, 1 + t)."""
    return np.diag([1.0, 1.0 + t])


def run_stability_vacancy(spec: ExperimentSpec, path=stretch_path) -> ExperimentResult:
    """Critical load of the atomistic model and of the coupled model for each K (radial meshes).

    Rates follow |t_ac - t_a| ~ DoF^-a ~ K^-b; ``a``/``b`` per row are
    incremental between consecutive K, and the summary holds least-squares
    fits over the last three rows.
    """
    domain = spec.domain()
    pot = spec.make_potential()
    t0 = time.perf_counter()
    atom = continuation_critical_t(AtomisticModel(domain, pot, np.eye(2), spec.cutoff), path, None, spec.continuation, spec.solve)
    summary = {"t_a": atom.t_crit, "t_a_bracket": [atom.t_stable, atom.t_unstable], "atomistic_seconds": time.perf_counter() - t0}
    fields = {"atomistic": (0, path(atom.t_stable), domain.sites, build_extension(domain)(atom.U_stable))}
    rows = []
    for K in spec.K:
        for hK in spec.hK:
            row = {"K": K, "hK": hK, "family": spec.family}
            row["config_hash"] = config_hash({"spec": spec.to_config(), "K": K, "hK": hK})
            try:
                t0 = time.perf_counter()
                mesh = build_graded_mesh(domain, spec.plan(K, hK))
                model = CoupledModel(mesh, pot, np.eye(2), spec.cutoff)
                res = continuation_critical_t(model, path, None, spec.continuation, spec.solve)
                row.update(
                    dof=mesh.dof_count,
                    n_repatoms=mesh.n_repatoms,
                    t_ac=res.t_crit,
                    t_ac_stable=res.t_stable,
                    t_ac_unstable=res.t_unstable,
                    diff=abs(res.t_crit - atom.t_crit),
                    steps=len(res.history),
                    seconds=time.perf_counter() - t0,
                    status="ok",
                )
                fields[f"K{K}_h{hK}"] = (K, path(res.t_stable), domain.sites, model.site_displacement(res.U_stable))
            except ROW_ERRORS as exc:
                _failed(row, exc)
            rows.append(row)
    prev = None
    for row in rows:
        if row.get("status") != "ok":
            continue
        if prev is not None and prev["hK"] == row["hK"]:
            row["a"] = -fit_rate([prev["dof"], row["dof"]], [prev["diff"], row["diff"]])
            row["b"] = -fit_rate([prev["K"], row["K"]], [prev["diff"], row["diff"]])
        prev = row
    ok = [r for r in rows if r.get("status") == "ok"][-3:]
    summary["a_fit"] = -fit_rate([r["dof"] for r in ok], [r["diff"] for r in ok])
    summary["b_fit"] = -fit_rate([r["K"] for r in ok], [r["diff"] for r in ok])
    diffs = [r["diff"] for r in rows if r.get("status") == "ok"]
    summary["diff_decreasing"] = bool(len(diffs) > 1 and np.all(np.diff(diffs) < 0))
    return ExperimentResult(rows, summary, fields)


def _grid(spec_tuple):
    lo, hi, n = spec_tuple
    return np.linspace(float(lo), float(hi), int(n))


def region_strain(s, t, shear=0.1):
    return np.array([[1.0 + s, shear], [0.0, 1.0 + t]])


def boundary_points(xs, ys, values) -> np.ndarray:
    """Zero crossings of a gridded field, located by linear interpolation along grid edges."""
    V = np.asarray(values, dtype=float)
    pts = []
    for i in range(len(xs)):
        for j in range(len(ys)):
            for di, dj in ((1, 0), (0, 1)):
                k, l = i + di, j + dj
                if k >= len(xs) or l >= len(ys):
                    continue
                a, b = V[i, j], V[k, l]
                if np.isfinite(a) and np.isfinite(b) and (a > 0) != (b > 0):
                    w = a / (a - b)
                    pts.append((xs[i] + w * (xs[k] - xs[i]), ys[j] + w * (ys[l] - ys[j])))
    return np.array(pts).reshape(-1, 2)


def hausdorff(P, Q) -> float:
    if len(P) == 0 or len(Q) == 0:
        return float("nan")
    return float(max(directed_hausdorff(P, Q)[0], directed_hausdorff(Q, P)[0]))


def run_stability_region(spec: ExperimentSpec, tol: float = 0.0) -> ExperimentResult:
    """Stability of the defect-free lattice and of the coupled model on an (s, t) grid of strains.

    The atomistic eigenvalue is the exact periodic one (block-circulant
    spectrum of the N-cell); the coupled eigenvalue is the lowest
    non-translational Hessian eigenvalue at the homogeneous state, which is
    an equilibrium of both models.
    """
    if len(spec.vacancies):
        raise ValueError("the strain-region experiment needs a defect-free lattice")
    domain = spec.domain()
    pot = spec.make_potential()
    S, T = _grid(spec.s_grid), _grid(spec.t_grid)
    K, hK = spec.K[0], spec.hK[0]
    mesh = build_graded_mesh(domain, spec.plan(K, hK))
    base = CoupledModel(mesh, pot, np.eye(2), spec.cutoff)
    theta = cell_wavevectors(domain)
    lam_a = np.full((len(S), len(T)), np.nan)
    lam_c = np.full((len(S), len(T)), np.nan)
    rows = []
    for i, s in enumerate(S):
        for j, t in enumerate(T):
            B = region_strain(s, t, spec.shear)
            row = {"s": s, "t": t}
            try:
                lam_a[i, j] = periodic_lattice_spectrum(pot, B, domain, spec.cutoff, theta)
                m = base.with_strain(B)
                if not m.admissible(m.zero()):
                    raise PotentialSingularityError("homogeneous state not admissible")
                lam_c[i, j] = lowest_hessian_eigenvalue(m.hessian(m.zero()), m.n_dof)
                row.update(
                    lambda_atomistic=lam_a[i, j],
                    lambda_coupled=lam_c[i, j],
                    stable_atomistic=bool(lam_a[i, j] > tol),
                    stable_coupled=bool(lam_c[i, j] > tol),
                    status="ok",
                )
            except ROW_ERRORS as exc:
                _failed(row, exc)
            rows.append(row)
    ok = [r for r in rows if r.get("status") == "ok"]
    violations = [r for r in ok if r["stable_atomistic"] and not r["stable_coupled"]]
    Pa, Pc = boundary_points(S, T, lam_a), boundary_points(S, T, lam_c)
    summary = {
        "K": K,
        "hK": hK,
        "dof": mesh.dof_count,
        "n_atomistic_stable": sum(r["stable_atomistic"] for r in ok),
        "n_coupled_stable": sum(r["stable_coupled"] for r in ok),
        "containment_violations": len(violations),
        "contains": len(violations) == 0,
        "hausdorff": hausdorff(Pa, Pc),
    }
    return ExperimentResult(rows, summary, {})


RUNNERS = {
    "vacancy": run_vacancy_convergence,
    "cavity": run_cavity_convergence,
    "stability-vacancy": run_stability_vacancy,
    "stability-bravais": run_stability_region,
}


# ----------------------------------------------------------------------------
# output


def write_table(path, rows):
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def write_outputs(spec: ExperimentSpec, result: ExperimentResult, out_dir=None) -> Path:
    out = Path(out_dir or spec.output)
    (out / "fields").mkdir(parents=True, exist_ok=True)
    write_table(out / "table.csv", result.rows)
    cfg = spec.to_config()
    cfg["summary"] = {k: v for k, v in result.summary.items() if isinstance(v, (int, float, str, bool, list))}
    write_config(out / "config.resolved.toml", cfg)
    for name, (K, B, sites, u) in result.fields.items():
        write_snapshot(out / "fields" / f"{name}.snap", spec.N, K, B, sites, u)
    return out


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    result = RUNNERS[spec.kind](spec)
    if spec.output is not None:
        write_outputs(spec, result)
    return result
