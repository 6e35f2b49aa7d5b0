"""Acceptance suite: one test and one PASS/FAIL line per criterion."""
import time
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg as sla
import sympy

from acclab.assembly import AtomisticModel, CoupledModel
from acclab.defects import (
    analytic_single_vacancy_index,
    averaging_extension,
    axial_energy,
    build_extension,
    patch_stability_index,
    stability_index,
    vacancy_gradient,
)
from acclab.experiments import ExperimentSpec, run_experiment
from acclab.geometry import bond_triangle_density, orient_triangles
from acclab.lattice import DET_A6, bond_directions, build_domain, hexagonal_identities_check, to_cartesian
from acclab.mesh import MeshError, MeshPlan, build_graded_mesh
from acclab.solver import ContinuationConfig, SolveConfig
from acclab.stability import (
    OutOfTheoryError,
    classify_deformation,
    extended_gradient_operator,
    gamma,
    gamma_hom,
    homogeneous_atomistic_spectrum,
    homogeneous_atomistic_stable,
)

VACANCY_B = np.array([[1.01, 0.01], [0.0, 0.99]])


def _random_stable_B(rng, lj, scale=0.03):
    while True:
        B = np.eye(2) + scale * rng.standard_normal((2, 2))
        if np.linalg.det(B) > 0 and homogeneous_atomistic_spectrum(lj, B) > 0:
            return B


def test_hexagonal_identities(rng, acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        G = rng.standard_normal((2, 2))
        a = rng.uniform(0, 2 * np.pi)
        r = np.array([np.cos(a), np.sin(a)])
        s1, s2 = hexagonal_identities_check(G, r)
        sym = 0.5 * (G + G.T)
        t1 = 3.0 * np.sum(G * G)
        t2 = 1.5 * np.sum(sym * sym) + 0.75 * np.trace(G) ** 2
        worst = max(worst, abs(s1 - t1) / max(1.0, t1), abs(s2 - t2) / max(1.0, t2))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1.0
    assert acceptance(1, "hexagonal identities", ok, f"max rel. deviation {worst:.1e}, {dt:.2f} s")


def test_bond_density_identity(rng, acceptance):
    t0 = time.perf_counter()
    dirs = [r for r in bond_directions(3.0 + 1e-9)]
    worst = 0.0
    count = 0
    while count < 200:
        T = rng.integers(-5, 6, size=(3, 2))
        e1, e2 = T[1] - T[0], T[2] - T[0]
        if e1[0] * e2[1] - e1[1] * e2[0] == 0:
            continue
        T = orient_triangles(T[None])[0]
        X = to_cartesian(T)
        e1, e2 = X[1] - X[0], X[2] - X[0]
        area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
        for r in dirs:
            worst = max(worst, abs(bond_triangle_density(T, r) - area * 2 / np.sqrt(3)))
        count += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 10.0 and np.isclose(DET_A6, np.sqrt(3) / 2)
    assert acceptance(2, "bond-density identity", ok, f"200 triangles x {len(dirs)} directions, max dev. {worst:.1e}, {dt:.1f} s")


def test_energy_form_equivalence(lj, rng, acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    cases = 0
    patterns = ([(0, 0)], [(0, 0), (1, 0)], [(0, 0), (1, 1)], [(-1, 0), (1, 0)])
    configs = [("algebraic", 1), ("algebraic", 2), ("radial", 1), ("radial", 2)]
    for k, (family, hK) in enumerate(configs):
        d = build_domain(24, patterns[k], cell="hexagon")
        base = CoupledModel(build_graded_mesh(d, MeshPlan(6, hK, 1.5, family)), lj)
        base.energy_bond_form(base.zero())  # traced weights are geometric; computed once per mesh
        base.interface_records()
        for _ in range(5):
            model = base.with_strain(_random_stable_B(rng, lj))
            U = 0.02 * rng.standard_normal((model.n_dof, 2))
            e_bond = model.energy_bond_form(U)
            e_prac = model.energy_practical(U).total
            worst = max(worst, abs(e_bond - e_prac) / (1 + abs(e_bond)))
            cases += 1
    dt = time.perf_counter() - t0
    ok = cases == 20 and worst <= 1e-9 and dt < 30.0
    assert acceptance(3, "bond form = practical form", ok, f"{cases} cases, max scaled diff {worst:.1e}, {dt:.1f} s")


def test_patch_test(lj, rng, acceptance):
    worst = 0.0
    d = build_domain(32, cell="hexagon")
    models = [CoupledModel(build_graded_mesh(d, MeshPlan(K, 1)), lj) for K in (4, 8)]
    for _ in range(10):
        B = _random_stable_B(rng, lj)
        for m in models:
            worst = max(worst, float(np.abs(m.with_strain(B).gradient(m.zero())).max()))
    ok = worst <= 1e-10
    assert acceptance(4, "ghost-force-free patch test", ok, f"max |force| {worst:.1e} over 10 strains, K in (4, 8)")


def _fd_errors(model, rng, h=1e-6):
    U = 0.01 * rng.standard_normal((model.n_dof, 2))
    g = model.gradient(U).ravel()
    H = model.hessian(U)
    eg = eh = 0.0
    for _ in range(5):
        V = rng.standard_normal(U.shape)
        V /= np.linalg.norm(V)
        fd = (model.energy(U + h * V) - model.energy(U - h * V)) / (2 * h)
        eg = max(eg, abs(fd - g @ V.ravel()) / max(abs(g @ V.ravel()), np.linalg.norm(g)))
        fdh = (model.gradient(U + h * V) - model.gradient(U - h * V)).ravel() / (2 * h)
        hv = H @ V.ravel()
        eh = max(eh, np.linalg.norm(fdh - hv) / np.linalg.norm(hv))
    return eg, eh


def test_derivative_oracles(lj, rng, acceptance):
    d = build_domain(16, [(0, 0)], cell="hexagon")
    eg1, eh1 = _fd_errors(AtomisticModel(d, lj, VACANCY_B), rng)
    eg2, eh2 = _fd_errors(CoupledModel(build_graded_mesh(d, MeshPlan(4, 1)), lj, VACANCY_B), rng)
    eg, eh = max(eg1, eg2), max(eh1, eh2)
    ok = eg <= 1e-6 and eh <= 1e-5
    assert acceptance(5, "derivative oracles", ok, f"gradient rel. err {eg:.1e}, Hessian-vector rel. err {eh:.1e}")


def test_exact_single_vacancy_spectrum(acceptance):
    spec = analytic_single_vacancy_index()
    expected = {0: sympy.Rational(4, 3), 1: sympy.Rational(24, 5), -1: sympy.Rational(24, 5)}
    expected.update({2: sympy.Rational(2, 5), -2: sympy.Rational(2, 5), 3: sympy.Rational(9, 11)})
    exact = all(sympy.simplify(spec.eigenvalues[k] - v) == 0 for k, v in expected.items())
    exact &= sympy.Rational(spec.kappa) == sympy.Rational(2, 7)
    got = ", ".join(f"{k}:{spec.eigenvalues[k]}" for k in sorted(spec.eigenvalues))
    assert acceptance(6, "exact single-vacancy spectra", bool(exact), f"lambda {{{got}}}, kappa {spec.kappa}")


def test_vacancy_index_table(acceptance):
    t0 = time.perf_counter()
    targets = {"single": ([(0, 0)], (0.28, 0.39, 0.41)), "divacancy": ([(0, 0), (1, 0)], (0.16, 0.26, 0.29))}
    ok = True
    parts = []
    for name, (pattern, values) in targets.items():
        got = [patch_stability_index(pattern, sep // 2).kappa for sep in (4, 8, 12)]
        ok &= all(abs(a - b) <= 0.01 for a, b in zip(got, values))
        parts.append(f"{name} " + "/".join(f"{k:.4f}" for k in got))
    dt = time.perf_counter() - t0
    ok &= dt < 60.0
    assert acceptance(7, "vacancy stability index table", ok, f"{'; '.join(parts)}, {dt:.1f} s")


@pytest.mark.slow
def test_vacancy_convergence(tmp_path, acceptance):
    spec = ExperimentSpec("vacancy", 64, K=[4, 8, 16], hK=[1, 2], B=VACANCY_B, alpha=1.5, cache_dir=tmp_path)
    res = run_experiment(spec)
    ratios = [r["model_ratio"] for r in res.rows]
    slopes = [res.summary["slope"], res.summary["slope_h1"], res.summary["slope_h2"]]
    ok = res.ok and all(-1.3 <= s <= -0.8 for s in slopes) and all(1 / 3 <= q <= 3 for q in ratios)
    detail = f"slopes {slopes[0]:.3f} (h1 {slopes[1]:.3f}, h2 {slopes[2]:.3f}), Err/model in [{min(ratios):.2f}, {max(ratios):.2f}]"
    assert acceptance(8, "vacancy convergence", ok, detail)


@pytest.mark.slow
def test_stability_continuation(acceptance):
    t0 = time.perf_counter()
    spec = ExperimentSpec(
        "stability-vacancy",
        32,
        K=[4, 8, 16],
        hK=[2],
        continuation=ContinuationConfig(dt=1e-2, bisect_tol=1e-8),
        solve=SolveConfig(tol=1e-8),
    )
    res = run_experiment(spec)
    dt = time.perf_counter() - t0
    diffs = [r["diff"] for r in res.rows]
    a = res.summary["a_fit"]
    ok = res.ok and res.summary["diff_decreasing"] and a >= 1.5 and dt < 1800
    detail = f"t_a {res.summary['t_a']:.8f}, |t_ac - t_a| " + ", ".join(f"{x:.2e}" for x in diffs) + f", a {a:.2f}, {dt:.0f} s"
    assert acceptance(9, "stability continuation", ok, detail)


def test_coercivity_bound(lj, rng, acceptance):
    d = build_domain(16, [(0, 0)], cell="hexagon")
    kappa = stability_index(d).kappa
    base = CoupledModel(build_graded_mesh(d, MeshPlan(4, 1)), lj)
    T = base.translation_modes()
    Z = np.linalg.qr(T, mode="complete")[0][:, 2:]
    worst_random = worst_exact = np.inf
    samples = 0
    while samples < 20:
        model = base.with_strain(np.eye(2) + 0.01 * rng.standard_normal((2, 2)))
        U = 0.003 * rng.standard_normal((model.n_dof, 2))
        c = classify_deformation(model, U)
        try:
            g = gamma(lj, c.m, c.M, c.delta, kappa).gamma
        except OutOfTheoryError:
            continue
        if g <= 0:
            continue
        H = model.hessian(U)
        D = extended_gradient_operator(model)
        V = rng.standard_normal((100, 2 * model.n_dof))
        rq = np.einsum("ki,ki->k", V, (H @ V.T).T) / np.sum((D @ V.T) ** 2, axis=0)
        worst_random = min(worst_random, float(rq.min() - g))
        L = (D.T @ D).toarray()
        lam = sla.eigh(Z.T @ H.toarray() @ Z, Z.T @ L @ Z, eigvals_only=True, subset_by_index=[0, 0])[0]
        worst_exact = min(worst_exact, float(lam - g))
        samples += 1
    ok = worst_random >= -1e-8
    detail = f"kappa {kappa:.4f}, min(RQ - gamma) {worst_random:.3f}, min(exact eigenvalue - gamma) {worst_exact:.3f}"
    assert acceptance(10, "coercivity inequality", ok, detail)


def test_region_ordering(lj, acceptance):
    violations = 0
    counts = [0, 0, 0]
    for m in np.linspace(0.85, 1.0, 20):
        for M in np.linspace(1.0, 1.2, 20):
            g = gamma(lj, m, M, 0.0, 2 / 7).gamma > 0
            gh = gamma_hom(lj, m, M) > 0
            st = homogeneous_atomistic_stable(lj, m, M)
            counts = [counts[0] + g, counts[1] + gh, counts[2] + st]
            violations += (g and not gh) + (gh and not st)
    spec = ExperimentSpec("stability-bravais", 24, K=[8], hK=[2], s_grid=(-0.12, 0.12, 15), t_grid=(-0.12, 0.12, 15))
    res = run_experiment(spec)
    s = res.summary
    ok = violations == 0 and s["contains"] and len(res.rows) == 225 and res.ok
    detail = (
        f"(m,M): {counts[0]} <= {counts[1]} <= {counts[2]} of 400, {violations} violations; "
        f"(s,t): {s['n_atomistic_stable']} atomistic in {s['n_coupled_stable']} coupled, "
        f"{s['containment_violations']} violations, Hausdorff {s['hausdorff']:.4f}"
    )
    assert acceptance(11, "stability region ordering", ok, detail)


def test_extension_optimality(rng, acceptance):
    d = build_domain(12, [(0, 0), (1, 0), (6, 6)])
    E = build_extension(d)
    gap = np.inf
    grad = 0.0
    for _ in range(50):
        u = rng.standard_normal((d.n_active, 2))
        v = E(u)
        gap = min(gap, axial_energy(d, averaging_extension(d, u)) - axial_energy(d, v))
        grad = max(grad, float(np.abs(vacancy_gradient(d, v)).max()))
    ok = gap >= 0 and grad <= 1e-12
    assert acceptance(12, "extension optimality", ok, f"min(averaging - optimal) {gap:.3e}, max vacancy gradient {grad:.1e}")
