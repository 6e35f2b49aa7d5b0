import numpy as np
import pytest
from scipy.optimize import brentq

from acclab.assembly import AtomisticModel, CoupledModel
from acclab.lattice import build_domain
from acclab.mesh import MeshPlan, build_graded_mesh
from acclab.solver import (
    ContinuationConfig,
    SolveConfig,
    SolverError,
    continuation_critical_t,
    minimize,
    newton_refine,
    solve_equilibrium,
    strong_wolfe,
)
from acclab.stability import periodic_lattice_spectrum

B = np.array([[1.01, 0.01], [0.0, 0.99]])


@pytest.fixture(scope="module")
def vacancy_model():
    from acclab.potential import lennard_jones

    d = build_domain(16, [(0, 0)], cell="hexagon")
    return CoupledModel(build_graded_mesh(d, MeshPlan(4, 1)), lennard_jones(), B)


@pytest.mark.parametrize("precond", ["laplace", "none"])
def test_minimize_converges(vacancy_model, precond):
    res = minimize(vacancy_model, cfg=SolveConfig(tol=1e-6, precond=precond))
    assert res.converged
    energies = [row[1] for row in res.trace]
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(energies, energies[1:]))
    assert res.energy < vacancy_model.energy(vacancy_model.zero())


def test_preconditioner_saves_iterations(vacancy_model):
    a = minimize(vacancy_model, cfg=SolveConfig(tol=1e-6))
    b = minimize(vacancy_model, cfg=SolveConfig(tol=1e-6, precond="none"))
    assert a.iterations < b.iterations


def test_newton_converges_quadratically(vacancy_model):
    res = minimize(vacancy_model, cfg=SolveConfig(tol=1e-3))
    nr = newton_refine(vacancy_model, res.U, tol=1e-11)
    assert nr.converged
    g = nr.grad_norms
    # each step roughly squares the error once in the asymptotic regime
    k = next(i for i in range(len(g) - 1) if g[i] < 1e-3)
    if k + 1 < len(g) - 1:
        assert g[k + 1] <= 10 * g[k] ** 1.5


def test_strong_wolfe_conditions(vacancy_model):
    m = vacancy_model
    U = m.zero().ravel()
    e0 = m.energy(U)
    g = m.gradient(U).ravel()
    d = -g
    s0 = float(g @ d)
    c1, c2 = 1e-4, 0.1
    a, e, gn = strong_wolfe(m, U, d, e0, s0, 1e-3, c1, c2)
    assert e <= e0 + c1 * a * s0
    assert abs(float(gn.ravel() @ d)) <= c2 * abs(s0)


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(tol=0)
    with pytest.raises(ValueError):
        SolveConfig(c1=0.5, c2=0.1)
    with pytest.raises(ValueError):
        SolveConfig(precond="jacobi")


def test_inadmissible_start_rejected(vacancy_model):
    U = vacancy_model.zero()
    U[3] += 5.0
    with pytest.raises(SolverError):
        minimize(vacancy_model, U)


def test_equilibrium_and_trace_file(vacancy_model, tmp_path):
    U, res, nr = solve_equilibrium(vacancy_model)
    assert nr.converged and np.linalg.norm(vacancy_model.gradient(U)) <= 1e-9
    res.write_trace(tmp_path / "trace.csv")
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "iter,energy,grad_norm,step" and len(lines) == len(res.trace) + 1


def test_continuation_matches_block_spectrum(lj):
    # a defect-free periodic lattice stays homogeneous, so the critical stretch
    # is the first zero of the exact block-circulant spectrum
    d = build_domain(6, cell="hexagon")
    model = AtomisticModel(d, lj)

    def path(t):
        return np.diag([1.0, 1.0 + t])

    res = continuation_critical_t(model, path, cfg=ContinuationConfig(dt=1e-2, bisect_tol=1e-9, t_max=0.5))
    f = lambda t: periodic_lattice_spectrum(lj, path(t), d)
    grid = np.arange(0.0, 0.5, 1e-2)
    k = next(i for i, t in enumerate(grid) if f(t) <= 0)
    ref = brentq(f, grid[k - 1], grid[k], xtol=1e-13)
    assert res.t_crit == pytest.approx(ref, abs=2e-9)
