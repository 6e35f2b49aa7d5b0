import numpy as np
import pytest

from acclab.assembly import AtomisticModel
from acclab.lattice import build_domain
from acclab.stability import (
    OutOfTheoryError,
    cell_wavevectors,
    classify_deformation,
    gamma,
    gamma_hom,
    homogeneous_atomistic_stable,
    lowest_hessian_eigenvalue,
    periodic_lattice_spectrum,
    shell_constants,
)


def test_shell_constants_at_reference(lj):
    sc = shell_constants(lj, 1.0, 1.0)
    assert sc.c[0] == pytest.approx(72.0, rel=1e-12)
    assert np.allclose(sc.c, [72, -2.8971, -1.2744, -0.2436, -0.2436, -0.1149], atol=1e-4)
    assert sc.c_sum == pytest.approx(67.22639, abs=1e-5)
    assert gamma_hom(lj, 1.0, 1.0) == pytest.approx(50.41979, abs=1e-5)


def test_gamma_reduces_to_homogeneous(lj):
    rep = gamma(lj, 0.99, 1.01, delta=0.0, kappa=1.0)
    assert rep.gamma == pytest.approx(rep.gamma_hom, rel=1e-12)


def test_gamma_monotone_in_kappa_and_delta(lj):
    g = [gamma(lj, 0.99, 1.01, 0.02, k).gamma for k in (0.2, 0.4, 0.8)]
    assert g[0] < g[1] < g[2]
    g = [gamma(lj, 0.99, 1.01, d, 2 / 7).gamma for d in (0.0, 0.05, 0.1)]
    assert g[0] > g[1] > g[2]


def test_gamma_rejects_large_delta(lj):
    with pytest.raises(OutOfTheoryError):
        gamma(lj, 1.0, 1.0, delta=0.3, kappa=2 / 7)
    with pytest.raises(ValueError):
        gamma(lj, 1.0, 1.0, kappa=0.0)


def test_cell_wavevectors_count():
    for N, cell in ((6, "hexagon"), (5, "parallelogram"), (8, "hexagon")):
        d = build_domain(N, cell=cell)
        th = cell_wavevectors(d)
        assert len(th) == d.n_sites
        # every wavevector gives a cell-periodic plane wave
        phase = np.exp(1j * (d.sites @ th.T))
        shifted = np.exp(1j * ((d.sites + d.period[:, 0]) @ th.T))
        assert np.allclose(phase, shifted)


@pytest.mark.parametrize("cell", ["hexagon", "parallelogram"])
def test_periodic_spectrum_matches_sparse_hessian(lj, cell):
    B = np.array([[1.02, 0.1], [0.0, 0.97]])
    d = build_domain(6, cell=cell)
    model = AtomisticModel(d, lj, B)
    ref = lowest_hessian_eigenvalue(model.hessian(model.zero()))
    assert periodic_lattice_spectrum(lj, B, d) == pytest.approx(ref, rel=1e-10)


def test_lowest_eigenvalue_dense_vs_sparse_paths(lj, monkeypatch):
    import acclab.stability as st

    d = build_domain(12, [(0, 0)], cell="hexagon")
    model = AtomisticModel(d, lj, np.diag([1.0, 1.04]))
    H = model.hessian(model.zero())
    dense = lowest_hessian_eigenvalue(H)
    monkeypatch.setattr(st, "DENSE_LIMIT", 10)
    assert lowest_hessian_eigenvalue(H) == pytest.approx(dense, rel=1e-8)


def test_homogeneous_stability(lj):
    assert homogeneous_atomistic_stable(lj, 1.0, 1.0)
    assert not homogeneous_atomistic_stable(lj, 1.0, 1.2)


def test_classify_identity(lj):
    d = build_domain(6, cell="hexagon")
    model = AtomisticModel(d, lj)
    c = classify_deformation(model, model.zero())
    assert c.m == pytest.approx(1.0) and c.M == pytest.approx(1.0) and c.delta == pytest.approx(0.0, abs=1e-14)
    assert c.contains(0.9, 1.1, 0.01)
