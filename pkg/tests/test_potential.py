import numpy as np
import pytest

from acclab.lattice import DET_A6, orbit_decomposition, to_cartesian
from acclab.potential import (
    PotentialSingularityError,
    cauchy_born_density,
    cauchy_born_stress,
    decay_modulus,
    lennard_jones,
    make_potential,
    morse,
    shell_energy,
)


def test_lennard_jones_minimum_at_unit_distance(lj):
    assert lj.phi(np.array(1.0)) == pytest.approx(-1.0)
    assert lj.dphi(np.array(1.0)) == pytest.approx(0.0, abs=1e-14)
    assert lj.ddphi(np.array(1.0)) == pytest.approx(72.0)


@pytest.mark.parametrize("pot", [lennard_jones(), morse(), lennard_jones(2.0, 1.1)])
def test_derivatives_match_finite_differences(pot):
    s = np.linspace(0.85, 3.0, 40)
    h = 1e-6
    assert np.allclose(pot.dphi(s), (pot.phi(s + h) - pot.phi(s - h)) / (2 * h), rtol=1e-6, atol=1e-7)
    assert np.allclose(pot.ddphi(s), (pot.dphi(s + h) - pot.dphi(s - h)) / (2 * h), rtol=1e-6, atol=1e-6)


def test_vector_hessian_matches_finite_differences(lj, rng):
    r = rng.normal(size=2)
    r *= 1.1 / np.linalg.norm(r)
    _, g, H = lj.value_grad_hess(r)
    h = 1e-6
    for k in range(2):
        e = np.eye(2)[k] * h
        gp = lj.value_grad_hess(r + e)[1]
        gm = lj.value_grad_hess(r - e)[1]
        assert np.allclose((gp - gm) / (2 * h), H[:, k], rtol=1e-6, atol=1e-6)
        fp, fm = lj.value_grad_hess(r + e)[0], lj.value_grad_hess(r - e)[0]
        assert (fp - fm) / (2 * h) == pytest.approx(g[k], rel=1e-6)


def test_singular_distance_raises(lj):
    with pytest.raises(PotentialSingularityError):
        lj.value_grad_hess(np.zeros((1, 2)))


def test_make_potential_kinds():
    assert make_potential("LJ").name == "lennard-jones"
    assert make_potential("morse", alpha=3.0).params["alpha"] == 3.0
    with pytest.raises(ValueError):
        make_potential("buckingham")


def test_cauchy_born_density_reference_value(lj):
    orb = orbit_decomposition(3.1)
    direct = sum(6 * lj.phi(np.array(l)) for l in orb.lengths)
    assert shell_energy(lj) == pytest.approx(direct, rel=1e-14)
    assert cauchy_born_density(lj, np.eye(2)) == pytest.approx(direct / DET_A6, rel=1e-14)


def test_cauchy_born_stress_is_gradient(lj, rng):
    F = np.eye(2) + 0.03 * rng.standard_normal((2, 2))
    P = cauchy_born_stress(lj, F)
    h = 1e-6
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2))
            E[i, j] = h
            fd = (cauchy_born_density(lj, F + E) - cauchy_born_density(lj, F - E)) / (2 * h)
            assert fd == pytest.approx(P[i, j], rel=1e-6, abs=1e-6)


def test_cauchy_born_rejects_inverted_gradient(lj):
    with pytest.raises(PotentialSingularityError):
        cauchy_born_density(lj, np.diag([1.0, -1.0]))


def test_decay_modulus_monotone(lj):
    vals = [decay_modulus(lj, 2, s) for s in (1.0, 1.5, 2.0, 3.0)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert decay_modulus(lj, 0, 1.0) == pytest.approx(1.0)
