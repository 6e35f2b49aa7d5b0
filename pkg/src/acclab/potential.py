"""Pair potentials, decay moduli and the Cauchy-Born stored energy density."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import DEFAULT_CUTOFF, DET_A6, OrbitDecomposition, orbit_decomposition, to_cartesian


class PotentialSingularityError(ValueError):
    pass


@dataclass(frozen=True)
class PairPotential:
    """Radial pair potential phi(|r|) with first and second derivatives.

    The three scalar callables act elementwise on arrays of distances.
    """

    name: str
    phi: Callable
    dphi: Callable
    ddphi: Callable
    params: dict = field(default_factory=dict)
    floor: float = 1e-8

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.floor):
            raise PotentialSingularityError(f"distance {s.min():.3e} below floor {self.floor:.1e}")
        return s

    def value_grad_hess(self, r):
        """Value, gradient and Hessian of r -> phi(|r|) for vectors r of shape (..., 2).

        The Hessian is phi''(s) rhat rhat^T + phi'(s)/s (I - rhat rhat^T).
        """
        r = np.asarray(r, dtype=float)
        s = self._check(np.linalg.norm(r, axis=-1))
        rhat = r / s[..., None]
        d1 = self.dphi(s)
        d2 = self.ddphi(s)
        grad = d1[..., None] * rhat
        P = rhat[..., :, None] * rhat[..., None, :]
        hess = d2[..., None, None] * P + (d1 / s)[..., None, None] * (np.eye(2) - P)
        return self.phi(s), grad, hess

    def scaled(self, factor: float) -> "PairPotential":
        return PairPotential(
            f"{self.name}*{factor:g}",
            lambda s: factor * self.phi(s),
            lambda s: factor * self.dphi(s),
            lambda s: factor * self.ddphi(s),
            dict(self.params, scale=factor),
            self.floor,
        )


def lennard_jones(epsilon: float = 1.0, sigma: float = 1.0) -> PairPotential:
    """Lennard-Jones potential epsilon [(sigma/s)^12 - 2 (sigma/s)^6], minimum -epsilon at s = sigma."""

    def phi(s):
        x = (sigma / s) ** 6
        return epsilon * (x * x - 2 * x)

    def dphi(s):
        x = (sigma / s) ** 6
        return epsilon * (-12 * x * x + 12 * x) / s

    def ddphi(s):
        x = (sigma / s) ** 6
        return epsilon * (156 * x * x - 84 * x) / s**2

    return PairPotential("lennard-jones", phi, dphi, ddphi, {"epsilon": epsilon, "sigma": sigma})


def morse(alpha: float = 4.0, epsilon: float = 1.0, r0: float = 1.0) -> PairPotential:
    """Morse potential epsilon [exp(-2 alpha (s - r0)) - 2 exp(-alpha (s - r0))]."""

    def phi(s):
        e = np.exp(-alpha * (s - r0))
        return epsilon * (e * e - 2 * e)

    def dphi(s):
        e = np.exp(-alpha * (s - r0))
        return epsilon * (-2 * alpha * e * e + 2 * alpha * e)

    def ddphi(s):
        e = np.exp(-alpha * (s - r0))
        return epsilon * (4 * alpha**2 * e * e - 2 * alpha**2 * e)

    return PairPotential("morse", phi, dphi, ddphi, {"alpha": alpha, "epsilon": epsilon, "r0": r0})


def make_potential(kind: str = "lennard-jones", **params) -> PairPotential:
    kind = kind.lower().replace("_", "-")
    if kind in ("lennard-jones", "lj"):
        return lennard_jones(**params)
    if kind == "morse":
        return morse(**params)
    raise ValueError(f"unknown potential kind {kind!r}")


def decay_modulus(potential: PairPotential, k: int, s: float, s_max: float = 50.0, step: float = 1e-3) -> float:
    """Decay modulus M_k(s): supremum over t >= s of the size of the k-th derivative of r -> phi(|r|).

    k = 0: |phi|; k = 1: |phi'|; k = 2: (phi''^2 + (phi'/t)^2)^(1/2);
    k = 3: |phi'''| estimated by finite differences of phi''. The supremum is
    taken on a grid of spacing ``step`` on [s, s_max]; beyond s_max the
    potential is assumed monotone, so the tail contributes its value at s_max.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if s >= s_max:
        t = np.array([s])
    else:
        t = np.append(np.arange(s, s_max, step), s_max)
    if k == 0:
        v = np.abs(potential.phi(t))
    elif k == 1:
        v = np.abs(potential.dphi(t))
    elif k == 2:
        v = np.hypot(potential.ddphi(t), potential.dphi(t) / t)
    elif k == 3:
        h = 1e-5
        v = np.abs(potential.ddphi(t + h) - potential.ddphi(t - h)) / (2 * h)
    else:
        raise ValueError("k must be in 0..3")
    return float(v.max())


def _directions_cartesian(orbits: OrbitDecomposition | float | None):
    if orbits is None:
        orbits = orbit_decomposition(DEFAULT_CUTOFF)
    elif not isinstance(orbits, OrbitDecomposition):
        orbits = orbit_decomposition(float(orbits))
    return to_cartesian(orbits.directions)


def cauchy_born_density(potential: PairPotential, F, orbits=None, sigma_floor: float = 1e-8) -> float:
    """W(F) = (1/det A6) sum_r phi(F r) over directions within the cutoff."""
    F = np.asarray(F, dtype=float)
    if np.linalg.det(F) <= 0 or np.linalg.svd(F, compute_uv=False)[-1] < sigma_floor:
        raise PotentialSingularityError("degenerate deformation gradient")
    R = _directions_cartesian(orbits)
    s = np.linalg.norm(R @ F.T, axis=1)
    return float(potential.phi(s).sum() / DET_A6)


def cauchy_born_stress(potential: PairPotential, F, orbits=None) -> np.ndarray:
    """First derivative dW/dF."""
    F = np.asarray(F, dtype=float)
    R = _directions_cartesian(orbits)
    D = R @ F.T
    _, g, _ = potential.value_grad_hess(D)
    return np.einsum("ni,nj->ij", g, R) / DET_A6


def shell_energy(potential: PairPotential, cutoff: float = DEFAULT_CUTOFF) -> float:
    """Energy per site of the undeformed lattice, sum_r phi(|r|)."""
    return float(cauchy_born_density(potential, np.eye(2), cutoff) * DET_A6)
