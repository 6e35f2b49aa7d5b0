"""Energy-based atomistic/continuum coupling on the 2D triangular lattice with vacancies."""
from .assembly import AtomisticModel, CoupledModel, h1_error
from .defects import analytic_single_vacancy_index, build_extension, patch_stability_index, stability_index
from .experiments import ErrorModel, ExperimentSpec, error_model, fit_rate, run_experiment
from .lattice import build_domain
from .mesh import MeshPlan, build_graded_mesh
from .potential import lennard_jones, make_potential, morse
from .solver import ContinuationConfig, SolveConfig, continuation_critical_t, minimize, solve_equilibrium
from .stability import gamma, gamma_hom, homogeneous_atomistic_stable, lowest_hessian_eigenvalue

__version__ = "0.1.0"

__all__ = [
    "AtomisticModel",
    "ContinuationConfig",
    "CoupledModel",
    "ErrorModel",
    "ExperimentSpec",
    "MeshPlan",
    "SolveConfig",
    "analytic_single_vacancy_index",
    "build_domain",
    "build_extension",
    "build_graded_mesh",
    "continuation_critical_t",
    "error_model",
    "fit_rate",
    "gamma",
    "gamma_hom",
    "h1_error",
    "homogeneous_atomistic_stable",
    "lennard_jones",
    "lowest_hessian_eigenvalue",
    "make_potential",
    "minimize",
    "morse",
    "patch_stability_index",
    "run_experiment",
    "solve_equilibrium",
    "stability_index",
]
