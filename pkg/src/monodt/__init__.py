"""monodt: time-stepping methods for the 1D monodomain cardiac model.

Eight schemes (forward and forward-backward Euler, two Rush-Larsen
exponential integrators, SBDF2, two Strang splittings with Crank-Nicolson
diffusion, and third-order deferred correction) applied to three ionic
models of increasing stiffness, with absolute-stability analysis,
convergence benchmarking and CPU-cost comparison.
"""

__version__ = "0.1.0"

from .cells import (BRModel, CellModel, CellState, MSModel, RateSplit,
                    TNNPModel, eval_reaction, get_model, numerical_jacobian,
                    rate_split)
from .grid import DiffusionSpec, Grid1D, Stimulus1D, laplacian_apply, stimulus_at
from .kernels import Spectrum, TridiagonalOperator, dense_eigenvalues, tridiag_factor, tridiag_solve
from .steppers import (FieldState, Problem, RunResult, SCHEMES, bootstrap,
                       phi, run_simulation)
from .stability import (build_j_rl, empirical_dt, rk4_stability_bound,
                        sbdf2_boundary_locus, scan_lambda_min, theoretical_dt)
from .bench import (ConvergenceSeries, ProbeSpec, ReferenceSolution,
                    compute_reference, convergence_study, cpu_benchmark,
                    depolarization_time, error_norms, norms, wave_speed)
from .config import RunConfig, default_config, parse_config

__all__ = [
    "__version__",
    "BRModel", "CellModel", "CellState", "MSModel", "RateSplit", "TNNPModel",
    "eval_reaction", "get_model", "numerical_jacobian", "rate_split",
    "DiffusionSpec", "Grid1D", "Stimulus1D", "laplacian_apply", "stimulus_at",
    "Spectrum", "TridiagonalOperator", "dense_eigenvalues", "tridiag_factor",
    "tridiag_solve",
    "FieldState", "Problem", "RunResult", "SCHEMES", "bootstrap", "phi",
    "run_simulation",
    "build_j_rl", "empirical_dt", "rk4_stability_bound", "sbdf2_boundary_locus",
    "scan_lambda_min", "theoretical_dt",
    "ConvergenceSeries", "ProbeSpec", "ReferenceSolution", "compute_reference",
    "convergence_study", "cpu_benchmark", "depolarization_time", "error_norms",
    "norms", "wave_speed",
    "RunConfig", "default_config", "parse_config",
]
