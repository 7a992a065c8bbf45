"""
Two-phase Mullins-Sekerka and Stokes solvers on star-shaped planar interfaces.
"""
import os

__version__ = "0.1.0"

# must happen before numpy loads its BLAS
if os.environ.get("MSSOLVE_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["MSSOLVE_THREADS"])

from .elliptic import BoundaryConfig, normal_jump, solve_two_phase_laplace  # noqa: E402
from .errors import *  # noqa: E402,F401,F403
from .evolution import (EvolutionProblem, InterfaceData, evolve, reduce_data, solve_coupled, step,  # noqa: E402
                        stokes_velocity_term)
from .geometry import InterfaceGeometry, build_interface, surface_gradient, surface_laplacian  # noqa: E402
from .ms_operator import (OperatorHandle, apply_A0, apply_B0, apply_B1, apply_dirichlet_trace,  # noqa: E402
                          assemble, ms_symbol, operator_norm_estimate)
from .sobolev import PeriodicField, Trajectory, h_norm, xt_norm  # noqa: E402
from .stokes import (StokesData, discrete_infsup, energy_identity_residual, korn_constant,  # noqa: E402
                     lift_jump, solve_two_phase_stokes)
