"""ergohj: eigenvalue laboratory for ergodic viscous Hamilton-Jacobi problems.

Computes the additive eigenvalue lambda_max(beta) of

    lambda - Lap(phi) + b.D(phi) + (1/m)|D(phi)|^m = beta V(x)   on R^d

for radial inward drifts b ~ rho |x|^delta and vanishing potentials
V ~ |x|^-eta, certifies lower bounds from explicit subsolutions, and
verifies the sharp large-beta laws (growth rate constant c0, the moderate
plateau dichotomy at a = d-1, and the gap rate constant c1) by sweeps,
an independent linear cross-check at m = 2, and Monte Carlo control runs.
"""

__version__ = "0.1.0"

from .certificates import (
    Certificate,
    balance_functions,
    balance_radius,
    c0_constant,
    c1_constant,
    gap_constant,
    gap_function,
    lower_bound,
    plateau_classify,
    verify_subsolution,
)
from .grids import Grid, GridOptions, build_grid
from .model import (
    ProblemSpec,
    RadialCoefficients,
    build_coefficients,
    conjugate_exponent,
    eval_drift,
    eval_potential,
    load_spec,
    validate_spec,
)
from .solver import (
    Solution,
    SolverOptions,
    estimate_lambda_extrapolated,
    solve_newton,
    solve_time_march,
)
