"""Brownian-bridge Monte Carlo for Schrodinger semigroups.

The pin-to-pin weight Q(x, y; V, t) of e^{-tH}, H = -Laplacian/2 + V,
is estimated by sampling Brownian bridges and averaging exp(-action);
matrix elements <phi, e^{-tH} psi> follow by Gauss-Legendre quadrature
over wavefunction supports.  Everything quantitative is checked against
independent references: closed-form kernels where they exist and a
finite-difference grid operator otherwise.  Gaussian-envelope upper
bounds, cutoff functional calculus, and truncation studies for
potentials unbounded below round out the toolkit.
"""

from . import backend, bounds, cli, convergence, feynman_kac, oracles, potentials, stochastic
from .bounds import BoundParameters, jensen_chain_bound, theorem21_bound, verify_bound_sweep
from .convergence import (
    check_theorem31,
    cutoff_contraction_check,
    q_truncation_study,
    resolvent_distance,
    spike_multiplication_sequence,
    truncation_study,
)
from .feynman_kac import (
    McConfig,
    QEstimate,
    QuadratureConfig,
    Wavefunction,
    bump,
    estimate_Q,
    free_kernel,
    gaussian,
    matrix_element,
    refine_steps,
)
from .oracles import (
    OracleConfig,
    build_grid_operator,
    mehler_kernel,
    semigroup_kernel,
    semigroup_matrix_element,
    stark_kernel,
)
from .potentials import harmonic, inverted_quadratic, stark, truncate, zero
from .stochastic import DIVERGENT, RngSeed, gaussian_exp_moment, is_divergent, sample_bridge

__version__ = "0.1.0"

__all__ = [
    "BoundParameters",
    "DIVERGENT",
    "McConfig",
    "OracleConfig",
    "QEstimate",
    "QuadratureConfig",
    "RngSeed",
    "Wavefunction",
    "backend",
    "bounds",
    "build_grid_operator",
    "bump",
    "check_theorem31",
    "cli",
    "convergence",
    "cutoff_contraction_check",
    "estimate_Q",
    "feynman_kac",
    "free_kernel",
    "gaussian",
    "gaussian_exp_moment",
    "harmonic",
    "inverted_quadratic",
    "is_divergent",
    "jensen_chain_bound",
    "matrix_element",
    "mehler_kernel",
    "oracles",
    "potentials",
    "q_truncation_study",
    "refine_steps",
    "resolvent_distance",
    "sample_bridge",
    "semigroup_kernel",
    "semigroup_matrix_element",
    "spike_multiplication_sequence",
    "stark",
    "stark_kernel",
    "stochastic",
    "theorem21_bound",
    "truncate",
    "truncation_study",
    "verify_bound_sweep",
    "zero",
]
