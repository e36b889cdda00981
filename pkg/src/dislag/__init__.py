"""Distributed Lagrangian methods for network resource allocation."""

from .cases import ieee14, ieee118, load_case, save_case
from .dlm import RunConfig, StepSchedule, dlm_step, dual_average_update, rate_bound_deterministic, run_dlm
from .dslm import NoiseModel, dslm_step, rate_bound_stochastic, run_dslm, run_ensemble
from .dual import check_slater, q_eval, q_subgradient, solve_dual
from .graphs import GraphSchedule, lazy_metropolis, second_singular_value, spectral_delta
from .problem import Box, NodeSpec, Problem, Quadratic2, Quadratic3, primal_argmin

__version__ = "0.1.0"
