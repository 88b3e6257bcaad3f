"""Gradient-adjusted underdamped Langevin sampling with exact Gaussian theory."""

__version__ = "0.1.0"

from .backend import BACKEND  # noqa: E402
from .dynamics import (DynamicsParams, a_star, build_q, diffusion_factor,  # noqa: E402
                       gamma_field, gamma_star, step_size)
from .errors import *  # noqa: E402,F401,F403
from .potentials import (BimodalTarget, LogisticTarget, MixtureTarget,  # noqa: E402
                         QuadCosTarget, QuadraticTarget, eval_gradient, eval_potential,
                         make_logistic_target, synthesize_logistic_data)
from .sampler import Ensemble, SimConfig, em_step, init_ensemble, simulate  # noqa: E402

__all__ = [
    "BACKEND", "DynamicsParams", "a_star", "build_q", "diffusion_factor", "gamma_field",
    "gamma_star", "step_size", "BimodalTarget", "LogisticTarget", "MixtureTarget",
    "QuadCosTarget", "QuadraticTarget", "eval_gradient", "eval_potential",
    "make_logistic_target", "synthesize_logistic_data", "Ensemble", "SimConfig",
    "em_step", "init_ensemble", "simulate",
]
