"""Stable sparse recovery: Dantzig selector and LASSO solvers, recovery-condition
certifiers, polytope approximations of norm balls and error-bound evaluators."""

from .numerics import Lp, MixedInfOne, Stream, norm, dual_norm, best_k_term_error
from .geometry import EpsSchedule, Polytope, build_Q, project, sandwich_check, hausdorff_nested
from .solvers import Instance, SolveResult, solve_ds_linear, solve_ds_nonlinear, solve_lasso
from .certifiers import weak_rsp, rsp, nsp, rip_delta, mutual_coherence_mu1, necessity_probe
from .bounds import constant_c, hoffman_mu, robinson_sigma, evaluate_bound

__version__ = "0.1.0"
