"""Solvers: the sketched gradient method, its accelerated variant and stepsize rules."""
from sega.solvers.asega import AsegaState, asega_query_point, asega_step, run_asega
from sega.solvers.contraction import Contraction, expected_one_step_contraction
from sega.solvers.lyapunov import (lyapunov_asega, lyapunov_coordinate, lyapunov_general,
                                   lyapunov_metric_G)
from sega.solvers.sega import SegaState, run_sega, sega_step
from sega.solvers.stepsize import (AsegaParams, InfeasibleStepsize, Stepsize, StepsizePolicy,
                                   asega_params, best_sigma_general, importance_trace,
                                   simple_uniform_bound, stepsize_coordinate_nonacc,
                                   stepsize_general, stepsize_metric_G, stepsize_simple_uniform,
                                   stepsize_subspace, td_constant)

__all__ = [
    "SegaState", "sega_step", "run_sega",
    "AsegaState", "asega_query_point", "asega_step", "run_asega",
    "Contraction", "expected_one_step_contraction",
    "lyapunov_general", "lyapunov_coordinate", "lyapunov_asega", "lyapunov_metric_G",
    "AsegaParams", "InfeasibleStepsize", "Stepsize", "StepsizePolicy", "asega_params",
    "best_sigma_general", "importance_trace", "simple_uniform_bound",
    "stepsize_coordinate_nonacc", "stepsize_general", "stepsize_metric_G",
    "stepsize_simple_uniform", "stepsize_subspace", "td_constant",
]
