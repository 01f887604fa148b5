"""Exponentially weighted estimands for canonical exponential family frames.

Filters, predictors and smoothers in closed form, a model based data
generating process, quasi-likelihood estimation of the hyperparameters and
the local level Kalman baseline.
"""
from .errors import ConfigError, ConvergenceError, DataError, DegeneratePredictorError, DomainError
from .estimands import (
    EstimandPath,
    EstimandPoint,
    Hyper,
    SteadyState,
    TwoSidedSums,
    WeightedSums,
    backward_pass,
    filter_newton_general,
    filter_path,
    filter_point,
    forward_pass,
    forward_update,
    half_life,
    one_step_recursion,
    predict_path,
    predict_point,
    predictor_newton_general,
    smooth_path,
    smooth_point,
    smoother_newton_general,
    steady_state_coeffs,
)
from .estimation import (
    FitOptions,
    FitResult,
    QuasiLik,
    drift_increment,
    fit_mle,
    fit_two_step,
    long_run_variance,
    loglik_grid,
    profile_interval,
    quasi_loglik,
    score,
)
from .frames import FAMILIES, Frame, inverse_link, make_frame, mean_domain_project
from .kalman import LocalLevelConfig, gain_weight_product, kalman_gains, kalman_predict, steady_state_lambda
from .simulation import SimConfig, centering, sample, simulate_dgp, spawn_seeds

__version__ = "0.1.0"
