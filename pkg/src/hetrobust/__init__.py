"""Mean and regression estimation when every sample has its own corruption rate."""

from .adversary import Scenario, contaminate, gaussian_max_outlier, sample_profile_powerlaw
from .bench import EstimatorSpec, ExperimentConfig, TrialReport, load_config, rate_overlay, run_experiment, sweep_q
from .estimators import (
    Dataset,
    EstimateResult,
    SearchBudget,
    baselines,
    ols,
    weighted_mean,
    weighted_median,
    weighted_regression_coefficient,
    weighted_regression_depth,
    weighted_tukey_depth,
    weighted_tukey_median,
)
from .exceptions import DomainError, EmptySelectionError, InfeasibleCorruptionRate, SingularDesignError
from .profile import CorruptionProfile, delta_star, lecam_lower_bound, rate_functional
from .weights import WeightVector, oracle_solve, solve_optimal_weights, threshold_weights, uniform_weights

__version__ = "0.1.0"
