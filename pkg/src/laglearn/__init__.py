"""laglearn: Bayesian learning with misspecified action-to-feedback lags.

Simulates belief dynamics under lag misattribution, measures action cycling
and return-time statistics, evaluates Wald/Azuma/Chernoff bounds against
matched Monte Carlo, and plays the principal-agent proposal game.
"""

from ._backend import active_backend
from .agent import (GridValueIteration, Myopic, ThresholdLLR,
                    discounted_threshold, myopic_best_response,
                    myopic_indifference_llr, threshold_policy_for)
from .bounds import (FiniteRV, azuma_bound, drift, generalized_chernoff_rate,
                     llr_increment_rv, wald_exponent, wald_exponent_sum,
                     wald_tail_bound, walk_supremum_mc)
from .game import (AlwaysPropose, Block, LearningWrapper, Mirror,
                   ThresholdComposite, acceptance_threshold, build_sigma_eps,
                   estimate_qstar, game_increment_rv, lambda_opt,
                   lambda_opt_instance, lambda_opt_numeric, simulate_game,
                   theorem2_payoff)
from .instances import (build_construction, build_fig1, build_symmetric_game,
                        validate_theorem1_recipe)
from .model import (Belief, Instance, MixtureLag, OutcomeModel, PointLag,
                    UncertainLag, apply_likelihoods, bayes_update,
                    check_regular, effective_mixture, is_lag_misspecified,
                    outcome_distribution, sample_outcome)
from .simulate import (MonteCarloSummary, RunStats, Trajectory, collect_stats,
                       monte_carlo, run_trajectory)

__version__ = "0.1.0"

__all__ = [
    "active_backend",
    "GridValueIteration", "Myopic", "ThresholdLLR", "discounted_threshold",
    "myopic_best_response", "myopic_indifference_llr", "threshold_policy_for",
    "FiniteRV", "azuma_bound", "drift", "generalized_chernoff_rate",
    "llr_increment_rv", "wald_exponent", "wald_exponent_sum",
    "wald_tail_bound", "walk_supremum_mc",
    "AlwaysPropose", "Block", "LearningWrapper", "Mirror",
    "ThresholdComposite", "acceptance_threshold", "build_sigma_eps",
    "estimate_qstar", "game_increment_rv", "lambda_opt",
    "lambda_opt_instance", "lambda_opt_numeric", "simulate_game",
    "theorem2_payoff",
    "build_construction", "build_fig1", "build_symmetric_game",
    "validate_theorem1_recipe",
    "Belief", "Instance", "MixtureLag", "OutcomeModel", "PointLag",
    "UncertainLag", "apply_likelihoods", "bayes_update", "check_regular",
    "effective_mixture", "is_lag_misspecified", "outcome_distribution",
    "sample_outcome",
    "MonteCarloSummary", "RunStats", "Trajectory", "collect_stats",
    "monte_carlo", "run_trajectory",
]
