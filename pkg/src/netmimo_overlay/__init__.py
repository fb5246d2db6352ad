"""Open-loop network-MIMO partial-cooperation overlay: scheduling, long-term
throughput, the distributive power-allocation game, and Monte-Carlo checks."""

from .core import (DEFAULT_NOISE_DBM, GainMap, MsState, OstbcRates, Scenario,
                   ScenarioError, Thresholds, Topology, build_gain_map, db_to_linear,
                   dbm_to_watts, draw_shadowing, linear_to_db, path_gain_db,
                   step_mobility, watts_to_dbm)
from .scheduling import Label, UserSets, label_ms, schedule_scenario, schedule_users
from .throughput import (OverlayModel, PayoffComponents, ThroughputReport,
                         common_rate_at_common_ms, common_rate_at_private_ms,
                         min_weighted_throughput, payoff_components, private_throughput,
                         snr_term)
from .game import (InconsistentScenarioError, SolverConfig, SolverTrace,
                   best_response_dynamics, best_response_step, centralized_oracle,
                   solve_local_anchor, solve_ne, solve_theta_for_target, verify_ne)
from .config import ConfigError, fig3_scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_NOISE_DBM", "GainMap", "MsState", "OstbcRates", "Scenario", "ScenarioError",
    "Thresholds", "Topology", "build_gain_map", "db_to_linear", "dbm_to_watts",
    "draw_shadowing", "linear_to_db", "path_gain_db", "step_mobility", "watts_to_dbm",
    "Label", "UserSets", "label_ms", "schedule_scenario", "schedule_users",
    "OverlayModel", "PayoffComponents", "ThroughputReport", "common_rate_at_common_ms",
    "common_rate_at_private_ms", "min_weighted_throughput", "payoff_components",
    "private_throughput", "snr_term",
    "InconsistentScenarioError", "SolverConfig", "SolverTrace", "best_response_dynamics",
    "best_response_step", "centralized_oracle", "solve_local_anchor", "solve_ne",
    "solve_theta_for_target", "verify_ne",
    "ConfigError", "fig3_scenario", "load_scenario",
]
