"""Drafter selection for speculative decoding as a budgeted multi-armed bandit."""

__version__ = "0.1.0"

from .analytics import (  # noqa: E402
    RegretReport,
    be_stats,
    bd_stats,
    expected_nacc,
    feedback_signal,
    lemma9_counterexample,
    single_arm_stopping_bounds,
    stopping_regret,
    switching_cost,
    theorem1_condition,
    var_nacc,
)
from .config import ConfigError, ExperimentConfig, make_scenario, parse_config  # noqa: E402
from .env import BetaScaled, CategoricalEnv, DrafterProfile, PointMass, RoundOutcome  # noqa: E402
from .harness import run_episode, run_experiment, write_results  # noqa: E402
from .policies import EXP3, PETC, UCB, DiscountedUCB, SequentialHalving, SlidingWindowUCB  # noqa: E402
from .rewards import RewardKind, bd_reward, be_reward, tv_distance  # noqa: E402
