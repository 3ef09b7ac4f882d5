"""Noisy adaptive 20 questions over measurement-dependent channels."""

from .analysis import (
    binary_entropy,
    beta,
    capacity_bsc,
    capacity_general,
    crossover_epsilon,
    rate_curves,
    sorted_pm_rate,
)
from .channel import LipschitzFn, MdBSC, TabulatedChannel, check_continuity
from .engine import ProcedureConfig, TrialRecord, choose_lambda, run_trial, stopping_time_pair
from .harness import ExperimentConfig, PMConfig, run_experiment, validate_theorem1
from .sortedpm import PosteriorState, pm_run, pm_step

__version__ = "0.1.0"
