"""Crowd label aggregation with spectrally initialized Dawid-Skene EM."""

from .baselines import majority_vote
from .em import e_step, log_marginal_likelihood, m_step, majority_vote_init, run_em
from .model import (
    GroundTruthModel,
    ObservedLabels,
    Posterior,
    inject_label_noise,
    mean_kl_separation,
    validate,
)
from .onecoin import init_accuracies, onecoin, pairwise_stats, run_onecoin_em
from .pipeline import RunConfig, fit, run, sweep
from .spectral import spectral_init
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "GroundTruthModel",
    "ObservedLabels",
    "Posterior",
    "RunConfig",
    "SynthConfig",
    "e_step",
    "fit",
    "generate",
    "init_accuracies",
    "inject_label_noise",
    "log_marginal_likelihood",
    "m_step",
    "majority_vote",
    "majority_vote_init",
    "mean_kl_separation",
    "onecoin",
    "pairwise_stats",
    "run",
    "run_em",
    "run_onecoin_em",
    "spectral_init",
    "sweep",
    "validate",
]
