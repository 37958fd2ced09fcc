"""Opportunistic scheduling and beamforming for MIMO-OFDMA downlink with reduced feedback."""

from .channel_model import ConfigurationError
from .engine import SimConfig, asymptotic_experiment, run_campaign, run_trial
from .feedback import ClusterPlan, FeedbackReport, SchemeId

__all__ = [
    "ClusterPlan",
    "ConfigurationError",
    "FeedbackReport",
    "SchemeId",
    "SimConfig",
    "asymptotic_experiment",
    "run_campaign",
    "run_trial",
]

__version__ = "0.1.0"
