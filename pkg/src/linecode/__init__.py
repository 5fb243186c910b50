"""Dense and chunked network codes over line networks with random traffic."""

from .bounds import BoundQuery, BoundValue, ccp_bound, delay_bound, gamma_star, partition_plan
from .codec import CodeConfig, Packet, PrecodeConfig
from .gf2 import BitMatrix, BitVector, RankDeficientError, eliminate_decode, rank
from .harness import ExperimentConfig, load_config, run_experiment
from .simnet import NetworkConfig, TrialResult, run_trial, undecodable_fraction_at
from .traffic import TrafficSpec, equivalent_min_param

__version__ = "0.1.0"

__all__ = [
    "BitMatrix", "BitVector", "BoundQuery", "BoundValue", "CodeConfig", "ExperimentConfig",
    "NetworkConfig", "Packet", "PrecodeConfig", "RankDeficientError", "TrafficSpec",
    "TrialResult", "ccp_bound", "delay_bound", "eliminate_decode", "equivalent_min_param",
    "gamma_star", "load_config", "partition_plan", "rank", "run_experiment", "run_trial",
    "undecodable_fraction_at",
]
