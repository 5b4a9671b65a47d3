"""Measurement-device-independent QKD with weak-coherent and modified-coherent sources."""

__version__ = "0.1.0"

from .bsm import (  # noqa: E402
    Basis,
    ChannelDetector,
    ClickModel,
    Polarization,
    exact_single_photon_stats,
    gain_and_qber,
    yield_pair,
)
from .decoy_lp import DecoyConfig, LpBounds, ObservedGains, apply_fluctuation, decoy_bounds  # noqa: E402
from .keyrate import KeyRateInputs, binary_entropy, key_rate  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .sources import (  # noqa: E402
    McsParams,
    PhotonDistribution,
    SourceKind,
    SourceSpec,
    calibrate_mcs,
    mcs_distribution,
    mean_photon_number,
    poisson_distribution,
)
from .sweep import ExperimentConfig, KeyRatePoint, find_max_distance, simulate_point  # noqa: E402

__all__ = [
    "BACKEND",
    "Basis",
    "ChannelDetector",
    "ClickModel",
    "DecoyConfig",
    "ExperimentConfig",
    "KeyRateInputs",
    "KeyRatePoint",
    "LpBounds",
    "McsParams",
    "ObservedGains",
    "PhotonDistribution",
    "Polarization",
    "SourceKind",
    "SourceSpec",
    "apply_fluctuation",
    "binary_entropy",
    "calibrate_mcs",
    "decoy_bounds",
    "exact_single_photon_stats",
    "find_max_distance",
    "gain_and_qber",
    "key_rate",
    "mcs_distribution",
    "mean_photon_number",
    "poisson_distribution",
    "simulate_point",
    "yield_pair",
]
