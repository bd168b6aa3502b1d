"""Trapped-ion repeater chains with decoherence-free-subspace encoding."""

__version__ = "0.1.0"

from .channels import NoiseModel  # noqa: E402
from .protocol import ChainConfig, ChainResult, chsh_value, simulate_chain  # noqa: E402
from .timing import HardwareParams, max_distance, total_time  # noqa: E402

__all__ = [
    "ChainConfig",
    "ChainResult",
    "HardwareParams",
    "NoiseModel",
    "chsh_value",
    "max_distance",
    "simulate_chain",
    "total_time",
]
