"""Cascaded channel and power allocation for D2D pairs underlaying a cellular uplink."""
from .model import (ConfigError, GuardError, Matching, MetricsRecord, NetworkInstance,
                    PowerProfile, PriceResult, SimParams)
from .scenario import generate_instance
from .matching import allocate_channels
from .power import allocate_power

__all__ = [
    "ConfigError", "GuardError", "Matching", "MetricsRecord", "NetworkInstance",
    "PowerProfile", "PriceResult", "SimParams", "generate_instance",
    "allocate_channels", "allocate_power",
]
__version__ = "0.1.0"
