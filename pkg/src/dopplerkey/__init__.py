"""Doppler-shift secret key generation for inter-spacecraft links."""
from .analytic import NpsdsLaw, QuadratureSpec, key_match_probability, max_key_rate
from .config import QuantizerConfig, ScenarioConfig, load_config
from .geometry import SpacecraftState, relative_doppler

__all__ = [
    "NpsdsLaw",
    "QuadratureSpec",
    "QuantizerConfig",
    "ScenarioConfig",
    "SpacecraftState",
    "key_match_probability",
    "load_config",
    "max_key_rate",
    "relative_doppler",
]

__version__ = "0.1.0"
