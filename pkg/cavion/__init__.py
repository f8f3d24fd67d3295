"""
cavion - single erbium ions in a fiber microcavity
Cavity optics, nanoparticle ensembles, a pulsed-protocol trial engine and the
estimators (lifetime, linewidth, saturation, pulsed g2) that certify a single emitter.
"""

__version__ = "1.0.0"

from .errors import (
    CavionError, InvalidParameterError, InstabilityError, FitInputError,
    UndefinedEstimateError, FormatError, ConfigError, UsageError,
)
from .cavity import CavityParams, mode_geometry, cavity_purcell, purcell_lifetime
from .ensemble import ParticleSpec, Ion, Nanoparticle, sample_nanoparticle
from .photodynamics import (
    ProtocolTiming, DetectionChain, Scenario, TimeTagStream, run_trial, run_sequence,
)
from .estimators import FitResult, G2Series, fit_least_squares, g2_pulsed

__all__ = [
    "__version__",
    "CavionError", "InvalidParameterError", "InstabilityError", "FitInputError",
    "UndefinedEstimateError", "FormatError", "ConfigError", "UsageError",
    "CavityParams", "mode_geometry", "cavity_purcell", "purcell_lifetime",
    "ParticleSpec", "Ion", "Nanoparticle", "sample_nanoparticle",
    "ProtocolTiming", "DetectionChain", "Scenario", "TimeTagStream", "run_trial", "run_sequence",
    "FitResult", "G2Series", "fit_least_squares", "g2_pulsed",
]
