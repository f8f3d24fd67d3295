"""
cavion Cavity Package
Deterministic optics of the fiber Fabry-Perot cavity.
"""

from .optics import (
    CavityParams, ModeGeometry,
    finesse_from_losses, resonant_transmission, escape_efficiency, mode_geometry,
    purcell_factor, cavity_purcell, purcell_lifetime, purcell_from_lifetime,
)
from .coupling import local_coupling, intracavity_photon_number, PurcellReport, expected_purcell_report
from .microscopy import Scatterer, TransmissionMap, microscopy_map

__all__ = [
    "CavityParams", "ModeGeometry",
    "finesse_from_losses", "resonant_transmission", "escape_efficiency", "mode_geometry",
    "purcell_factor", "cavity_purcell", "purcell_lifetime", "purcell_from_lifetime",
    "local_coupling", "intracavity_photon_number", "PurcellReport", "expected_purcell_report",
    "Scatterer", "TransmissionMap", "microscopy_map",
]
