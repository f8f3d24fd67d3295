"""
cavion Ensemble Package
Stochastic nanoparticles and their erbium ions.
"""

from .particles import (
    ParticleSpec, Ion, Nanoparticle, IonCountReport,
    sample_nanoparticle, sample_ions, spectral_density, ion_count_report,
    volume_um3, rayleigh_loss_ppm,
)
from .zeeman import ZeemanLine, apply_zeeman
from .diffusion import diffuse_step, ou_path, ou_update
from .storage import ENSEMBLE_VERSION, particle_to_dict, particle_from_dict, save_particle, load_particle

__all__ = [
    "ParticleSpec", "Ion", "Nanoparticle", "IonCountReport",
    "sample_nanoparticle", "sample_ions", "spectral_density", "ion_count_report",
    "volume_um3", "rayleigh_loss_ppm",
    "ZeemanLine", "apply_zeeman",
    "diffuse_step", "ou_path", "ou_update",
    "ENSEMBLE_VERSION", "particle_to_dict", "particle_from_dict", "save_particle", "load_particle",
]
