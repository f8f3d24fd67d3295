"""
Scenario Presets
Ready-made scenarios for the reference experiments: the resolved single ion,
the Purcell-enhanced decay ensemble and a fully sampled nanoparticle.
"""

import math
from dataclasses import replace

import numpy as np

from .. import config
from ..cavity import CavityParams, cavity_purcell, purcell_from_lifetime
from ..ensemble import Ion, Nanoparticle, ParticleSpec, rayleigh_loss_ppm, sample_nanoparticle
from ..errors import InvalidParameterError
from .engine import DetectionChain, ProtocolTiming, Scenario

REFERENCE_DIAMETER_NM = config.SCATTERER_REFERENCE_DIAMETER_NM
# S = 3.195 puts the g2 single ion at 4.76e-3 detections per trial
G2_POWER_W = 34.2e-12
DECAY_POWER_W = 1.0e-9
DECAY_IONS = 20


def _antinode_ion(cavity: CavityParams, particle_height_nm: float, coupling: float,
                  freq_hz: float, width_hz: float, lateral_nm: float = 0.0) -> Ion:
    """An ion on the field antinode whose dipole angle sets the requested coupling."""
    if not 0.0 < coupling <= 1.0:
        raise InvalidParameterError(f"requested coupling {coupling:.3g} exceeds the cavity maximum")
    z_nm = cavity.antinode_offset_nm - particle_height_nm
    return Ion(
        position_nm=(lateral_nm, 0.0, z_nm),
        center_freq_hz=freq_hz,
        hom_fwhm_hz=width_hz,
        dipole_polar_angle=math.acos(math.sqrt(coupling)),
    )


def _particle_with_lifetime(cavity: CavityParams, lifetime_s: float, n_ions: int,
                            width_hz: float) -> Nanoparticle:
    loss = rayleigh_loss_ppm(REFERENCE_DIAMETER_NM)
    c_xi = purcell_from_lifetime(config.NATURAL_LIFETIME_S, lifetime_s)
    coupling = c_xi / cavity_purcell(cavity, loss)
    height = REFERENCE_DIAMETER_NM / 2.0
    ions = [
        _antinode_ion(cavity, height, coupling, config.INHOM_CENTER_HZ, width_hz)
        for _ in range(n_ions)
    ]
    return Nanoparticle(diameter_nm=REFERENCE_DIAMETER_NM, ions=ions, scatter_loss_ppm=loss)


def single_ion_scenario(detector: str = "paper", power_w: float = config.SINGLE_ION_PSAT_W,
                        cavity: CavityParams = None, **overrides) -> Scenario:
    """
    The resolved single ion: lifetime 350 us, zero-power width 2.20 MHz,
    P_sat 10.7 pW, steady-state excitation.
    """
    cavity = cavity or CavityParams()
    particle = _particle_with_lifetime(cavity, config.SINGLE_ION_LIFETIME_S, 1, config.SINGLE_ION_WIDTH_HZ)
    scenario = Scenario(
        cavity=cavity,
        particle=particle,
        timing=ProtocolTiming(steady_state=True),
        chain=DetectionChain.from_preset(detector),
        excitation_power_w=power_w,
        excitation_freq_hz=config.INHOM_CENTER_HZ,
        p_sat_w=config.SINGLE_ION_PSAT_W,
    )
    return replace(scenario, **overrides) if overrides else scenario


def g2_scenario(cavity: CavityParams = None, **overrides) -> Scenario:
    """Single ion with the g2 detector (50 %, 1.4 Hz dark)."""
    return single_ion_scenario("g2-paper", G2_POWER_W, cavity, **overrides)


def decay_scenario(n_ions: int = DECAY_IONS, cavity: CavityParams = None, **overrides) -> Scenario:
    """A small ensemble of well-coupled ions with an 88.7 us Purcell lifetime."""
    cavity = cavity or CavityParams()
    particle = _particle_with_lifetime(cavity, config.ENSEMBLE_LIFETIME_S, n_ions, config.SINGLE_ION_WIDTH_HZ)
    scenario = Scenario(
        cavity=cavity,
        particle=particle,
        timing=ProtocolTiming(steady_state=True),
        chain=DetectionChain.from_preset("paper"),
        excitation_power_w=DECAY_POWER_W,
        p_sat_w=config.SINGLE_ION_PSAT_W,
    )
    return replace(scenario, **overrides) if overrides else scenario


def particle_scenario(seed: int, spec: ParticleSpec = None, cavity: CavityParams = None,
                      **overrides) -> Scenario:
    """A sampled nanoparticle (170 nm by default) centered in the mode."""
    spec = spec or ParticleSpec(diameter_mean_nm=REFERENCE_DIAMETER_NM, diameter_sd_nm=0.0)
    particle = sample_nanoparticle(spec, seed)
    scenario = Scenario(
        cavity=cavity or CavityParams(),
        particle=particle,
        timing=ProtocolTiming(steady_state=True),
        chain=DetectionChain.from_preset("paper"),
        excitation_power_w=config.SINGLE_ION_PSAT_W,
        p_sat_w=config.SINGLE_ION_PSAT_W,
    )
    return replace(scenario, **overrides) if overrides else scenario


def inhomogeneous_grid(particle: Nanoparticle, n_points: int = 41, span_fwhm: float = 1.5) -> np.ndarray:
    """Frequency grid over +/- span_fwhm inhomogeneous FWHM around the line center."""
    half = span_fwhm * particle.inhom_fwhm_hz
    return particle.inhom_center_hz + np.linspace(-half, half, n_points)
