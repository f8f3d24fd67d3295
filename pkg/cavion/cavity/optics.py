"""
Fiber Fabry-Perot Optics
Geometry, loss budget, transmission and Purcell enhancement of the
plano-concave fiber cavity. All functions are pure.
"""

import math
from dataclasses import dataclass

import numpy as np

from .. import config
from ..errors import InstabilityError, InvalidParameterError

PPM = 1e-6


@dataclass(frozen=True)
class CavityParams:
    """Geometry and loss budget of the fiber cavity."""
    roc_um: float = config.ROC_UM
    length_um: float = config.LENGTH_UM
    wavelength_nm: float = config.WAVELENGTH_NM
    t_fiber_ppm: float = config.T_FIBER_PPM
    t_flat_ppm: float = config.T_FLAT_PPM
    loss_ppm: float = config.EXCESS_LOSS_PPM
    antinode_offset_nm: float = config.ANTINODE_OFFSET_NM

    def __post_init__(self):
        for name in ("t_fiber_ppm", "t_flat_ppm", "loss_ppm"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if self.wavelength_nm <= 0:
            raise InvalidParameterError("wavelength_nm must be > 0")
        if self.length_um <= 0:
            raise InvalidParameterError("length_um must be > 0")
        if self.length_um >= self.roc_um:
            raise InstabilityError(
                f"unstable resonator: length {self.length_um} um >= radius {self.roc_um} um"
            )

    @property
    def wavelength_um(self) -> float:
        return self.wavelength_nm * 1e-3

    @property
    def frequency_hz(self) -> float:
        return config.SPEED_OF_LIGHT / (self.wavelength_nm * 1e-9)

    def total_loss_ppm(self, extra_loss_ppm: float = 0.0) -> float:
        return self.t_fiber_ppm + self.t_flat_ppm + self.loss_ppm + extra_loss_ppm


@dataclass(frozen=True)
class ModeGeometry:
    """Fundamental mode and resonance parameters."""
    waist_um: float
    mode_volume_um3: float
    fsr_hz: float
    finesse: float
    fwhm_hz: float
    q_factor: float

    def volume_in_cubic_wavelengths(self, wavelength_nm: float) -> float:
        return self.mode_volume_um3 / (wavelength_nm * 1e-3) ** 3


def _total_loss(t1_ppm: float, t2_ppm: float, loss_ppm: float) -> float:
    total = t1_ppm + t2_ppm + loss_ppm
    if not np.all(np.asarray(total) > 0):
        raise InvalidParameterError(f"total round-trip loss must be > 0, got {total} ppm")
    return total


def finesse_from_losses(t1_ppm: float, t2_ppm: float, loss_ppm: float) -> float:
    """F = 2 pi / total fractional round-trip loss."""
    return 2.0 * math.pi / (_total_loss(t1_ppm, t2_ppm, loss_ppm) * PPM)


def resonant_transmission(t1_ppm: float, t2_ppm: float, loss_ppm: float) -> float:
    """On-resonance transmission 4 t1 t2 / (t1 + t2 + loss)^2."""
    total = _total_loss(t1_ppm, t2_ppm, loss_ppm)
    return 4.0 * t1_ppm * t2_ppm / total**2


def escape_efficiency(t_fiber_ppm: float, t_flat_ppm: float, loss_ppm: float) -> float:
    """Fraction of intracavity loss leaving through the fiber mirror."""
    return t_fiber_ppm / _total_loss(t_fiber_ppm, t_flat_ppm, loss_ppm)


def mode_geometry(cavity: CavityParams, extra_loss_ppm: float = 0.0) -> ModeGeometry:
    """
    Gaussian-mode geometry of the plano-concave resonator.

    Args:
        cavity: cavity parameters (stability is checked on construction)
        extra_loss_ppm: additional round-trip loss, e.g. a nanoparticle in the mode

    Returns:
        ModeGeometry with fwhm = fsr / finesse and q = nu / fwhm
    """
    if cavity.length_um >= cavity.roc_um:
        raise InstabilityError("unstable resonator: length >= radius of curvature")
    if extra_loss_ppm < 0:
        raise InvalidParameterError("extra_loss_ppm must be >= 0")

    lam = cavity.wavelength_um
    length = cavity.length_um
    waist_sq = (lam / math.pi) * math.sqrt(length * (cavity.roc_um - length))
    volume = math.pi * waist_sq * length / 4.0

    fsr = config.SPEED_OF_LIGHT / (2.0 * length * 1e-6)
    finesse = finesse_from_losses(
        cavity.t_fiber_ppm, cavity.t_flat_ppm, cavity.loss_ppm + extra_loss_ppm
    )
    fwhm = fsr / finesse
    return ModeGeometry(
        waist_um=math.sqrt(waist_sq),
        mode_volume_um3=volume,
        fsr_hz=fsr,
        finesse=finesse,
        fwhm_hz=fwhm,
        q_factor=cavity.frequency_hz / fwhm,
    )


def purcell_factor(
    branching_ratio: float, wavelength_nm: float, q_factor: float, mode_volume_um3: float
) -> float:
    """Expected Purcell factor zeta (3 lambda^3 / 4 pi^2) (Q / V)."""
    if not 0 < branching_ratio <= 1:
        raise InvalidParameterError("branching_ratio must be in (0, 1]")
    for name, value in (
        ("wavelength_nm", wavelength_nm),
        ("q_factor", q_factor),
        ("mode_volume_um3", mode_volume_um3),
    ):
        if not value > 0:
            raise InvalidParameterError(f"{name} must be > 0")
    lam_um = wavelength_nm * 1e-3
    return branching_ratio * (3.0 * lam_um**3 / (4.0 * math.pi**2)) * (q_factor / mode_volume_um3)


def cavity_purcell(
    cavity: CavityParams,
    extra_loss_ppm: float = 0.0,
    branching_ratio: float = config.BRANCHING_RATIO,
) -> float:
    """Purcell factor of an optimally placed emitter in this cavity."""
    geometry = mode_geometry(cavity, extra_loss_ppm)
    return purcell_factor(
        branching_ratio, cavity.wavelength_nm, geometry.q_factor, geometry.mode_volume_um3
    )


def purcell_lifetime(natural_lifetime_s: float, c: float) -> float:
    """Cavity-enhanced lifetime T_nat / (1 + C)."""
    if not natural_lifetime_s > 0:
        raise InvalidParameterError("natural_lifetime_s must be > 0")
    if c < 0:
        raise InvalidParameterError("Purcell factor must be >= 0")
    return natural_lifetime_s / (1.0 + c)


def purcell_from_lifetime(natural_lifetime_s: float, lifetime_s: float) -> float:
    """Inverse of purcell_lifetime: C = T_nat / T - 1."""
    if not natural_lifetime_s > 0 or not lifetime_s > 0:
        raise InvalidParameterError("lifetimes must be > 0")
    return natural_lifetime_s / lifetime_s - 1.0
