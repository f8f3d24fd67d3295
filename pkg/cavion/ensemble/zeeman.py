"""
Zeeman Splitting
Two-line effective model of a Kramers ion in a magnetic field.
"""

from dataclasses import dataclass
from typing import Tuple

from .. import config
from ..errors import InvalidParameterError
from .particles import Ion


@dataclass(frozen=True)
class ZeemanLine:
    freq_hz: float
    relative_strength: float
    fwhm_hz: float

    def __post_init__(self):
        if not 0.0 < self.relative_strength <= 1.0:
            raise InvalidParameterError("relative_strength must be in (0, 1]")
        if not self.fwhm_hz > 0:
            raise InvalidParameterError("fwhm_hz must be > 0")


def apply_zeeman(
    ion: Ion, b_field_mt: float, narrowing: float = config.ZEEMAN_NARROWING
) -> Tuple[ZeemanLine, ZeemanLine]:
    """
    Split the ion's line into two components at center +/- slope B / 2.

    A field of opposite sign swaps the two lines. Each line is narrowed to
    `narrowing` times the zero-field width once a field is applied.
    """
    if not 0.0 < narrowing <= 1.0:
        raise InvalidParameterError("narrowing must be in (0, 1]")
    half_split = 0.5 * ion.zeeman_slope_hz_per_mt * b_field_mt
    width = ion.hom_fwhm_hz * (narrowing if b_field_mt != 0 else 1.0)
    return (
        ZeemanLine(ion.center_freq_hz + half_split, 0.5, width),
        ZeemanLine(ion.center_freq_hz - half_split, 0.5, width),
    )
