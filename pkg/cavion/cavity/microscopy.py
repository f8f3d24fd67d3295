"""
Scattering-Loss Microscopy
Forward model of the transmission map seen while rastering the cavity mode
over nanoparticles on the flat mirror.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np

from ..errors import InvalidParameterError
from .optics import CavityParams, mode_geometry, resonant_transmission

try:
    from PIL import Image
    PIL_AVAILABLE = True
except ImportError:
    PIL_AVAILABLE = False

CSV_HEADER = "x_um,y_um,transmission"


@dataclass(frozen=True)
class Scatterer:
    """A particle on the mirror and the loss it adds when centered in the mode."""
    x_um: float
    y_um: float
    loss_ppm: float

    def __post_init__(self):
        if self.loss_ppm < 0:
            raise InvalidParameterError("scatterer loss_ppm must be >= 0")


@dataclass
class TransmissionMap:
    """Transmission over a grid; values[iy, ix]."""
    x_um: np.ndarray
    y_um: np.ndarray
    values: np.ndarray

    def rows(self) -> np.ndarray:
        """(n, 3) rows x, y, transmission; row-major with x fastest."""
        xx, yy = np.meshgrid(self.x_um, self.y_um)
        return np.column_stack([xx.ravel(), yy.ravel(), self.values.ravel()])

    def to_csv(self, path) -> Path:
        path = Path(path)
        np.savetxt(path, self.rows(), fmt="%.6g", delimiter=",", header=CSV_HEADER, comments="")
        return path

    def to_png(self, path) -> Path:
        """Grayscale image, 0 = lowest transmission in the map, 255 = highest."""
        if not PIL_AVAILABLE:
            raise RuntimeError("Pillow not installed. Run: pip install Pillow")
        lo, hi = float(self.values.min()), float(self.values.max())
        span = hi - lo if hi > lo else 1.0
        pixels = np.round(255.0 * (self.values - lo) / span).astype(np.uint8)
        path = Path(path)
        # flip so +y is up
        Image.fromarray(np.ascontiguousarray(pixels[::-1])).save(path)
        return path


def _axis(bounds: Tuple[float, float], step_um: float) -> np.ndarray:
    start, stop = bounds
    if step_um <= 0 or stop < start:
        raise InvalidParameterError("grid needs step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step_um + 1e-9)) + 1
    return start + step_um * np.arange(n)


def microscopy_map(
    scatterers: Sequence[Scatterer],
    cavity: CavityParams,
    x_range: Tuple[float, float],
    y_range: Tuple[float, float],
    step_um: float,
) -> TransmissionMap:
    """
    Resonant transmission at each mode position.

    Per pixel the added loss is sum_p loss_p exp(-2 d^2 / w0^2); the total loss
    then goes through the on-resonance transmission formula.
    """
    xs = _axis(x_range, step_um)
    ys = _axis(y_range, step_um)
    if xs.size == 0 or ys.size == 0:
        raise InvalidParameterError("microscopy grid is empty")

    waist = mode_geometry(cavity).waist_um
    xx, yy = np.meshgrid(xs, ys)
    extra = np.zeros_like(xx)
    for p in scatterers:
        d2 = (xx - p.x_um) ** 2 + (yy - p.y_um) ** 2
        extra += p.loss_ppm * np.exp(-2.0 * d2 / waist**2)

    values = resonant_transmission(cavity.t_fiber_ppm, cavity.t_flat_ppm, cavity.loss_ppm + extra)
    return TransmissionMap(x_um=xs, y_um=ys, values=values)

