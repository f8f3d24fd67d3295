"""
Spectra and Histograms
Aggregate observables built from time-tag streams: decay histograms,
excitation scans and saturation series, each with a CSV writer.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np

from .. import console
from ..ensemble import apply_zeeman
from ..errors import InvalidParameterError
from ..rng import Stream, check_seed, derive_seed
from .engine import Scenario, run_sequence
from .timetags import SIGNAL_CHANNEL, TimeTagStream

CSV_FORMAT = "%.17g"


def _write_csv(path, header: str, columns) -> Path:
    path = Path(path)
    np.savetxt(path, np.column_stack(columns), delimiter=",", header=header, comments="", fmt=CSV_FORMAT)
    return path


def binomial_error(counts, trials):
    """Binomial sd of counts / trials with a floor of one count."""
    counts = np.asarray(counts, dtype=float)
    trials = np.asarray(trials, dtype=float)
    p = np.minimum(np.maximum(counts, 1.0), trials - 1.0) / trials
    return np.sqrt(p * (1.0 - p) / trials)


# =============================================================================
# DECAY HISTOGRAM
# =============================================================================

@dataclass
class Histogram:
    centers_us: np.ndarray
    counts: np.ndarray
    bin_us: float

    def to_csv(self, path) -> Path:
        return _write_csv(path, "time_us,counts", (self.centers_us, self.counts))


def decay_histogram(stream: TimeTagStream, bin_us: float, window_us: float) -> Histogram:
    """Channel-0 arrival times binned over the detection window, all trials summed."""
    if not bin_us > 0 or not window_us > 0:
        raise InvalidParameterError("bin_us and window_us must be > 0")
    n_bins = window_us / bin_us
    if abs(n_bins - round(n_bins)) > 1e-9 * n_bins:
        raise InvalidParameterError(f"bin {bin_us} us does not divide window {window_us} us")
    n_bins = int(round(n_bins))

    bin_ps = bin_us * 1e6
    times = stream.channel(SIGNAL_CHANNEL)["time_ps"].astype(np.float64)
    index = np.floor(times / bin_ps).astype(np.int64)
    index = index[(index >= 0) & (index < n_bins)]
    counts = np.bincount(index, minlength=n_bins)
    centers = (np.arange(n_bins) + 0.5) * bin_us
    return Histogram(centers_us=centers, counts=counts, bin_us=bin_us)


# =============================================================================
# EXCITATION SCANS
# =============================================================================

@dataclass
class SpectrumScan:
    """Detection probability per kept trial against laser frequency."""
    freq_hz: np.ndarray
    p_det: np.ndarray
    err: np.ndarray
    counts: np.ndarray = None
    trials: np.ndarray = None

    def __len__(self) -> int:
        return int(np.size(self.freq_hz))

    def to_csv(self, path) -> Path:
        return _write_csv(path, "freq_hz,p_det,err,counts,kept_trials",
                          (self.freq_hz, self.p_det, self.err, self.counts, self.trials))

    @classmethod
    def from_csv(cls, path) -> "SpectrumScan":
        data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
        counts = data[:, 3] if data.shape[1] > 3 else None
        trials = data[:, 4] if data.shape[1] > 4 else None
        return cls(freq_hz=data[:, 0], p_det=data[:, 1], err=data[:, 2], counts=counts, trials=trials)


def scan_excitation(scenario: Scenario, freq_grid_hz, trials_per_point: int, seed: int,
                    threads: int = None) -> SpectrumScan:
    """
    Step the laser over freq_grid_hz and measure channel-0 counts per kept trial.

    Point i uses the derived seed (seed, POINTS, i) so points are independent
    and individually reproducible.
    """
    grid = np.atleast_1d(np.asarray(freq_grid_hz, dtype=float))
    if grid.size == 0:
        raise InvalidParameterError("frequency grid is empty")
    seed = check_seed(seed)

    counts = np.zeros(grid.size)
    kept = np.zeros(grid.size)
    for i, freq in enumerate(grid):
        stream = run_sequence(
            scenario.with_(excitation_freq_hz=float(freq)),
            trials_per_point,
            derive_seed(seed, Stream.POINTS, i),
            threads=threads,
            progress=False,
        )
        counts[i] = stream.signal_count()
        kept[i] = stream.n_kept
    if np.any(kept == 0):
        raise InvalidParameterError("a scan point kept no trials; raise trials_per_point")
    return SpectrumScan(freq_hz=grid, p_det=counts / kept, err=binomial_error(counts, kept),
                        counts=counts, trials=kept)


def default_scan_grid(scenario: Scenario, n_points: int = 21, span_widths: float = 2.5) -> np.ndarray:
    """
    Grid around the reference ion: +/- span_widths power-broadened FWHM about
    each of its lines (one line without field, the Zeeman pair with one).
    """
    ion = scenario.ref_ion
    saturation = scenario.excitation_power_w / scenario.p_sat_w
    lines = apply_zeeman(ion, scenario.b_field_mt)
    width = lines[0].fwhm_hz * math.sqrt(1.0 + saturation)
    offsets = np.linspace(-span_widths * width, span_widths * width, n_points)
    return np.unique(np.concatenate([line.freq_hz + offsets for line in lines]))


# =============================================================================
# SATURATION SERIES
# =============================================================================

@dataclass
class SaturationPoint:
    power_w: float
    p_det: float
    p_det_err: float
    fwhm_hz: float
    fwhm_err_hz: float
    converged: bool


@dataclass
class SaturationSeries:
    points: List[SaturationPoint] = field(default_factory=list)
    scans: List[SpectrumScan] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points], dtype=float)

    def to_csv(self, path) -> Path:
        return _write_csv(
            path, "power_w,p_det,p_det_err,fwhm_hz,fwhm_err_hz",
            [self.column(c) for c in ("power_w", "p_det", "p_det_err", "fwhm_hz", "fwhm_err_hz")],
        )

    @classmethod
    def from_csv(cls, path) -> "SaturationSeries":
        data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
        return cls(points=[SaturationPoint(*row[:5], converged=True) for row in data])


def saturation_series(scenario: Scenario, power_grid_w, trials_per_point: int, seed: int,
                      n_points: int = 21, threads: int = None) -> SaturationSeries:
    """
    One excitation scan per power; each scan is fitted with a Lorentzian.

    p_det is the fitted peak height above background, the linewidth the fitted
    FWHM. Scan k uses the derived seed (seed, POINTS, 10^6 + k).
    """
    from ..estimators import fit_lorentzian

    powers = np.atleast_1d(np.asarray(power_grid_w, dtype=float))
    if powers.size == 0 or np.any(powers <= 0):
        raise InvalidParameterError("power grid must be nonempty and positive")
    seed = check_seed(seed)

    series = SaturationSeries()
    for k, power in enumerate(powers):
        point_scenario = scenario.with_(excitation_power_w=float(power))
        grid = default_scan_grid(point_scenario, n_points)
        scan = scan_excitation(point_scenario, grid, trials_per_point,
                               derive_seed(seed, Stream.POINTS, 10**6 + k), threads=threads)
        fit = fit_lorentzian(scan, n_peaks=1)
        if not fit.converged:
            console.warn(f"Lorentzian fit did not converge at {power:.3g} W")
        series.points.append(SaturationPoint(
            power_w=float(power),
            p_det=fit.value("amplitude"),
            p_det_err=fit.error("amplitude"),
            fwhm_hz=fit.value("fwhm"),
            fwhm_err_hz=fit.error("fwhm"),
            converged=fit.converged,
        ))
        series.scans.append(scan)
    return series
