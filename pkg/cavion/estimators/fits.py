"""
Curve Fits
Decay, Lorentzian, Gaussian and saturation fits on histograms and scans.

Initial values follow fixed heuristics so every fit is reproducible:
  decay       offset = mean of the last tenth of bins, lifetime from a log-linear fit
  lorentzian  offset = min(y), center = argmax, FWHM = span of the points above half maximum
  gaussian    as lorentzian
  saturation  weighted linearizations (1/p against 1/P, FWHM^2 against P)
Frequencies are fitted relative to the grid mean; centers are reported absolute.
"""

from typing import Tuple

import numpy as np

from .. import console
from ..errors import FitInputError
from .leastsq import FitResult, fit_least_squares
from .models import DOUBLE_LORENTZIAN, EXP_DECAY, GAUSSIAN, LORENTZIAN, SATURATION_LINEWIDTH, SATURATION_RATE


def _columns(data) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x, y, sigma) from a scan, histogram-like object or a 3-column array."""
    if hasattr(data, "freq_hz"):
        return (np.asarray(data.freq_hz, float), np.asarray(data.p_det, float), np.asarray(data.err, float))
    if hasattr(data, "points"):
        return (data.column("power_w"), data.column("p_det"), data.column("p_det_err"))
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or 3 not in arr.shape:
        raise FitInputError("expected (x, y, sigma) triples")
    if arr.shape[1] != 3:
        arr = arr.T
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _shift_center(fit: FitResult, names, ref: float) -> FitResult:
    for name in names:
        fit.params[fit.param_names.index(name)] += ref
    # widths enter squared
    for i, name in enumerate(fit.param_names):
        if name.startswith("fwhm"):
            fit.params[i] = abs(fit.params[i])
    return fit


def _usable_points(p, y, sigma, label: str):
    """Drop points whose value or error is not finite (failed per-scan fits)."""
    good = np.isfinite(p) & np.isfinite(y) & np.isfinite(sigma) & (sigma > 0)
    if not good.all():
        console.warn(f"{label}: ignoring {int((~good).sum())} points without a finite value and error")
    return p[good], y[good], sigma[good]


# =============================================================================
# DECAY
# =============================================================================

def fit_exponential_decay(histogram) -> FitResult:
    """
    Fit a exp(-t / T) + b to a decay histogram; lifetime in the histogram's time unit.

    Raises:
        FitInputError: fewer than 3 nonzero bins (including the all-zero histogram)
    """
    t = np.asarray(histogram.centers_us, dtype=float)
    counts = np.asarray(histogram.counts, dtype=float)
    if np.count_nonzero(counts) < 3:
        raise FitInputError("decay fit needs at least 3 nonzero bins")
    sigma = np.sqrt(np.maximum(counts, 1.0))

    tail = max(1, counts.size // 10)
    offset = float(counts[-tail:].mean())
    excess = counts - offset
    usable = excess > 0
    lifetime = (t[-1] - t[0]) / 3.0
    if usable.sum() >= 2:
        slope, _ = np.polyfit(t[usable], np.log(excess[usable]), 1, w=np.sqrt(excess[usable]))
        if slope < 0:
            lifetime = -1.0 / slope
    amplitude = max(float(excess[0]) * np.exp(t[0] / lifetime), 1.0)

    fit = fit_least_squares(EXP_DECAY, t, counts, sigma, [amplitude, lifetime, offset])
    if not fit.converged:
        console.warn(f"decay fit did not converge ({fit.message})")
    return fit


# =============================================================================
# LINE SHAPES
# =============================================================================

def _peak_guess(x: np.ndarray, y: np.ndarray, offset: float, mask=None):
    """(amplitude, center, fwhm) around the highest point not excluded by mask."""
    candidates = np.where(mask, -np.inf, y) if mask is not None else y
    i = int(np.argmax(candidates))
    amplitude = float(y[i] - offset)
    distinct = np.unique(x)
    step = float(np.min(np.diff(distinct))) if distinct.size > 1 else 1.0
    half = offset + 0.5 * amplitude
    lo = i
    while lo > 0 and y[lo - 1] >= half and (mask is None or not mask[lo - 1]):
        lo -= 1
    hi = i
    while hi < x.size - 1 and y[hi + 1] >= half and (mask is None or not mask[hi + 1]):
        hi += 1
    fwhm = max(float(x[hi] - x[lo]), step)
    return amplitude, float(x[i]), fwhm


def _sorted_scan(scan):
    x, y, sigma = _columns(scan)
    if np.unique(x).size < 2:
        raise FitInputError("a line shape needs at least two distinct frequencies")
    order = np.argsort(x)
    return x[order], y[order], sigma[order]


def fit_lorentzian(scan, n_peaks: int = 1) -> FitResult:
    """
    Single or double Lorentzian on a constant background.

    With n_peaks = 2 the result also carries `splitting` = |c2 - c1|. When no
    second peak stands out of the data the single-peak fit is returned in
    double form: both lines at the same center with half the amplitude each
    and splitting 0.
    """
    if n_peaks not in (1, 2):
        raise FitInputError("n_peaks must be 1 or 2")
    x, y, sigma = _sorted_scan(scan)
    need = 4 + 3 * (n_peaks - 1)
    if x.size < need:
        raise FitInputError(f"{n_peaks}-peak Lorentzian needs at least {need} points")

    ref = float(x.mean())
    xs = x - ref
    offset = float(y.min())
    amp1, c1, w1 = _peak_guess(xs, y, offset)

    if n_peaks == 1:
        fit = fit_least_squares(LORENTZIAN, xs, y, sigma, [amp1, c1, w1, offset])
        return _shift_center(fit, ("center",), ref)

    # second peak: highest point away from the first line
    away = np.abs(xs - c1) <= 1.5 * w1
    second = None
    if not away.all():
        amp2, c2, w2 = _peak_guess(xs, y, offset, mask=away)
        noise = float(np.median(sigma))
        if amp2 > max(0.25 * amp1, 3.0 * noise):
            second = (amp2, c2, w2)

    if second is None:
        return _as_double(fit_lorentzian(scan, n_peaks=1))

    fit = fit_least_squares(DOUBLE_LORENTZIAN, xs, y, sigma, [amp1, c1, w1, *second, offset])
    fit = _shift_center(fit, ("center1", "center2"), ref)
    c1_i, c2_i = fit.param_names.index("center1"), fit.param_names.index("center2")
    cov = fit.covariance
    var = cov[c1_i, c1_i] + cov[c2_i, c2_i] - 2.0 * cov[c1_i, c2_i]
    fit.derived["splitting"] = (
        abs(float(fit.params[c2_i] - fit.params[c1_i])),
        float(np.sqrt(var)) if var >= 0 else float("nan"),
    )
    return fit


def _as_double(single: FitResult) -> FitResult:
    """Express a single-Lorentzian result in double-Lorentzian parameters."""
    a, c, w, o = single.params
    # linear map from (A, c, w, o) to the seven double parameters
    m = np.zeros((7, 4))
    m[0, 0] = m[3, 0] = 0.5
    m[1, 1] = m[4, 1] = 1.0
    m[2, 2] = m[5, 2] = 1.0
    m[6, 3] = 1.0
    return FitResult(
        model=DOUBLE_LORENTZIAN.name,
        param_names=DOUBLE_LORENTZIAN.param_names,
        params=np.array([0.5 * a, c, w, 0.5 * a, c, w, o]),
        covariance=m @ single.covariance @ m.T,
        residual_norm=single.residual_norm,
        iterations=single.iterations,
        converged=single.converged,
        chi2=single.chi2,
        dof=single.dof,
        p_value=single.p_value,
        message=single.message,
        derived={"splitting": (0.0, 0.0)},
        flags=single.flags + ["single_peak"],
    )


def fit_gaussian(scan) -> FitResult:
    """Gaussian envelope of a wide (inhomogeneous) scan."""
    x, y, sigma = _sorted_scan(scan)
    if x.size < 4:
        raise FitInputError("Gaussian needs at least 4 points")
    ref = float(x.mean())
    xs = x - ref
    offset = float(y.min())
    amplitude, center, fwhm = _peak_guess(xs, y, offset)
    fit = fit_least_squares(GAUSSIAN, xs, y, sigma, [amplitude, center, fwhm, offset])
    return _shift_center(fit, ("center",), ref)


# =============================================================================
# SATURATION
# =============================================================================

def _linear_init(u, v, weights):
    """Weighted straight line v = a + b u; None when it cannot be formed."""
    if u.size < 2 or np.ptp(u) == 0:
        return None
    b, a = np.polyfit(u, v, 1, w=weights)
    return a, b


def _flag_span(fit: FitResult, powers: np.ndarray, label: str) -> FitResult:
    p_sat = fit.value("p_sat")
    if not (powers.min() < p_sat < powers.max()):
        fit.flags.append("degenerate")
        console.warn(f"{label}: powers do not span the fitted P_sat ({p_sat:.3g} W); fit is degenerate")
    return fit


def fit_saturation_rate(points) -> FitResult:
    """p_max (P / P_sat) / (1 + P / P_sat) on (P, p_det, sigma) points."""
    p, y, sigma = _columns(points)
    p, y, sigma = _usable_points(p, y, sigma, "saturation rate")
    if p.size < 3:
        raise FitInputError("saturation fit needs at least 3 powers")
    if np.any(p <= 0):
        raise FitInputError("powers must be > 0")

    p_max, p_sat = float(y.max()), float(np.median(p))
    good = y > 0
    line = _linear_init(1.0 / p[good], 1.0 / y[good], y[good] ** 2 / sigma[good])
    if line is not None and line[0] > 0 and line[1] > 0:
        p_max = 1.0 / line[0]
        p_sat = line[1] * p_max

    fit = fit_least_squares(SATURATION_RATE, p, y, sigma, [p_max, p_sat])
    return _flag_span(fit, p, "saturation rate")


def fit_saturation_linewidth(points) -> FitResult:
    """linewidth0 sqrt(1 + P / P_sat) on (P, FWHM, sigma) points."""
    if hasattr(points, "points"):
        p, y, sigma = (points.column("power_w"), points.column("fwhm_hz"), points.column("fwhm_err_hz"))
    else:
        p, y, sigma = _columns(points)
    p, y, sigma = _usable_points(p, y, sigma, "saturation linewidth")
    if p.size < 3:
        raise FitInputError("linewidth fit needs at least 3 powers")
    if np.any(p < 0):
        raise FitInputError("powers must be >= 0")

    width0, p_sat = float(y.min()), float(np.median(p[p > 0])) if np.any(p > 0) else 1.0
    line = _linear_init(p, y**2, 1.0 / (2.0 * y * sigma))
    if line is not None and line[0] > 0 and line[1] > 0:
        width0 = float(np.sqrt(line[0]))
        p_sat = line[0] / line[1]

    fit = fit_least_squares(SATURATION_LINEWIDTH, p, y, sigma, [width0, p_sat])
    return _flag_span(fit, p, "saturation linewidth")
