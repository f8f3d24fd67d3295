"""
Pulsed g2
Second-order correlation of per-trial photon numbers from a single detector.

g2(0) is the factorial moment <n(n-1)> / <n>^2 over kept trials; g2(k) pairs
trials k apart when both were kept. Lags are in trial units, so lag k is a
delay of k / rep_rate.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidParameterError, UndefinedEstimateError
from ..photodynamics.timetags import SIGNAL_CHANNEL, TimeTagStream
from ..rng import Stream, check_seed, substream

G2_VERSION = 1
FAR_LAG_START = 10
BOOTSTRAP_RESAMPLES = 1000


@dataclass
class G2Series:
    lags: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    n_trials: int = 0
    mean_counts: float = float("nan")
    normalize: str = "mean"
    method: str = "propagation"
    rep_rate_hz: float = None

    def at(self, lag: int):
        """(value, error) at a lag."""
        i = int(np.flatnonzero(self.lags == lag)[0])
        return float(self.values[i]), float(self.errors[i])

    @property
    def delays_s(self) -> np.ndarray:
        if not self.rep_rate_hz:
            raise InvalidParameterError("rep_rate_hz unknown for this series")
        return self.lags / self.rep_rate_hz

    def to_dict(self) -> dict:
        value, error = self.at(0)
        return {
            "version": G2_VERSION,
            "g2_zero": {"value": value, "error": error},
            "lags": self.lags.tolist(),
            "values": self.values.tolist(),
            "errors": self.errors.tolist(),
            "n_trials": self.n_trials,
            "mean_counts": self.mean_counts,
            "normalize": self.normalize,
            "method": self.method,
            "rep_rate_hz": self.rep_rate_hz,
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path

    def to_csv(self, path) -> Path:
        path = Path(path)
        np.savetxt(path, np.column_stack([self.lags, self.values, self.errors]), delimiter=",",
                   header="lag,g2,err", comments="", fmt=["%d", "%.17g", "%.17g"])
        return path

    @classmethod
    def from_csv(cls, path) -> "G2Series":
        data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
        return cls(lags=data[:, 0].astype(np.int64), values=data[:, 1], errors=data[:, 2])


def _lag_products(counts: np.ndarray, kept: np.ndarray, max_lag: int):
    """Coincidence sums and valid-pair counts for lags 0..max_lag."""
    n = counts[kept]
    sums = np.empty(max_lag + 1)
    pairs = np.empty(max_lag + 1)
    sums[0] = float(np.sum(n * (n - 1)))
    pairs[0] = n.size
    for k in range(1, max_lag + 1):
        valid = kept[:-k] & kept[k:]
        sums[k] = float(np.sum(counts[:-k][valid] * counts[k:][valid]))
        pairs[k] = float(valid.sum())
    return sums, pairs


def _bootstrap_errors(counts, kept, max_lag, n_resamples, seed, chunk: int = 50):
    """
    Poisson-weight bootstrap over kept trials.

    Only trials with counts carry explicit weights; the weight total of the
    empty trials is drawn as one Poisson sum and pair denominators are scaled
    from it by the valid-pair fraction.
    """
    rng = substream(check_seed(seed), Stream.BOOTSTRAP)
    n_kept = int(kept.sum())
    nz = np.flatnonzero((counts > 0) & kept)
    n_nz = counts[nz].astype(float)
    _, pairs = _lag_products(counts, kept, max_lag)

    # coincident nonzero trials per lag: (column of the earlier trial, product)
    lag_terms = []
    for k in range(1, max_lag + 1):
        partner = np.minimum(np.searchsorted(nz, nz + k), max(nz.size - 1, 0))
        cols = np.flatnonzero(nz[partner] == nz + k) if nz.size else np.zeros(0, dtype=np.int64)
        lag_terms.append((cols, n_nz[cols] * n_nz[partner[cols]]))

    samples = []
    for start in range(0, n_resamples, chunk):
        size = min(chunk, n_resamples - start)
        weights = rng.poisson(1.0, size=(size, nz.size)).astype(float)
        total = np.maximum(weights.sum(axis=1) + rng.poisson(n_kept - nz.size, size=size), 1.0)
        mean = weights @ n_nz / total
        values = np.empty((size, max_lag + 1))
        values[:, 0] = weights @ (n_nz * (n_nz - 1)) / total
        for k, (cols, prods) in enumerate(lag_terms, start=1):
            values[:, k] = weights[:, cols] @ prods / np.maximum(total * pairs[k] / n_kept, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            samples.append(values / mean[:, None] ** 2)
    g = np.concatenate(samples)
    g = g[np.all(np.isfinite(g), axis=1)]
    return g.std(axis=0, ddof=1)


def g2_from_counts(counts, kept=None, max_lag: int = 50, normalize: str = "mean",
                   errors: str = "propagation", n_resamples: int = BOOTSTRAP_RESAMPLES,
                   seed: int = 0) -> G2Series:
    """g2 over lags -max_lag..max_lag from per-trial counts and a kept-trial mask."""
    counts = np.asarray(counts, dtype=np.int64)
    kept = np.ones(counts.size, dtype=bool) if kept is None else np.asarray(kept, dtype=bool)
    if max_lag < 1:
        raise InvalidParameterError("max_lag must be >= 1")
    if normalize not in ("mean", "far_lags"):
        raise InvalidParameterError("normalize must be 'mean' or 'far_lags'")
    if errors not in ("propagation", "bootstrap"):
        raise InvalidParameterError("errors must be 'propagation' or 'bootstrap'")
    if normalize == "far_lags" and max_lag < FAR_LAG_START:
        raise InvalidParameterError(f"far-lag normalization needs max_lag >= {FAR_LAG_START}")
    if counts.size <= max_lag:
        raise InvalidParameterError("fewer trials than max_lag")

    n_kept = int(kept.sum())
    total = int(counts[kept].sum())
    if total == 0:
        raise UndefinedEstimateError("no detections: <n> = 0")
    mean = total / n_kept

    sums, pairs = _lag_products(counts, kept, max_lag)
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(pairs > 0, sums / np.maximum(pairs, 1.0), np.nan)
    norm = mean**2
    if normalize == "far_lags":
        norm = float(np.nanmean(raw[FAR_LAG_START:]))
        if not norm > 0:
            raise UndefinedEstimateError("no coincidences at far lags")
    values = raw / norm

    if errors == "bootstrap":
        errs = _bootstrap_errors(counts, kept, max_lag, n_resamples, seed)
        if normalize == "far_lags":
            errs = errs * mean**2 / norm
    else:
        # Poisson coincidence count (floor one) and the squared mean
        coincidence = np.sqrt(np.maximum(sums, 1.0)) / (np.maximum(pairs, 1.0) * norm)
        errs = np.sqrt(coincidence**2 + (2.0 * values) ** 2 / total)

    lags = np.arange(-max_lag, max_lag + 1)
    mirror = np.abs(lags)
    return G2Series(
        lags=lags,
        values=values[mirror],
        errors=errs[mirror],
        n_trials=int(counts.size),
        mean_counts=mean,
        normalize=normalize,
        method=errors,
    )


def g2_pulsed(stream: TimeTagStream, timing=None, max_lag: int = 50, normalize: str = "mean",
              errors: str = "propagation", n_resamples: int = BOOTSTRAP_RESAMPLES,
              seed: int = 0) -> G2Series:
    """
    Pulsed g2 of the signal channel.

    Args:
        stream: time tags; duty-cycle-dropped trials are excluded
        timing: ProtocolTiming, used to attach the repetition rate
        max_lag: largest trial lag (>= 1)
        normalize: 'mean' divides by <n>^2, 'far_lags' by the mean over 10 <= |k| <= max_lag
        errors: 'propagation' or 'bootstrap' (n_resamples Poisson-weight resamples, seeded)

    Raises:
        UndefinedEstimateError: no signal detections
    """
    if stream.n_trials == 0 or len(stream) == 0:
        raise UndefinedEstimateError("empty stream")
    series = g2_from_counts(
        stream.counts_per_trial(SIGNAL_CHANNEL), stream.kept_mask(), max_lag,
        normalize, errors, n_resamples, seed,
    )
    if timing is not None:
        series.rep_rate_hz = timing.rep_rate_hz
    return series


def g2_background_prediction(p_signal: float, mu_dark: float) -> float:
    """
    Expected g2(0) of a perfect single emitter plus Poisson background.

    With s in {0, 1} (probability p) and d ~ Poisson(mu):
    <n(n-1)> = 2 p mu + mu^2 and <n> = p + mu, so g2(0) = 1 - rho^2, rho = p / (p + mu).
    """
    if not 0.0 <= p_signal <= 1.0:
        raise InvalidParameterError("p_signal must be in [0, 1]")
    if mu_dark < 0:
        raise InvalidParameterError("mu_dark must be >= 0")
    if p_signal == 0 and mu_dark == 0:
        raise UndefinedEstimateError("g2 undefined without signal or background")
    rho = p_signal / (p_signal + mu_dark)
    return 1.0 - rho**2


def simulate_g2_background(p_signal: float, mu_dark: float, n_trials: int, seed: int,
                           max_lag: int = 1) -> G2Series:
    """Monte Carlo of independent trials: Bernoulli signal plus Poisson background."""
    if n_trials <= max_lag:
        raise InvalidParameterError("n_trials must exceed max_lag")
    rng = substream(check_seed(seed), Stream.SAMPLE, 1)
    counts = (rng.random(n_trials) < p_signal).astype(np.int64) + rng.poisson(mu_dark, n_trials)
    return g2_from_counts(counts, max_lag=max_lag)
