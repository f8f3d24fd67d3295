"""
Spectral Diffusion
Ornstein-Uhlenbeck wandering of an ion's center frequency, advanced with the
exact discretization so any step size is valid.
"""

import numpy as np

from ..errors import InvalidParameterError
from ..rng import as_generator
from .particles import Ion


def ou_update(mean, current, sigma, tau, dt_s: float, noise):
    """nu <- mu + (nu - mu) e^(-dt/tau) + noise sigma sqrt(1 - e^(-2 dt/tau))."""
    decay = np.exp(-dt_s / np.asarray(tau, dtype=float))
    spread = np.asarray(sigma, dtype=float) * np.sqrt(1.0 - decay**2)
    return mean + (current - mean) * decay + noise * spread


def diffuse_step(ion: Ion, dt_s: float, rng, freq_hz: float = None) -> float:
    """
    One OU step of the ion's instantaneous frequency.

    Args:
        ion: the ion; its center_freq_hz is the long-time mean
        dt_s: step in seconds (>= 0)
        rng: numpy Generator or seed
        freq_hz: current frequency; the mean when omitted

    Returns:
        The updated frequency in Hz.
    """
    if dt_s < 0:
        raise InvalidParameterError("dt_s must be >= 0")
    rng = as_generator(rng)
    current = ion.center_freq_hz if freq_hz is None else freq_hz
    noise = rng.standard_normal()
    return float(ou_update(ion.center_freq_hz, current, ion.sd_sigma_hz, ion.sd_tau_s, dt_s, noise))


def ou_path(mean, sigma, tau, dt_s: float, n_steps: int, rng, start=None) -> np.ndarray:
    """
    OU chain sampled every dt_s.

    `mean`, `sigma` and `tau` may be arrays (one chain per element); the result
    has shape (n_steps + 1, *mean.shape) and starts at `start` (default: the mean).
    """
    if dt_s < 0 or n_steps < 0:
        raise InvalidParameterError("dt_s and n_steps must be >= 0")
    rng = as_generator(rng)
    mean = np.asarray(mean, dtype=float)
    path = np.empty((n_steps + 1,) + mean.shape)
    path[0] = mean if start is None else start
    for k in range(n_steps):
        noise = rng.standard_normal(mean.shape)
        path[k + 1] = ou_update(mean, path[k], sigma, tau, dt_s, noise)
    return path
