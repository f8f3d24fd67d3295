"""
Rate Equations
Incoherent two-level pumping of an ion: pump rate and excited population.
"""

import numpy as np

from ..errors import InvalidParameterError


def lorentzian_lineshape(detuning_hz, fwhm_hz):
    """(g/2)^2 / (d^2 + (g/2)^2), unity on resonance."""
    half = 0.5 * np.asarray(fwhm_hz, dtype=float)
    d = np.asarray(detuning_hz, dtype=float)
    return half**2 / (d**2 + half**2)


def pump_rate(power_w, detuning_hz, ion, p_sat_w: float, decay_rate: float):
    """
    Pump rate W = (Gamma_tot / 2) (P / P_sat) L(detuning).

    Args:
        power_w: optical power in the fiber, W (>= 0)
        detuning_hz: laser minus ion frequency
        ion: Ion; its homogeneous FWHM sets the Lorentzian width
        p_sat_w: power giving S = 1 on resonance
        decay_rate: Purcell-enhanced decay rate Gamma_tot, 1/s

    Returns:
        W in 1/s (float for scalar inputs)
    """
    power = np.asarray(power_w, dtype=float)
    if np.any(power < 0):
        raise InvalidParameterError("power must be >= 0")
    if not p_sat_w > 0:
        raise InvalidParameterError("p_sat_w must be > 0")
    w = 0.5 * decay_rate * (power / p_sat_w) * lorentzian_lineshape(detuning_hz, ion.hom_fwhm_hz)
    return float(w) if np.ndim(w) == 0 else w


def excited_population(w_hz, gamma_hz, pulse_s, steady_state: bool = False):
    """
    Excited population at the end of a pump pulse.

    Solves dp/dt = W (1 - p) - (W + Gamma) p from p(0) = 0:
    p(t) = p_ss (1 - exp(-(2W + Gamma) t)), p_ss = W / (2W + Gamma).
    With steady_state the long-pulse value p_ss is returned.
    """
    w = np.asarray(w_hz, dtype=float)
    gamma = np.asarray(gamma_hz, dtype=float)
    if np.any(w < 0) or np.any(gamma < 0) or pulse_s < 0:
        raise InvalidParameterError("rates and pulse length must be >= 0")
    total = 2.0 * w + gamma
    with np.errstate(invalid="ignore", divide="ignore"):
        p_ss = np.where(total > 0, w / np.where(total > 0, total, 1.0), 0.0)
        # infinite pumping saturates at one half
        p_ss = np.where(np.isinf(w), 0.5, p_ss)
    if steady_state:
        p = p_ss
    else:
        p = p_ss * -np.expm1(-total * pulse_s)
        p = np.where(np.isinf(w), 0.5, p)
    return float(p) if np.ndim(p) == 0 else p
