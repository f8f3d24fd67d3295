"""
Fit Models
Curves used by the estimators, each with an analytic Jacobian.
"""

import math

import numpy as np

from .leastsq import Model

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def _linear(x, t):
    return t[0] + t[1] * x


def _linear_jac(x, t):
    return np.column_stack([np.ones_like(x), x])


def _exp_decay(x, t):
    a, lifetime, b = t
    return a * np.exp(-x / lifetime) + b


def _exp_decay_jac(x, t):
    a, lifetime, b = t
    e = np.exp(-x / lifetime)
    return np.column_stack([e, a * e * x / lifetime**2, np.ones_like(x)])


def _lorentz_core(x, amplitude, center, fwhm):
    """Value and partial derivatives of A (w/2)^2 / ((x-c)^2 + (w/2)^2)."""
    h2 = 0.25 * fwhm**2
    d = x - center
    denom = d**2 + h2
    shape = h2 / denom
    d_amp = shape
    d_center = amplitude * h2 * 2.0 * d / denom**2
    d_fwhm = amplitude * 0.5 * fwhm * d**2 / denom**2
    return amplitude * shape, d_amp, d_center, d_fwhm


def _lorentzian(x, t):
    return _lorentz_core(x, t[0], t[1], t[2])[0] + t[3]


def _lorentzian_jac(x, t):
    _, da, dc, dw = _lorentz_core(x, t[0], t[1], t[2])
    return np.column_stack([da, dc, dw, np.ones_like(x)])


def _double_lorentzian(x, t):
    return _lorentz_core(x, *t[0:3])[0] + _lorentz_core(x, *t[3:6])[0] + t[6]


def _double_lorentzian_jac(x, t):
    _, a1, c1, w1 = _lorentz_core(x, *t[0:3])
    _, a2, c2, w2 = _lorentz_core(x, *t[3:6])
    return np.column_stack([a1, c1, w1, a2, c2, w2, np.ones_like(x)])


def _gaussian(x, t):
    amplitude, center, fwhm, offset = t
    s = fwhm / FWHM_PER_SIGMA
    return amplitude * np.exp(-0.5 * ((x - center) / s) ** 2) + offset


def _gaussian_jac(x, t):
    amplitude, center, fwhm, offset = t
    s = fwhm / FWHM_PER_SIGMA
    d = x - center
    e = np.exp(-0.5 * (d / s) ** 2)
    return np.column_stack([
        e,
        amplitude * e * d / s**2,
        amplitude * e * d**2 / s**3 / FWHM_PER_SIGMA,
        np.ones_like(x),
    ])


def _saturation_rate(x, t):
    p_max, p_sat = t
    s = x / p_sat
    return p_max * s / (1.0 + s)


def _saturation_rate_jac(x, t):
    p_max, p_sat = t
    s = x / p_sat
    return np.column_stack([s / (1.0 + s), -p_max * s / (p_sat * (1.0 + s) ** 2)])


def _saturation_linewidth(x, t):
    width0, p_sat = t
    return width0 * np.sqrt(1.0 + x / p_sat)


def _saturation_linewidth_jac(x, t):
    width0, p_sat = t
    root = np.sqrt(1.0 + x / p_sat)
    return np.column_stack([root, -width0 * x / (2.0 * p_sat**2 * root)])


LINEAR = Model("linear", ("intercept", "slope"), _linear, _linear_jac)
EXP_DECAY = Model("exp_decay", ("amplitude", "lifetime", "offset"), _exp_decay, _exp_decay_jac)
LORENTZIAN = Model("lorentzian", ("amplitude", "center", "fwhm", "offset"), _lorentzian, _lorentzian_jac)
DOUBLE_LORENTZIAN = Model(
    "double_lorentzian",
    ("amplitude1", "center1", "fwhm1", "amplitude2", "center2", "fwhm2", "offset"),
    _double_lorentzian,
    _double_lorentzian_jac,
)
GAUSSIAN = Model("gaussian", ("amplitude", "center", "fwhm", "offset"), _gaussian, _gaussian_jac)
SATURATION_RATE = Model("saturation_rate", ("p_max", "p_sat"), _saturation_rate, _saturation_rate_jac)
SATURATION_LINEWIDTH = Model(
    "saturation_linewidth", ("linewidth0", "p_sat"), _saturation_linewidth, _saturation_linewidth_jac
)

MODELS = {
    m.name: m
    for m in (LINEAR, EXP_DECAY, LORENTZIAN, DOUBLE_LORENTZIAN, GAUSSIAN, SATURATION_RATE, SATURATION_LINEWIDTH)
}
