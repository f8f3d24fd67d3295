"""
cavion Estimators Package
Damped least squares, the fit models, and pulsed g2.
"""

from .leastsq import Model, FitResult, fit_least_squares, finite_difference_jacobian
from .models import (
    LINEAR, EXP_DECAY, LORENTZIAN, DOUBLE_LORENTZIAN, GAUSSIAN,
    SATURATION_RATE, SATURATION_LINEWIDTH, MODELS,
)
from .fits import (
    fit_exponential_decay, fit_lorentzian, fit_gaussian,
    fit_saturation_rate, fit_saturation_linewidth,
)
from .g2 import (
    G2Series, g2_pulsed, g2_from_counts, g2_background_prediction, simulate_g2_background,
)

__all__ = [
    "Model", "FitResult", "fit_least_squares", "finite_difference_jacobian",
    "LINEAR", "EXP_DECAY", "LORENTZIAN", "DOUBLE_LORENTZIAN", "GAUSSIAN",
    "SATURATION_RATE", "SATURATION_LINEWIDTH", "MODELS",
    "fit_exponential_decay", "fit_lorentzian", "fit_gaussian",
    "fit_saturation_rate", "fit_saturation_linewidth",
    "G2Series", "g2_pulsed", "g2_from_counts", "g2_background_prediction", "simulate_g2_background",
]
