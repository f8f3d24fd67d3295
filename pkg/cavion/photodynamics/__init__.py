"""
cavion Photodynamics Package
Pulsed-protocol trial engine, time tags, scans and saturation series.
"""

from .rates import pump_rate, excited_population, lorentzian_lineshape
from .timetags import (
    SIGNAL_CHANNEL, VETO_CHANNEL, END_CHANNEL, RECORD_DTYPE, PACKED_DTYPE,
    TimeTagStream, make_records, apply_dead_time,
)
from .engine import (
    ProtocolTiming, DetectionChain, Scenario, TrialPlan,
    build_plan, ion_detection_probabilities, expected_counts_per_trial,
    run_trial, run_sequence,
)
from .spectra import (
    Histogram, SpectrumScan, SaturationPoint, SaturationSeries,
    decay_histogram, scan_excitation, saturation_series, default_scan_grid, binomial_error,
)
from .presets import (
    single_ion_scenario, g2_scenario, decay_scenario, particle_scenario, inhomogeneous_grid,
)

__all__ = [
    "pump_rate", "excited_population", "lorentzian_lineshape",
    "SIGNAL_CHANNEL", "VETO_CHANNEL", "END_CHANNEL", "RECORD_DTYPE", "PACKED_DTYPE",
    "TimeTagStream", "make_records", "apply_dead_time",
    "ProtocolTiming", "DetectionChain", "Scenario", "TrialPlan",
    "build_plan", "ion_detection_probabilities", "expected_counts_per_trial",
    "run_trial", "run_sequence",
    "Histogram", "SpectrumScan", "SaturationPoint", "SaturationSeries",
    "decay_histogram", "scan_excitation", "saturation_series", "default_scan_grid", "binomial_error",
    "single_ion_scenario", "g2_scenario", "decay_scenario", "particle_scenario", "inhomogeneous_grid",
]
