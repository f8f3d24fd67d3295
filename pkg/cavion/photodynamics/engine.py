"""
Trial Engine
Monte Carlo of the pulsed protocol: excite, close the laser, let the cavity
enhanced ions emit into the detection window, pass the detection chain, add
dark counts and enforce dead time.

Trial k draws only from its own counter-based sub-stream (seed, TRIALS, k).
Workers simulate blocks of config.BLOCK_TRIALS trials, reading the reserved
draws of the whole block at once, so a stream depends only on the seed and
never on the worker count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy import stats

from .. import config
from ..cavity import CavityParams, cavity_purcell, escape_efficiency, local_coupling, mode_geometry
from ..ensemble import Nanoparticle, apply_zeeman, ou_path
from ..errors import InvalidParameterError
from ..rng import Stream, check_seed, split_trial_stream, substream, trial_uniforms, unit_uniforms
from .rates import excited_population, lorentzian_lineshape
from .timetags import (
    MAX_TRIALS, SIGNAL_CHANNEL, VETO_CHANNEL, TimeTagStream, apply_dead_time, make_records,
    sort_records,
)

try:
    from tqdm import tqdm
    TQDM_AVAILABLE = True
except ImportError:
    TQDM_AVAILABLE = False

# Ions further than this many inhomogeneous sd from the laser are skipped
SELECTION_SIGMAS = 3.0


# =============================================================================
# SCENARIO TYPES
# =============================================================================

@dataclass(frozen=True)
class ProtocolTiming:
    pulse_us: float = config.PULSE_US
    window_us: float = config.WINDOW_US
    rep_rate_hz: float = config.REP_RATE_HZ
    duty_cycle: float = config.DUTY_CYCLE
    steady_state: bool = False  # long-pulse (steady-state) excitation

    def __post_init__(self):
        if self.pulse_us < 0 or not self.window_us > 0 or not self.rep_rate_hz > 0:
            raise InvalidParameterError("ProtocolTiming: pulse >= 0, window > 0, rep_rate > 0 required")
        if self.pulse_us + self.window_us > self.period_us * (1 + 1e-12):
            raise InvalidParameterError(
                f"ProtocolTiming: pulse + window ({self.pulse_us + self.window_us} us) "
                f"exceeds the trial period ({self.period_us:.6g} us)"
            )
        if not 0.0 < self.duty_cycle <= 1.0:
            raise InvalidParameterError("ProtocolTiming: duty_cycle must be in (0, 1]")

    @property
    def period_us(self) -> float:
        return 1e6 / self.rep_rate_hz

    @property
    def window_s(self) -> float:
        return self.window_us * 1e-6

    @property
    def window_ps(self) -> int:
        return int(round(self.window_us * 1e6))

    @property
    def pulse_s(self) -> float:
        return self.pulse_us * 1e-6


@dataclass(frozen=True)
class DetectionChain:
    """Losses between the cavity mode and a registered click."""
    escape_efficiency: Optional[float] = None  # derived from the loss budget when None
    mode_match: float = config.MODE_MATCH
    path_efficiency: float = config.PATH_EFFICIENCY
    detector_efficiency: float = config.DETECTOR_PRESETS["paper"][0]
    dark_rate_hz: float = config.DETECTOR_PRESETS["paper"][1]
    dead_time_ns: float = config.DEAD_TIME_NS

    def __post_init__(self):
        for name in ("escape_efficiency", "mode_match", "path_efficiency", "detector_efficiency"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise InvalidParameterError(f"DetectionChain: {name} must be in [0, 1]")
        if self.dark_rate_hz < 0 or self.dead_time_ns < 0:
            raise InvalidParameterError("DetectionChain: dark_rate_hz and dead_time_ns must be >= 0")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "DetectionChain":
        if name not in config.DETECTOR_PRESETS:
            raise InvalidParameterError(
                f"unknown detector preset {name!r}; choose from {sorted(config.DETECTOR_PRESETS)}"
            )
        efficiency, dark = config.DETECTOR_PRESETS[name]
        return cls(**{"detector_efficiency": efficiency, "dark_rate_hz": dark, **overrides})

    def throughput(self, cavity: CavityParams, extra_loss_ppm: float = 0.0) -> float:
        """Probability that a photon in the cavity mode produces a click."""
        escape = self.escape_efficiency
        if escape is None:
            escape = escape_efficiency(
                cavity.t_fiber_ppm, cavity.t_flat_ppm, cavity.loss_ppm + extra_loss_ppm
            )
        return escape * self.mode_match * self.path_efficiency * self.detector_efficiency


@dataclass(frozen=True)
class Scenario:
    """One experiment configuration."""
    cavity: CavityParams = field(default_factory=CavityParams)
    particle: Nanoparticle = None
    timing: ProtocolTiming = field(default_factory=ProtocolTiming)
    chain: DetectionChain = field(default_factory=DetectionChain)
    excitation_power_w: float = config.SINGLE_ION_PSAT_W
    excitation_freq_hz: float = config.INHOM_CENTER_HZ
    p_sat_w: float = config.SINGLE_ION_PSAT_W
    b_field_mt: float = 0.0
    natural_lifetime_s: float = config.NATURAL_LIFETIME_S
    branching_ratio: float = config.BRANCHING_RATIO
    reference_ion: int = 0
    spectral_diffusion: bool = False

    def __post_init__(self):
        if self.particle is None:
            raise InvalidParameterError("Scenario: particle is required")
        if self.excitation_power_w < 0 or not self.p_sat_w > 0:
            raise InvalidParameterError("Scenario: power must be >= 0 and p_sat_w > 0")
        if not self.natural_lifetime_s > 0:
            raise InvalidParameterError("Scenario: natural_lifetime_s must be > 0")
        if self.particle.ions and not 0 <= self.reference_ion < len(self.particle.ions):
            raise InvalidParameterError(f"Scenario: reference ion {self.reference_ion} does not exist")

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    @property
    def purcell(self) -> float:
        """Purcell factor of an ideally placed ion with this particle in the mode."""
        return cavity_purcell(self.cavity, self.particle.scatter_loss_ppm, self.branching_ratio)

    @property
    def ref_ion(self):
        return self.particle.ions[self.reference_ion]


# =============================================================================
# TRIAL PLAN (per-ion quantities fixed for a whole run)
# =============================================================================

@dataclass
class TrialPlan:
    """Per-ion arrays for the ions the laser can reach."""
    centers_hz: np.ndarray
    line_offsets_hz: np.ndarray  # (n, 2) Zeeman lines relative to the ion center
    line_strengths: np.ndarray
    line_widths_hz: np.ndarray
    decay_rate: np.ndarray  # Gamma_tot, 1/s
    beta: np.ndarray
    throughput: float
    sd_sigma_hz: np.ndarray
    sd_tau_s: np.ndarray

    @property
    def n_ions(self) -> int:
        return int(self.centers_hz.size)


def build_plan(scenario: Scenario) -> TrialPlan:
    particle = scenario.particle
    laser = scenario.excitation_freq_hz
    reach = SELECTION_SIGMAS * particle.inhom_sigma_hz
    selected = [ion for ion in particle.ions if abs(ion.center_freq_hz - laser) <= reach]
    throughput = scenario.chain.throughput(scenario.cavity, particle.scatter_loss_ppm)

    if not selected:
        zeros = np.zeros(0)
        return TrialPlan(zeros, np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 2)),
                         zeros, zeros, throughput, zeros, zeros)

    waist = mode_geometry(scenario.cavity, particle.scatter_loss_ppm).waist_um
    rel = np.array([ion.position_nm for ion in selected], dtype=float) * 1e-3
    positions = rel + np.array([particle.x_um, particle.y_um, particle.height_nm * 1e-3])
    angles = np.array([ion.dipole_polar_angle for ion in selected])
    xi = np.atleast_1d(local_coupling(positions, angles, scenario.cavity, waist))
    c_xi = scenario.purcell * xi

    lines = [apply_zeeman(ion, scenario.b_field_mt) for ion in selected]
    centers = np.array([ion.center_freq_hz for ion in selected])
    return TrialPlan(
        centers_hz=centers,
        line_offsets_hz=np.array([[l.freq_hz for l in pair] for pair in lines]) - centers[:, None],
        line_strengths=np.array([[l.relative_strength for l in pair] for pair in lines]),
        line_widths_hz=np.array([[l.fwhm_hz for l in pair] for pair in lines]),
        decay_rate=(1.0 + c_xi) / scenario.natural_lifetime_s,
        beta=c_xi / (1.0 + c_xi),
        throughput=throughput,
        sd_sigma_hz=np.array([ion.sd_sigma_hz for ion in selected]),
        sd_tau_s=np.array([ion.sd_tau_s for ion in selected]),
    )


def ion_detection_probabilities(scenario: Scenario, plan: TrialPlan = None, centers_hz=None):
    """
    Per-ion probability of one signal click in a kept trial, and the ion decay rates.

    Only the population left at the end of the pulse emits; emission after the
    window closes is lost.
    """
    plan = plan or build_plan(scenario)
    if plan.n_ions == 0:
        return np.zeros(0), np.zeros(0)
    centers = plan.centers_hz if centers_hz is None else centers_hz
    detuning = scenario.excitation_freq_hz - (centers[:, None] + plan.line_offsets_hz)
    shape = (plan.line_strengths * lorentzian_lineshape(detuning, plan.line_widths_hz)).sum(axis=1)

    saturation = scenario.excitation_power_w / scenario.p_sat_w
    w = 0.5 * plan.decay_rate * saturation * shape
    timing = scenario.timing
    p_e = excited_population(w, plan.decay_rate, timing.pulse_s, timing.steady_state)
    in_window = -np.expm1(-plan.decay_rate * timing.window_s)
    q = np.asarray(p_e) * in_window * plan.beta * plan.throughput
    return np.clip(q, 0.0, 1.0), plan.decay_rate


def expected_counts_per_trial(scenario: Scenario) -> float:
    """Mean channel-0 counts per kept trial, before dead time."""
    q, _ = ion_detection_probabilities(scenario)
    dark = scenario.chain.dark_rate_hz * scenario.timing.window_s
    return float(q.sum() + dark)


# =============================================================================
# TRIAL SIMULATION
# =============================================================================
#
# Each trial reads its own uniforms in a fixed order:
#   0          kept (duty cycle)
#   1          number of dark clicks (inverse Poisson cdf)
#   2 ..       one arrival time per dark click
#   then       pairs (next emitting ion, emission time) until no ion is left
# Emitting ions are found by walking the cumulative survival -log prod(1 - q),
# which samples independent per-ion emissions with one draw per emitter.

# q is kept below 1 so the survival stays finite
Q_MAX = 1.0 - 1e-12


@dataclass
class TrialRates:
    """Per-ion click probabilities and decay rates shared by all trials of a run."""
    q: np.ndarray
    rates: np.ndarray
    survival: np.ndarray  # -cumsum(log(1 - q))
    dark_cdf: np.ndarray

    @classmethod
    def build(cls, scenario: Scenario, plan: TrialPlan, centers_hz=None) -> "TrialRates":
        q, rates = ion_detection_probabilities(scenario, plan, centers_hz)
        survival = -np.cumsum(np.log1p(-np.minimum(q, Q_MAX)))
        mu_dark = scenario.chain.dark_rate_hz * scenario.timing.window_s
        dark_cdf = np.zeros(0)
        if mu_dark > 0:
            k_max = int(mu_dark + 12.0 * math.sqrt(mu_dark) + 12)
            dark_cdf = stats.poisson.cdf(np.arange(k_max + 1), mu_dark)
        return cls(q=q, rates=rates, survival=survival, dark_cdf=dark_cdf)


def _simulate_rows(scenario: Scenario, trial_rates: TrialRates, uniforms: np.ndarray,
                   first_trial: int):
    """Records of consecutive trials, one row of uniforms each; also the rows that ran out of draws."""
    n, width = uniforms.shape
    timing = scenario.timing
    window_s = timing.window_s
    rows = np.arange(n)

    kept = uniforms[:, 0] < timing.duty_cycle
    overflow = np.zeros(n, dtype=bool)
    trials: List[np.ndarray] = []
    times: List[np.ndarray] = []

    n_dark = np.zeros(n, dtype=np.int64)
    if trial_rates.dark_cdf.size:
        n_dark[kept] = np.searchsorted(trial_rates.dark_cdf, uniforms[kept, 1], side="right")
        overflow |= 2 + n_dark > width
        for j in range(int(n_dark[~overflow].max(initial=0))):
            hit = rows[(n_dark > j) & ~overflow]
            trials.append(hit)
            times.append(uniforms[hit, 2 + j] * window_s)

    survival, rates = trial_rates.survival, trial_rates.rates
    pos = 2 + n_dark
    passed = np.zeros(n)
    active = rows[kept & ~overflow]
    while survival.size and active.size:
        short = pos[active] >= width
        overflow[active[short]] = True
        active = active[~short]
        # next ion whose survival drops below the drawn threshold
        threshold = passed[active] - np.log1p(-uniforms[active, pos[active]])
        ion = np.searchsorted(survival, threshold, side="right")
        found = ion < survival.size
        active, ion = active[found], ion[found]
        short = pos[active] + 1 >= width
        overflow[active[short]] = True
        active, ion = active[~short], ion[~short]
        u = uniforms[active, pos[active] + 1]
        trials.append(active)
        times.append(-np.log1p(u * np.expm1(-rates[ion] * window_s)) / rates[ion])
        passed[active] = survival[ion]
        pos[active] += 2

    if trials:
        signal_trials = np.concatenate(trials)
        signal_ps = np.minimum(np.floor(np.concatenate(times) * 1e12), timing.window_ps - 1).astype(np.uint64)
        complete = ~overflow[signal_trials]
        signal_trials, signal_ps = signal_trials[complete], signal_ps[complete]
    else:
        signal_trials = np.zeros(0, dtype=np.int64)
        signal_ps = np.zeros(0, dtype=np.uint64)

    dropped = rows[~kept]
    records = make_records(
        np.concatenate([signal_trials, dropped]) + first_trial,
        np.concatenate([np.full(signal_trials.size, SIGNAL_CHANNEL), np.full(dropped.size, VETO_CHANNEL)]),
        np.concatenate([signal_ps, np.zeros(dropped.size, dtype=np.uint64)]),
    )
    dead_ps = int(round(scenario.chain.dead_time_ns * 1e3))
    return apply_dead_time(records, dead_ps), rows[overflow]


def _single_trial(scenario: Scenario, trial_rates: TrialRates, trial_index: int,
                  rng: np.random.Generator) -> np.ndarray:
    """One trial from its own generator, extending its draws onto the spill stream as needed."""
    draws, spill = split_trial_stream(rng)
    while True:
        records, overflow = _simulate_rows(scenario, trial_rates, draws[None, :], trial_index)
        if not overflow.size:
            return records
        draws = np.concatenate([draws, unit_uniforms(spill.random_raw(draws.size))])


def run_trial(scenario: Scenario, trial_index: int, rng: np.random.Generator,
              centers_hz=None) -> List[tuple]:
    """
    Records of one trial as (trial, channel, time_ps) tuples.

    With rng = substream(seed, Stream.TRIALS, trial_index) this is exactly trial
    trial_index of run_sequence(scenario, n, seed). Under spectral diffusion pass
    the ion centers of the trial's block to match a sequence.
    """
    if not 0 <= trial_index < MAX_TRIALS:
        raise InvalidParameterError("trial index overflows 32 bits")
    trial_rates = TrialRates.build(scenario, build_plan(scenario), centers_hz)
    records = _single_trial(scenario, trial_rates, trial_index, rng)
    return [(int(r["trial"]), int(r["channel"]), int(r["time_ps"])) for r in records]


def _simulate_block(scenario: Scenario, trial_rates: TrialRates, seed: int,
                    first_trial: int, n: int) -> np.ndarray:
    records, overflow = _simulate_rows(scenario, trial_rates, trial_uniforms(seed, first_trial, n), first_trial)
    if not overflow.size:
        return records
    redone = [
        _single_trial(scenario, trial_rates, first_trial + int(r), substream(seed, Stream.TRIALS, first_trial + int(r)))
        for r in overflow
    ]
    spilled = np.isin(records["trial"], (overflow + first_trial).astype(np.uint64))
    return sort_records(np.concatenate([records[~spilled], *redone]))


def _diffusion_centers(scenario: Scenario, plan: TrialPlan, seed: int, n_blocks: int):
    """Ion center frequencies per block of config.BLOCK_TRIALS trials, one OU step per block."""
    if not scenario.spectral_diffusion or plan.n_ions == 0:
        return None
    dt = config.BLOCK_TRIALS / scenario.timing.rep_rate_hz
    rng = substream(seed, Stream.DIFFUSION)
    return ou_path(plan.centers_hz, plan.sd_sigma_hz, plan.sd_tau_s, dt, n_blocks - 1, rng)


def run_sequence(scenario: Scenario, n_trials: int, master_seed: int,
                 threads: int = None, progress: bool = None) -> TimeTagStream:
    """
    Simulate n_trials consecutive trials.

    Args:
        scenario: experiment configuration
        n_trials: number of trials (1 .. 2^32)
        master_seed: unsigned 64-bit seed
        threads: worker threads (default config.default_threads())
        progress: show a tqdm bar (default config.SHOW_PROGRESS)

    Returns:
        TimeTagStream, identical for any thread count
    """
    n_trials = int(n_trials)
    if n_trials < 1:
        raise InvalidParameterError("n_trials must be >= 1")
    if n_trials > MAX_TRIALS:
        raise InvalidParameterError("n_trials overflows the 32-bit trial index")
    seed = check_seed(master_seed)
    threads = threads or config.default_threads()
    progress = config.SHOW_PROGRESS if progress is None else progress

    plan = build_plan(scenario)
    block = config.BLOCK_TRIALS
    n_blocks = math.ceil(n_trials / block)
    centers = _diffusion_centers(scenario, plan, seed, n_blocks)
    shared = TrialRates.build(scenario, plan) if centers is None else None

    def work(b: int) -> np.ndarray:
        first = b * block
        size = min(block, n_trials - first)
        trial_rates = shared or TrialRates.build(scenario, plan, centers[b])
        return _simulate_block(scenario, trial_rates, seed, first, size)

    if threads <= 1 or n_blocks == 1:
        iterator = map(work, range(n_blocks))
        parts = list(tqdm(iterator, total=n_blocks, desc="trials", unit="block")
                     if progress and TQDM_AVAILABLE else iterator)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            iterator = pool.map(work, range(n_blocks))
            parts = list(tqdm(iterator, total=n_blocks, desc="trials", unit="block")
                         if progress and TQDM_AVAILABLE else iterator)

    return TimeTagStream.concatenate(parts, n_trials)
