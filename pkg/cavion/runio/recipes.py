"""
Run Recipes
The tasks behind `cavion sim|fit|g2|report`. Each task writes its outputs
through the run context and returns a JSON-ready summary.
"""

from pathlib import Path

import numpy as np

from .. import config, console
from ..cavity import (
    CavityParams, Scatterer, expected_purcell_report, intracavity_photon_number,
    microscopy_map, mode_geometry, purcell_from_lifetime, resonant_transmission,
)
from ..cavity.microscopy import PIL_AVAILABLE
from ..ensemble import ParticleSpec, ion_count_report, rayleigh_loss_ppm, spectral_density
from ..errors import InvalidParameterError
from ..estimators import (
    fit_exponential_decay, fit_gaussian, fit_lorentzian, fit_saturation_linewidth,
    fit_saturation_rate, g2_background_prediction, g2_pulsed, simulate_g2_background,
)
from ..photodynamics import (
    Histogram, SaturationSeries, SpectrumScan, decay_histogram, default_scan_grid, inhomogeneous_grid,
    ion_detection_probabilities, run_sequence, saturation_series, scan_excitation,
)
from ..rng import Stream, derive_seed, substream
from .manifest import RunContext
from .registry import task
from .timetag_io import read_timetags, write_timetags

DEFAULT_POWERS_W = list(np.logspace(0.0, 2.0, 12) * 1e-12)
BROADENING_POWER_W = 22e-12
ZEEMAN_FIELD_MT = 5.0


def _fit_summary(fit) -> dict:
    return fit.to_dict()["params"] | {"converged": fit.converged, "reduced_chi2": fit.reduced_chi2}


def _input(run: RunContext) -> Path:
    path = run.param("input")
    if path is None:
        raise InvalidParameterError(f"{run.config.task} needs --input")
    path = Path(path)
    if not path.exists():
        raise InvalidParameterError(f"input not found: {path}")
    return path


# =============================================================================
# BUILDING BLOCKS (shared by sim and report tasks)
# =============================================================================

def _microscopy(run: RunContext, prefix: str = "") -> dict:
    cavity = CavityParams(**run.config.cavity)
    spec = ParticleSpec(**(run.config.particle or {}))
    rng = substream(run.seed, Stream.POINTS, 0)
    (x0, x1), (y0, y1) = run.param("x_range_um"), run.param("y_range_um")

    scatterers = []
    for _ in range(int(run.param("n_particles"))):
        diameter = rng.normal(spec.diameter_mean_nm, spec.diameter_sd_nm)
        while diameter <= 0:
            diameter = rng.normal(spec.diameter_mean_nm, spec.diameter_sd_nm)
        scatterers.append(Scatterer(float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)),
                                    rayleigh_loss_ppm(float(diameter))))

    tmap = microscopy_map(scatterers, cavity, (x0, x1), (y0, y1), float(run.param("step_um")))
    with run.output(f"{prefix}transmission.csv") as tmp:
        tmap.to_csv(tmp)
    if PIL_AVAILABLE:
        with run.output(f"{prefix}transmission.png") as tmp:
            tmap.to_png(tmp)
    else:
        console.warn("Pillow not installed; skipping transmission.png")
    run.write_json(f"{prefix}scatterers.json", [s.__dict__ for s in scatterers])

    bare = resonant_transmission(cavity.t_fiber_ppm, cavity.t_flat_ppm, cavity.loss_ppm)
    return {
        "scatterers": len(scatterers),
        "bare_transmission": bare,
        "min_transmission": float(tmap.values.min()),
        "max_contrast": 1.0 - float(tmap.values.min()) / bare,
    }


def _decay(run: RunContext, trials: int, prefix: str = "") -> dict:
    scenario = run.config.build_scenario()
    stream = run_sequence(scenario, trials, run.seed, threads=run.threads)
    if run.params.get("write_timetags", True):
        with run.output(f"{prefix}timetags.etts") as tmp:
            write_timetags(stream, tmp)
    histogram = decay_histogram(stream, float(run.param("bin_us")), scenario.timing.window_us)
    with run.output(f"{prefix}decay.csv") as tmp:
        histogram.to_csv(tmp)
    fit = fit_exponential_decay(histogram)
    with run.output(f"{prefix}fit_decay.json") as tmp:
        fit.to_json(tmp)

    lifetime_us = fit.value("lifetime")
    return {
        "detected_photons": stream.signal_count(),
        "lifetime_us": lifetime_us,
        "lifetime_err_us": fit.error("lifetime"),
        "purcell_factor": purcell_from_lifetime(scenario.natural_lifetime_s, lifetime_us * 1e-6),
        "converged": fit.converged,
    }


def _scan(run: RunContext, scenario, grid, trials: int, seed: int, n_peaks: int, wide: bool,
          prefix: str = "scan") -> dict:
    scan = scan_excitation(scenario, grid, trials, seed, threads=run.threads)
    with run.output(f"{prefix}.csv") as tmp:
        scan.to_csv(tmp)
    fit = fit_gaussian(scan) if wide else fit_lorentzian(scan, n_peaks=n_peaks)
    with run.output(f"fit_{prefix}.json") as tmp:
        fit.to_json(tmp)
    summary = {"points": len(scan), "fit": _fit_summary(fit)}
    if wide:
        particle = scenario.particle
        summary["peak_density_per_ghz"] = spectral_density(particle, particle.inhom_center_hz)
    return summary


def _saturation(run: RunContext, scenario, trials: int, seed: int, prefix: str = "") -> dict:
    powers = run.param("powers_w") or DEFAULT_POWERS_W
    series = saturation_series(scenario, powers, trials, seed, int(run.param("n_points")),
                               threads=run.threads)
    with run.output(f"{prefix}saturation.csv") as tmp:
        series.to_csv(tmp)
    for k, scan in enumerate(series.scans):
        with run.output(f"{prefix}scans/scan_{k:02d}.csv") as tmp:
            scan.to_csv(tmp)
    rate, width = _saturation_fits(run, series, prefix)
    p_sat = rate.value("p_sat")
    return {
        "powers": len(series.points),
        "rate": _fit_summary(rate),
        "linewidth": _fit_summary(width),
        "intracavity_photons_at_psat": intracavity_photon_number(
            p_sat, scenario.cavity, scenario.particle.scatter_loss_ppm, scenario.chain.mode_match
        ) if p_sat > 0 else float("nan"),
    }


def _saturation_fits(run: RunContext, series: SaturationSeries, prefix: str = ""):
    rate = fit_saturation_rate(series)
    width = fit_saturation_linewidth(series)
    with run.output(f"{prefix}fit_saturation_rate.json") as tmp:
        rate.to_json(tmp)
    with run.output(f"{prefix}fit_saturation_linewidth.json") as tmp:
        width.to_json(tmp)
    return rate, width


def _g2(run: RunContext, stream, scenario=None, prefix: str = "") -> dict:
    series = g2_pulsed(
        stream, scenario.timing if scenario else None, int(run.param("max_lag")),
        run.param("normalize"), run.param("errors"), int(run.param("n_resamples")),
        derive_seed(run.seed, Stream.BOOTSTRAP, 0),
    )
    with run.output(f"{prefix}g2.csv") as tmp:
        series.to_csv(tmp)
    with run.output(f"{prefix}g2.json") as tmp:
        series.to_json(tmp)
    value, error = series.at(0)
    summary = {"g2_zero": value, "g2_zero_err": error, "mean_counts": series.mean_counts,
               "trials": series.n_trials}
    if scenario is not None:
        q, _ = ion_detection_probabilities(scenario)
        p_signal = float(q.sum())
        mu_dark = scenario.chain.dark_rate_hz * scenario.timing.window_s
        oracle = simulate_g2_background(p_signal, mu_dark, series.n_trials,
                                        derive_seed(run.seed, Stream.SAMPLE, 1))
        summary |= {
            "p_signal": p_signal,
            "mu_dark": mu_dark,
            "g2_zero_predicted": g2_background_prediction(p_signal, mu_dark),
            "g2_zero_oracle": oracle.at(0)[0],
            "g2_zero_oracle_err": oracle.at(0)[1],
        }
    return summary


# =============================================================================
# SIMULATIONS
# =============================================================================

MICROSCOPY_PARAMS = {"x_range_um": [-15.0, 15.0], "y_range_um": [-15.0, 15.0], "step_um": 0.5,
                     "n_particles": 4}
G2_PARAMS = {"max_lag": 50, "normalize": "mean", "errors": "propagation", "n_resamples": 1000}


@task("sim.microscopy", "Scattering-loss transmission map", scenario=None, params=MICROSCOPY_PARAMS)
def sim_microscopy(run: RunContext) -> dict:
    return _microscopy(run)


@task("sim.decay", "Purcell-enhanced fluorescence decay", scenario="decay",
      params={"trials": 400_000, "bin_us": 5.0, "write_timetags": True})
def sim_decay(run: RunContext) -> dict:
    return _decay(run, run.param("trials"))


@task("sim.scan", "Excitation scan with Lorentzian (or Gaussian envelope) fit", scenario="single_ion",
      params={"trials": 20_000, "n_points": 21, "span_widths": 2.5, "n_peaks": None, "wide": None})
def sim_scan(run: RunContext) -> dict:
    scenario = run.config.build_scenario()
    wide = run.param("wide")
    wide = (run.config.kind == "particle") if wide is None else bool(wide)
    n_peaks = run.param("n_peaks") or (2 if scenario.b_field_mt else 1)
    if wide:
        grid = inhomogeneous_grid(scenario.particle, int(run.param("n_points")))
    else:
        grid = default_scan_grid(scenario, int(run.param("n_points")), float(run.param("span_widths")))
    return _scan(run, scenario, grid, run.param("trials"), run.seed, int(n_peaks), wide)


@task("sim.saturation", "Saturation series: peak rate and linewidth against power",
      scenario="single_ion", params={"trials": 200_000, "powers_w": None, "n_points": 21})
def sim_saturation(run: RunContext) -> dict:
    return _saturation(run, run.config.build_scenario(), run.param("trials"), run.seed)


@task("sim.g2", "Pulsed g2 of the single ion", scenario="g2", preset="g2-paper",
      params={"trials": 5_000_000, "write_timetags": True, **G2_PARAMS})
def sim_g2(run: RunContext) -> dict:
    scenario = run.config.build_scenario()
    stream = run_sequence(scenario, run.param("trials"), run.seed, threads=run.threads)
    if run.param("write_timetags"):
        with run.output("timetags.etts") as tmp:
            write_timetags(stream, tmp)
    return _g2(run, stream, scenario)


# =============================================================================
# ANALYSIS OF EXISTING FILES
# =============================================================================

@task("fit.decay", "Lifetime fit of a time-tag file or decay CSV", needs_input=True,
      params={"bin_us": 5.0, "window_us": config.WINDOW_US})
def fit_decay(run: RunContext) -> dict:
    path = _input(run)
    if path.suffix == ".csv":
        data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
        bin_us = float(data[1, 0] - data[0, 0]) if data.shape[0] > 1 else float(run.param("bin_us"))
        histogram = Histogram(centers_us=data[:, 0], counts=data[:, 1], bin_us=bin_us)
    else:
        histogram = decay_histogram(read_timetags(path), float(run.param("bin_us")),
                                    float(run.param("window_us")))
        with run.output("decay.csv") as tmp:
            histogram.to_csv(tmp)
    fit = fit_exponential_decay(histogram)
    with run.output("fit_decay.json") as tmp:
        fit.to_json(tmp)
    lifetime_us = fit.value("lifetime")
    return {"lifetime_us": lifetime_us, "lifetime_err_us": fit.error("lifetime"),
            "purcell_factor": purcell_from_lifetime(config.NATURAL_LIFETIME_S, lifetime_us * 1e-6),
            "converged": fit.converged}


@task("fit.lorentzian", "Lorentzian fit of a scan CSV", needs_input=True, params={"n_peaks": 1})
def fit_lorentzian_task(run: RunContext) -> dict:
    fit = fit_lorentzian(SpectrumScan.from_csv(_input(run)), n_peaks=int(run.param("n_peaks")))
    with run.output("fit_lorentzian.json") as tmp:
        fit.to_json(tmp)
    return _fit_summary(fit)


@task("fit.saturation", "Saturation fits of a saturation CSV", needs_input=True)
def fit_saturation_task(run: RunContext) -> dict:
    rate, width = _saturation_fits(run, SaturationSeries.from_csv(_input(run)))
    return {"rate": _fit_summary(rate), "linewidth": _fit_summary(width)}


@task("g2.estimate", "Pulsed g2 of a time-tag file", needs_input=True, params=dict(G2_PARAMS))
def g2_estimate(run: RunContext) -> dict:
    return _g2(run, read_timetags(_input(run)))


# =============================================================================
# FIGURE REPORTS
# =============================================================================

@task("report.figure2", "Microscopy map, Purcell decay and inhomogeneous scan", scenario="decay",
      params={"trials": 400_000, "bin_us": 5.0, "scan_trials": 5_000, "n_points": 41,
              "write_timetags": False, **MICROSCOPY_PARAMS})
def report_figure2(run: RunContext) -> dict:
    cavity = CavityParams(**run.config.cavity)
    geometry = mode_geometry(cavity)
    console.step("microscopy map")
    microscopy = _microscopy(run, "microscopy/")
    console.step("Purcell decay")
    decay = _decay(run, run.param("trials"), "decay/")
    console.step("inhomogeneous scan")
    particle = run.config.build_scenario("particle")
    grid = inhomogeneous_grid(particle.particle, int(run.param("n_points")))
    scan = _scan(run, particle, grid, int(run.param("scan_trials")),
                 derive_seed(run.seed, Stream.POINTS, 2), 1, True, "inhomogeneous/scan")
    return {
        "cavity": {**geometry.__dict__, "volume_cubic_wavelengths":
                   geometry.volume_in_cubic_wavelengths(cavity.wavelength_nm)},
        "purcell": expected_purcell_report(cavity).to_dict(),
        "ion_count": ion_count_report(ParticleSpec(**(run.config.particle or {}))).to_dict(),
        "microscopy": microscopy,
        "decay": decay,
        "inhomogeneous": scan,
    }


@task("report.figure3", "Zeeman pair, power-broadened line and saturation series",
      scenario="single_ion",
      params={"trials": 200_000, "scan_trials": 50_000, "n_points": 21, "powers_w": None,
              "b_field_mt": ZEEMAN_FIELD_MT})
def report_figure3(run: RunContext) -> dict:
    base = run.config.build_scenario()
    scan_trials = int(run.param("scan_trials"))
    n_points = int(run.param("n_points"))

    console.step("Zeeman scans")
    zeeman = base.with_(b_field_mt=float(run.param("b_field_mt")))
    split = _scan(run, zeeman, default_scan_grid(zeeman, n_points), scan_trials,
                  derive_seed(run.seed, Stream.POINTS, 3), 2, False, "zeeman/split")
    field_free = base.with_(b_field_mt=0.0)
    single = _scan(run, field_free, default_scan_grid(field_free, n_points), scan_trials,
                   derive_seed(run.seed, Stream.POINTS, 4), 2, False, "zeeman/zero_field")

    console.step("power-broadened line")
    broadened = base.with_(excitation_power_w=BROADENING_POWER_W)
    line = _scan(run, broadened, default_scan_grid(broadened, n_points), scan_trials,
                 derive_seed(run.seed, Stream.POINTS, 5), 1, False, "broadening/scan")

    console.step("saturation series")
    saturation = _saturation(run, base, run.param("trials"), derive_seed(run.seed, Stream.POINTS, 6),
                             "saturation/")
    return {"zeeman_split": split, "zeeman_zero_field": single, "broadening_22pW": line,
            "saturation": saturation}


@task("report.figure4", "Pulsed g2 with background prediction", scenario="g2", preset="g2-paper",
      params={"trials": 5_000_000, **G2_PARAMS})
def report_figure4(run: RunContext) -> dict:
    scenario = run.config.build_scenario()
    stream = run_sequence(scenario, run.param("trials"), run.seed, threads=run.threads)
    return _g2(run, stream, scenario)
