import math
import os
import tempfile
import unittest

import numpy as np

from cavion.errors import FitInputError, UndefinedEstimateError
from cavion.estimators import (
    DOUBLE_LORENTZIAN,
    EXP_DECAY,
    GAUSSIAN,
    LINEAR,
    LORENTZIAN,
    SATURATION_LINEWIDTH,
    SATURATION_RATE,
    G2Series,
    finite_difference_jacobian,
    fit_exponential_decay,
    fit_gaussian,
    fit_least_squares,
    fit_lorentzian,
    fit_saturation_linewidth,
    fit_saturation_rate,
    g2_background_prediction,
    g2_from_counts,
    g2_pulsed,
    simulate_g2_background,
)
from cavion.photodynamics import (
    VETO_CHANNEL,
    Histogram,
    ProtocolTiming,
    SpectrumScan,
    TimeTagStream,
    g2_scenario,
    make_records,
    run_sequence,
)
from cavion.rng import Stream, substream


def _lorentz(x, amplitude, center, fwhm):
    h2 = 0.25 * fwhm**2
    return amplitude * h2 / ((x - center) ** 2 + h2)


class TestLeastSquares(unittest.TestCase):
    def test_linear_exact(self):
        x = np.arange(10.0)
        fit = fit_least_squares(LINEAR, x, 3.0 + 2.0 * x, 0.1, [0.0, 1.0])
        self.assertTrue(fit.converged)
        self.assertAlmostEqual(fit.value("intercept"), 3.0, places=9)
        self.assertAlmostEqual(fit.value("slope"), 2.0, places=9)
        self.assertLess(fit.residual_norm, 1e-8)

    def test_exponential_noiseless(self):
        x = np.linspace(0.0, 500.0, 101)
        fit = fit_least_squares(EXP_DECAY, x, np.exp(-x / 88.0), 0.01, [0.8, 60.0, 0.05])
        self.assertTrue(fit.converged)
        self.assertAlmostEqual(fit.value("lifetime") / 88.0, 1.0, delta=1e-6)

    def test_analytic_jacobians(self):
        cases = [
            (LINEAR, [0.5, -1.3]),
            (EXP_DECAY, [2.0, 1.7, 0.3]),
            (LORENTZIAN, [2.0, 0.3, 1.2, 0.1]),
            (DOUBLE_LORENTZIAN, [1.0, -1.1, 0.8, 0.7, 1.4, 1.1, 0.2]),
            (GAUSSIAN, [1.5, 0.4, 1.3, 0.2]),
            (SATURATION_RATE, [0.01, 1.7]),
            (SATURATION_LINEWIDTH, [2.2, 1.7]),
        ]
        x = np.linspace(0.05, 3.0, 25)
        for model, theta in cases:
            theta = np.array(theta)
            analytic = model.jacobian(x, theta)
            numeric = finite_difference_jacobian(model.func, x, theta)
            scale = np.abs(analytic).max()
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8 * scale, err_msg=model.name)

    def test_singular_design(self):
        fit = fit_least_squares(LINEAR, np.ones(5), np.arange(5.0), 1.0, [0.0, 0.0])
        self.assertFalse(fit.converged)
        self.assertTrue(np.isnan(fit.covariance).all())
        self.assertTrue(math.isnan(fit.error("slope")))

    def test_bad_inputs(self):
        x = np.arange(5.0)
        with self.assertRaises(FitInputError):
            fit_least_squares(LINEAR, x, np.array([1, 2, np.nan, 4, 5]), 1.0, [0, 1])
        with self.assertRaises(FitInputError):
            fit_least_squares(LINEAR, x[:1], x[:1], 1.0, [0, 1])
        with self.assertRaises(FitInputError):
            fit_least_squares(LINEAR, x, x, 0.0, [0, 1])

    def test_result_serialization(self):
        x = np.arange(10.0)
        fit = fit_least_squares(LINEAR, x, 1.0 + x, 0.1, [0.0, 0.5])
        document = fit.to_dict()
        self.assertEqual(document["version"], 1)
        self.assertEqual(set(document["params"]), {"intercept", "slope"})
        self.assertIn("error", document["params"]["slope"])


class TestDecayFit(unittest.TestCase):
    def test_all_zero_histogram(self):
        hist = Histogram(centers_us=np.arange(10) + 0.5, counts=np.zeros(10), bin_us=1.0)
        with self.assertRaises(FitInputError):
            fit_exponential_decay(hist)

    def test_flat_histogram_undetermined(self):
        hist = Histogram(centers_us=np.arange(100) * 5.0 + 2.5, counts=np.full(100, 50.0), bin_us=5.0)
        fit = fit_exponential_decay(hist)
        self.assertTrue(not fit.converged or not fit.error("lifetime") < fit.value("lifetime"))

    def test_noiseless_decay(self):
        centers = np.arange(100) * 5.0 + 2.5
        hist = Histogram(centers_us=centers, counts=1000.0 * np.exp(-centers / 88.7) + 20.0, bin_us=5.0)
        fit = fit_exponential_decay(hist)
        self.assertAlmostEqual(fit.value("lifetime") / 88.7, 1.0, delta=1e-6)
        self.assertAlmostEqual(fit.value("offset"), 20.0, places=4)


class TestLineFits(unittest.TestCase):
    def setUp(self):
        self.x = np.linspace(-10e6, 10e6, 41) + 1.95e14

    def _scan(self, y, err):
        return SpectrumScan(freq_hz=self.x, p_det=y, err=np.broadcast_to(err, y.shape).copy())

    def test_single_lorentzian_exact(self):
        y = _lorentz(self.x, 1e-2, 1.95e14 + 1e6, 3.85e6) + 4e-3
        fit = fit_lorentzian(self._scan(y, 1e-5))
        self.assertAlmostEqual(fit.value("fwhm") / 3.85e6, 1.0, delta=1e-6)
        self.assertAlmostEqual(fit.value("center") - 1.95e14, 1e6, delta=1.0)
        self.assertAlmostEqual(fit.value("amplitude") / 1e-2, 1.0, delta=1e-6)

    def test_noisy_pulls(self):
        """Reported errors match the scatter of repeated noisy fits."""
        truth = _lorentz(self.x, 1.0, 1.95e14, 4e6) + 0.2
        pulls = []
        for seed in range(20):
            noise = substream(seed, Stream.SAMPLE).normal(0.0, 0.05, self.x.size)
            fit = fit_lorentzian(self._scan(truth + noise, 0.05))
            pulls.append((fit.value("fwhm") - 4e6) / fit.error("fwhm"))
        self.assertLess(np.mean(np.abs(pulls)), 1.5)

    def test_flat_scan(self):
        fit = fit_lorentzian(self._scan(np.full(self.x.size, 0.3), 0.01))
        self.assertEqual(fit.value("amplitude"), 0.0)
        self.assertAlmostEqual(fit.value("offset"), 0.3)

    def test_double_lorentzian_splitting(self):
        base = 1.95e14
        x = np.concatenate([np.linspace(-28e6, -22e6, 21), np.linspace(22e6, 28e6, 21)]) + base
        y = _lorentz(x, 1.0, base - 25e6, 0.88e6) + _lorentz(x, 0.9, base + 25e6, 0.88e6) + 0.1
        scan = SpectrumScan(freq_hz=x, p_det=y, err=np.full(x.size, 0.01))
        fit = fit_lorentzian(scan, n_peaks=2)
        self.assertNotIn("single_peak", fit.flags)
        self.assertAlmostEqual(fit.value("splitting") / 50e6, 1.0, delta=0.02)
        self.assertGreaterEqual(fit.error("splitting"), 0.0)

    def test_double_falls_back_to_single(self):
        y = _lorentz(self.x, 1.0, 1.95e14, 3e6) + 0.1
        scan = self._scan(y, 0.01)
        single = fit_lorentzian(scan)
        double = fit_lorentzian(scan, n_peaks=2)
        self.assertIn("single_peak", double.flags)
        self.assertEqual(double.value("splitting"), 0.0)
        self.assertEqual(double.value("center1"), single.value("center"))
        self.assertAlmostEqual(double.value("amplitude1") + double.value("amplitude2"), single.value("amplitude"))

    def test_too_few_points(self):
        scan = SpectrumScan(freq_hz=np.arange(3.0), p_det=np.ones(3), err=np.ones(3))
        with self.assertRaises(FitInputError):
            fit_lorentzian(scan)
        with self.assertRaises(FitInputError):
            fit_lorentzian(scan, n_peaks=3)

    def test_gaussian_envelope(self):
        x = np.linspace(-9e9, 9e9, 41) + 1.95e14
        sigma = 6e9 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        y = 0.02 * np.exp(-0.5 * ((x - 1.95e14) / sigma) ** 2) + 0.004
        fit = fit_gaussian(SpectrumScan(freq_hz=x, p_det=y, err=np.full(x.size, 1e-4)))
        self.assertAlmostEqual(fit.value("fwhm") / 6e9, 1.0, delta=1e-6)

    def test_single_frequency_scan(self):
        x = np.full(6, 1.95e14)
        scan = SpectrumScan(freq_hz=x, p_det=np.linspace(0.1, 0.2, 6), err=np.full(6, 0.01))
        with self.assertRaises(FitInputError):
            fit_lorentzian(scan)
        with self.assertRaises(FitInputError):
            fit_gaussian(scan)

    def test_gaussian_envelope_noisy(self):
        """Repeated noisy envelopes: unbiased width and honest errors."""
        x = np.linspace(-9e9, 9e9, 41) + 1.95e14
        sigma = 6e9 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        truth = 0.02 * np.exp(-0.5 * ((x - 1.95e14) / sigma) ** 2) + 0.004
        widths, pulls = [], []
        for seed in range(20):
            noise = substream(seed, Stream.SAMPLE).normal(0.0, 5e-4, x.size)
            fit = fit_gaussian(SpectrumScan(freq_hz=x, p_det=truth + noise, err=np.full(x.size, 5e-4)))
            widths.append(fit.value("fwhm"))
            pulls.append((fit.value("fwhm") - 6e9) / fit.error("fwhm"))
        self.assertAlmostEqual(np.mean(widths) / 6e9, 1.0, delta=0.03)
        self.assertLess(np.mean(np.abs(pulls)), 1.5)


class TestSaturationFits(unittest.TestCase):
    def setUp(self):
        self.powers = np.array([1, 2, 5, 10, 20, 50, 100]) * 1e-12

    def _rate_points(self, powers, p_max=0.01, p_sat=10.7e-12):
        s = powers / p_sat
        return np.column_stack([powers, p_max * s / (1 + s), np.full(powers.size, 1e-4)])

    def test_rate_exact(self):
        fit = fit_saturation_rate(self._rate_points(self.powers))
        self.assertAlmostEqual(fit.value("p_max") / 0.01, 1.0, delta=1e-6)
        self.assertAlmostEqual(fit.value("p_sat") / 10.7e-12, 1.0, delta=1e-6)
        self.assertNotIn("degenerate", fit.flags)

    def test_rate_power_scaling(self):
        """Scaling every power by k scales P_sat by k and leaves p_max alone."""
        k = 1e3
        points = self._rate_points(self.powers)
        points[:, 0] *= k
        fit = fit_saturation_rate(points)
        self.assertAlmostEqual(fit.value("p_sat") / (10.7e-12 * k), 1.0, delta=1e-6)
        self.assertAlmostEqual(fit.value("p_max") / 0.01, 1.0, delta=1e-6)

    def test_rate_degenerate(self):
        fit = fit_saturation_rate(self._rate_points(np.array([0.01, 0.02, 0.05, 0.1]) * 1e-12))
        self.assertIn("degenerate", fit.flags)

    def test_rate_monte_carlo(self):
        """Binomial detection counts at each power recover p_max and P_sat."""
        n_trials = 200_000
        s = self.powers / 10.7e-12
        p_true = 0.01 * s / (1 + s)
        p_sats, p_maxes, pulls = [], [], []
        for seed in range(20):
            k = substream(seed, Stream.TRIALS).binomial(n_trials, p_true)
            y = k / n_trials
            err = np.sqrt(y * (1 - y) / n_trials)
            fit = fit_saturation_rate(np.column_stack([self.powers, y, err]))
            p_sats.append(fit.value("p_sat"))
            p_maxes.append(fit.value("p_max"))
            pulls.append((fit.value("p_sat") - 10.7e-12) / fit.error("p_sat"))
        self.assertAlmostEqual(np.mean(p_sats) / 10.7e-12, 1.0, delta=0.05)
        self.assertAlmostEqual(np.mean(p_maxes) / 0.01, 1.0, delta=0.03)
        self.assertLess(np.mean(np.abs(pulls)), 1.5)

    def test_rate_needs_three_points(self):
        with self.assertRaises(FitInputError):
            fit_saturation_rate(self._rate_points(self.powers[:2]))

    def test_linewidth_exact(self):
        powers = np.array([0, 2, 5, 10, 20, 50]) * 1e-12
        widths = 2.2e6 * np.sqrt(1 + powers / 10.7e-12)
        fit = fit_saturation_linewidth(np.column_stack([powers, widths, np.full(powers.size, 1e4)]))
        self.assertAlmostEqual(fit.value("linewidth0") / 2.2e6, 1.0, delta=1e-6)
        self.assertAlmostEqual(fit.value("p_sat") / 10.7e-12, 1.0, delta=1e-6)

    def test_linewidth_model_at_zero_power(self):
        self.assertEqual(float(SATURATION_LINEWIDTH(np.array([0.0]), [2.2e6, 1e-11])[0]), 2.2e6)


class TestG2(unittest.TestCase):
    def test_poisson_light(self):
        counts = substream(1, Stream.SAMPLE).poisson(0.1, 200000)
        series = g2_from_counts(counts, max_lag=10)
        self.assertEqual(series.lags.tolist(), list(range(-10, 11)))
        for value, error in zip(series.values, series.errors):
            self.assertLess(abs(value - 1.0), 4 * error)

    def test_single_emitter(self):
        counts = (substream(2, Stream.SAMPLE).random(100000) < 0.3).astype(int)
        series = g2_from_counts(counts, max_lag=5)
        value, _ = series.at(0)
        self.assertEqual(value, 0.0)
        value, error = series.at(5)
        self.assertLess(abs(value - 1.0), 4 * error)

    def test_no_detections(self):
        with self.assertRaises(UndefinedEstimateError):
            g2_from_counts(np.zeros(100, dtype=int), max_lag=5)
        with self.assertRaises(UndefinedEstimateError):
            g2_pulsed(TimeTagStream(n_trials=10))

    def test_vetoed_trials_skipped(self):
        stream = TimeTagStream(make_records([0, 1, 2, 3], [0, VETO_CHANNEL, 0, 0], [5, 0, 5, 5]), n_trials=4)
        series = g2_pulsed(stream, ProtocolTiming(), max_lag=2)
        self.assertEqual(series.at(0)[0], 0.0)
        self.assertEqual(series.at(1)[0], 1.0)
        self.assertEqual(series.at(-2)[0], 1.0)
        self.assertAlmostEqual(series.delays_s[-1], 2 / 1400.0)

    def test_far_lag_normalization(self):
        counts = substream(3, Stream.SAMPLE).poisson(0.1, 200000)
        series = g2_from_counts(counts, max_lag=20, normalize="far_lags")
        self.assertAlmostEqual(series.at(0)[0], 1.0, delta=0.1)

    def test_bootstrap_errors(self):
        counts = substream(4, Stream.SAMPLE).poisson(0.1, 50000)
        boot = g2_from_counts(counts, max_lag=3, errors="bootstrap", n_resamples=200, seed=9)
        again = g2_from_counts(counts, max_lag=3, errors="bootstrap", n_resamples=200, seed=9)
        prop = g2_from_counts(counts, max_lag=3)
        np.testing.assert_array_equal(boot.errors, again.errors)
        ratio = boot.at(0)[1] / prop.at(0)[1]
        self.assertGreater(ratio, 0.5)
        self.assertLess(ratio, 2.0)

    def test_background_prediction(self):
        self.assertEqual(g2_background_prediction(0.01, 0.0), 0.0)
        self.assertEqual(g2_background_prediction(0.0, 0.01), 1.0)
        self.assertAlmostEqual(g2_background_prediction(4.76e-3, 7e-4), 0.240, places=3)
        with self.assertRaises(UndefinedEstimateError):
            g2_background_prediction(0.0, 0.0)

    def test_background_monte_carlo(self):
        for i, (p, mu) in enumerate([(0.01, 0.002), (0.005, 0.0007), (0.02, 0.02)]):
            series = simulate_g2_background(p, mu, 4000000, seed=100 + i)
            value, error = series.at(0)
            self.assertLess(abs(value - g2_background_prediction(p, mu)), 3.5 * error)

    def test_csv_round_trip(self):
        series = g2_from_counts(substream(5, Stream.SAMPLE).poisson(0.2, 10000), max_lag=3)
        with tempfile.TemporaryDirectory() as tmp:
            loaded = G2Series.from_csv(series.to_csv(os.path.join(tmp, "g2.csv")))
        np.testing.assert_array_equal(loaded.lags, series.lags)
        np.testing.assert_array_equal(loaded.values, series.values)
        self.assertEqual(series.to_dict()["version"], 1)


class TestEngineG2(unittest.TestCase):
    def test_single_ion_with_dark_counts(self):
        """Engine g2(0) of the g2 preset matches the dark-count prediction of ~0.24."""
        scenario = g2_scenario()
        stream = run_sequence(scenario, 15000000, 7, threads=4)
        series = g2_pulsed(stream, scenario.timing, max_lag=10)
        value, error = series.at(0)
        self.assertGreater(value, 0.15)
        self.assertLess(value, 0.33)
        self.assertLess(abs(value - 0.240), 3.5 * error)
        for lag in range(1, 11):
            g, e = series.at(lag)
            self.assertLess(abs(g - 1.0), 4 * e)


if __name__ == "__main__":
    unittest.main()
