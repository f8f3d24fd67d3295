import json
import os
import struct
import tempfile
import unittest
from pathlib import Path

import numpy as np

from cavion.ensemble import ParticleSpec, sample_nanoparticle, save_particle
from cavion.errors import ConfigError, FormatError
from cavion.photodynamics import TimeTagStream, expected_counts_per_trial, make_records, single_ion_scenario
from cavion.runio import (
    cli_dispatch,
    decode_timetags,
    encode_timetags,
    load_config,
    parse_config,
    read_manifest,
    read_timetags,
    task_names,
    verify_run,
    write_timetags,
)


def _stream() -> TimeTagStream:
    records = make_records([0, 0, 2, 5], [0, 0, 255, 0], [10, 900, 0, 123456789])
    return TimeTagStream(records, n_trials=6)


class TestTimeTagFiles(unittest.TestCase):
    def test_empty_stream_is_bare_header(self):
        data = encode_timetags(TimeTagStream())
        self.assertEqual(len(data), 14)
        self.assertEqual(data[:4], b"ETTS")
        self.assertEqual(decode_timetags(data), TimeTagStream())

    def test_stream_without_records_is_bare_header(self):
        data = encode_timetags(TimeTagStream(n_trials=5))
        self.assertEqual(len(data), 14)
        self.assertEqual(struct.unpack_from("<Q", data, 6)[0], 0)
        decoded = decode_timetags(data)
        self.assertEqual(len(decoded), 0)
        self.assertEqual(decoded.n_trials, 0)

    def test_round_trip(self):
        stream = _stream()
        data = encode_timetags(stream)
        self.assertEqual(len(data), 14 + 4 * 13)
        decoded = decode_timetags(data)
        self.assertEqual(decoded, stream)
        self.assertEqual(encode_timetags(decoded), data)

    def test_trailing_empty_trials_survive(self):
        stream = TimeTagStream(make_records([3], [0], [42]), n_trials=10)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_timetags(stream, os.path.join(tmp, "tags.etts"))
            self.assertEqual(path.stat().st_size, 14 + 2 * 13)
            loaded = read_timetags(path)
        self.assertEqual(loaded.n_trials, 10)
        self.assertEqual(loaded, stream)

    def test_truncated_file(self):
        data = encode_timetags(_stream())[:-5]
        with self.assertRaises(FormatError) as ctx:
            decode_timetags(data)
        self.assertEqual(ctx.exception.offset, 14 + 3 * 13)

    def test_bad_header(self):
        data = encode_timetags(_stream())
        with self.assertRaises(FormatError) as ctx:
            decode_timetags(b"XXXX" + data[4:])
        self.assertEqual(ctx.exception.offset, 0)
        with self.assertRaises(FormatError) as ctx:
            decode_timetags(data[:4] + struct.pack("<H", 2) + data[6:])
        self.assertEqual(ctx.exception.offset, 4)
        with self.assertRaises(FormatError):
            decode_timetags(data[:10])

    def test_equal_times_in_any_channel_order(self):
        records = make_records([1, 1], [3, 0], [50, 50])
        data = bytearray(encode_timetags(TimeTagStream(records, n_trials=2)))
        data[14:27], data[27:40] = data[27:40], data[14:27]
        decoded = decode_timetags(bytes(data))
        self.assertEqual(decoded.records["channel"].tolist(), [0, 3])
        self.assertEqual(decoded.n_trials, 2)

    def test_trailing_bytes(self):
        with self.assertRaises(FormatError):
            decode_timetags(encode_timetags(_stream()) + b"\x00")

    def test_out_of_order(self):
        data = bytearray(encode_timetags(_stream()))
        first, second = data[14:27], data[27:40]
        data[14:27], data[27:40] = second, first
        with self.assertRaises(FormatError) as ctx:
            decode_timetags(bytes(data))
        self.assertEqual(ctx.exception.offset, 27)


class TestRunConfig(unittest.TestCase):
    def test_minimal_g2_config(self):
        cfg = parse_config({"seed": 7, "task": {"name": "sim.g2"}})
        resolved = cfg.to_dict()
        self.assertEqual(cfg.preset, "g2-paper")
        self.assertEqual(resolved["scenario"]["kind"], "g2")
        self.assertEqual(resolved["scenario"]["chain"]["detector_efficiency"], 0.5)
        self.assertEqual(resolved["scenario"]["chain"]["dark_rate_hz"], 1.4)
        timing = resolved["scenario"]["timing"]
        self.assertEqual((timing["pulse_us"], timing["window_us"], timing["rep_rate_hz"]), (200.0, 500.0, 1400.0))
        self.assertEqual(resolved["task"]["trials"], 5_000_000)

    def test_preset_override(self):
        cfg = parse_config({"seed": 1, "preset": "g2-paper", "task": {"name": "sim.scan"}})
        self.assertEqual(cfg.build_scenario().chain.detector_efficiency, 0.5)

    def test_unknown_keys(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config({"seed": 1, "colour": "red", "task": {"name": "sim.g2"}})
        self.assertEqual(ctx.exception.field, "colour")
        with self.assertRaises(ConfigError) as ctx:
            parse_config({"seed": 1, "task": {"name": "sim.g2"}, "scenario": {"timing": {"pulse": 1}}})
        self.assertEqual(ctx.exception.field, "scenario.timing.pulse")
        with self.assertRaises(ConfigError) as ctx:
            parse_config({"seed": 1, "task": {"name": "sim.g2", "speed": 3}})
        self.assertEqual(ctx.exception.field, "task.speed")

    def test_timing_violation_names_invariant(self):
        document = {"seed": 1, "task": {"name": "sim.g2"}, "scenario": {"timing": {"pulse_us": 300.0}}}
        with self.assertRaises(ConfigError) as ctx:
            parse_config(document)
        self.assertEqual(ctx.exception.field, "scenario.timing")
        self.assertIn("ProtocolTiming", str(ctx.exception))

    def test_seed_required(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config({"task": {"name": "sim.g2"}})
        self.assertEqual(ctx.exception.field, "seed")

    def test_unknown_task(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config({"seed": 1, "task": {"name": "sim.weather"}})
        self.assertEqual(ctx.exception.field, "task.name")

    def test_float_trials(self):
        cfg = parse_config({"seed": 1, "task": {"name": "sim.g2", "trials": 5e6}})
        self.assertEqual(cfg.task_params["trials"], 5_000_000)
        with self.assertRaises(ConfigError):
            parse_config({"seed": 1, "task": {"name": "sim.g2", "trials": 2.5}})

    def test_hash_tracks_content_not_runtime(self):
        base = {"seed": 1, "task": {"name": "sim.decay"}}
        h = parse_config(base).config_hash()
        self.assertEqual(h, parse_config({**base, "threads": 8, "output_dir": "elsewhere"}).config_hash())
        self.assertNotEqual(h, parse_config({**base, "seed": 2}).config_hash())
        edited = {**base, "scenario": {"chain": {"dark_rate_hz": 2.0}}}
        self.assertNotEqual(h, parse_config(edited).config_hash())

    def test_json_and_toml_agree(self):
        document = {"seed": 7, "task": {"name": "sim.decay", "trials": 1000},
                    "scenario": {"timing": {"duty_cycle": 0.5}}}
        toml_text = 'seed = 7\n\n[task]\nname = "sim.decay"\ntrials = 1000\n\n[scenario.timing]\nduty_cycle = 0.5\n'
        with tempfile.TemporaryDirectory() as tmp:
            json_path = Path(tmp) / "run.json"
            toml_path = Path(tmp) / "run.toml"
            json_path.write_text(json.dumps(document))
            toml_path.write_text(toml_text)
            self.assertEqual(load_config(json_path).config_hash(), load_config(toml_path).config_hash())

    def test_resolved_echo_reloads(self):
        cfg = parse_config({"seed": 3, "task": {"name": "sim.g2", "trials": 1000}})
        with tempfile.TemporaryDirectory() as tmp:
            path = cfg.write_resolved(Path(tmp) / "config.resolved.json")
            again = load_config(path)
        self.assertEqual(again.config_hash(), cfg.config_hash())

    def test_ensemble_file(self):
        particle = sample_nanoparticle(ParticleSpec(diameter_mean_nm=170.0, diameter_sd_nm=0.0), 4)
        with tempfile.TemporaryDirectory() as tmp:
            save_particle(particle, Path(tmp) / "particle.json")
            config_path = Path(tmp) / "run.json"
            config_path.write_text(json.dumps({
                "seed": 1, "task": {"name": "sim.scan"},
                "scenario": {"kind": "particle", "ensemble_file": "particle.json"},
            }))
            cfg = load_config(config_path)
            self.assertEqual(cfg.build_scenario().particle, particle)
        with self.assertRaises(ConfigError) as ctx:
            parse_config({"seed": 1, "task": {"name": "sim.scan"},
                          "scenario": {"ensemble_file": "/nonexistent/particle.json"}})
        self.assertEqual(ctx.exception.field, "scenario.ensemble_file")

    def test_registered_tasks(self):
        parse_config({"seed": 1, "task": {"name": "sim.g2"}})
        for name in ("sim.microscopy", "sim.decay", "sim.scan", "sim.saturation", "sim.g2",
                     "fit.decay", "fit.lorentzian", "fit.saturation", "g2.estimate",
                     "report.figure2", "report.figure3", "report.figure4"):
            self.assertIn(name, task_names())


class TestCommandLine(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _config(self, name: str, document: dict) -> str:
        path = self.root / name
        path.write_text(json.dumps(document))
        return str(path)

    def test_usage_errors(self):
        self.assertEqual(cli_dispatch(["bogus"]), 1)
        self.assertEqual(cli_dispatch(["sim", "g2"]), 1)
        self.assertEqual(cli_dispatch(["report"]), 1)
        self.assertEqual(cli_dispatch(["report", "figure4", "--seed", "1", "--trials", "abc"]), 1)
        self.assertEqual(cli_dispatch(["fit", "decay"]), 1)
        self.assertEqual(cli_dispatch(["report", "figure4", "--trials", "1000"]), 1)

    def test_version(self):
        self.assertEqual(cli_dispatch(["--version"]), 0)

    def test_g2_report_independent_of_threads(self):
        runs = []
        for threads in ("1", "4"):
            out = self.root / f"g2_{threads}"
            code = cli_dispatch(["report", "figure4", "--seed", "7", "--trials", "2e5",
                                 "--threads", threads, "--out", str(out)])
            self.assertEqual(code, 0)
            runs.append(out)
        first, second = (read_manifest(run) for run in runs)
        self.assertEqual(first.seed, 7)
        self.assertEqual(first.task, "report.figure4")
        self.assertEqual(first.config_hash, second.config_hash)
        self.assertEqual([(f.path, f.sha256) for f in first.files], [(f.path, f.sha256) for f in second.files])
        self.assertIn("g2.csv", [f.path for f in first.files])
        summary = json.loads((runs[0] / "summary.json").read_text())
        self.assertAlmostEqual(summary["g2_zero_predicted"], 0.240, places=2)

    def test_verify_detects_changes(self):
        out = self.root / "g2"
        self.assertEqual(cli_dispatch(["report", "figure4", "--seed", "3", "--trials", "50000",
                                       "--threads", "1", "--out", str(out)]), 0)
        self.assertEqual(verify_run(out), [])
        self.assertEqual(cli_dispatch(["verify", str(out)]), 0)
        (out / "g2.csv").write_text("lag,g2,err\n")
        self.assertEqual(cli_dispatch(["verify", str(out)]), 1)
        (out / "g2.json").unlink()
        problems = verify_run(out)
        self.assertEqual(len(problems), 2)

    def test_decay_simulation_then_fits(self):
        config_path = self._config("decay.json", {"seed": 3, "task": {"name": "sim.decay", "trials": 50000}})
        sim_dir = self.root / "sim"
        self.assertEqual(cli_dispatch(["sim", "decay", "--config", config_path, "--out", str(sim_dir)]), 0)
        for name in ("timetags.etts", "decay.csv", "fit_decay.json", "summary.json",
                     "config.resolved.json", "manifest.json"):
            self.assertTrue((sim_dir / name).exists(), name)

        fit_dir = self.root / "fit"
        self.assertEqual(cli_dispatch(["fit", "decay", "--input", str(sim_dir / "timetags.etts"),
                                       "--out", str(fit_dir)]), 0)
        summary = json.loads((fit_dir / "summary.json").read_text())
        self.assertAlmostEqual(summary["lifetime_us"] / 88.7, 1.0, delta=0.15)

        csv_dir = self.root / "fit_csv"
        self.assertEqual(cli_dispatch(["fit", "decay", "--input", str(sim_dir / "decay.csv"),
                                       "--out", str(csv_dir)]), 0)

        g2_dir = self.root / "g2"
        self.assertEqual(cli_dispatch(["g2", "estimate", "--input", str(sim_dir / "timetags.etts"),
                                       "--out", str(g2_dir)]), 0)
        self.assertTrue((g2_dir / "g2.csv").exists())

    def test_scan_then_lorentzian_fit(self):
        config_path = self._config("scan.json", {"seed": 5, "task": {"name": "sim.scan", "trials": 20000,
                                                                      "n_points": 15}})
        sim_dir = self.root / "scan"
        self.assertEqual(cli_dispatch(["sim", "scan", "--config", config_path, "--out", str(sim_dir)]), 0)
        fit_dir = self.root / "fit"
        self.assertEqual(cli_dispatch(["fit", "lorentzian", "--input", str(sim_dir / "scan.csv"),
                                       "--out", str(fit_dir)]), 0)
        self.assertTrue((fit_dir / "fit_lorentzian.json").exists())

    def test_toml_config_echo(self):
        path = self.root / "run.toml"
        path.write_text('seed = 2\n\n[task]\nname = "sim.microscopy"\nstep_um = 2.0\n')
        out = self.root / "map"
        self.assertEqual(cli_dispatch(["sim", "microscopy", "--config", str(path), "--out", str(out)]), 0)
        self.assertTrue((out / "config.resolved.toml").exists())
        rows = np.loadtxt(out / "transmission.csv", delimiter=",", skiprows=1)
        self.assertEqual(rows.shape, (16 * 16, 3))

    def test_figure2_report(self):
        """A densely doped particle gives a smooth 6 GHz inhomogeneous envelope."""
        config_path = self._config("fig2.json", {
            "seed": 1,
            "scenario": {
                "particle": {"diameter_mean_nm": 170.0, "diameter_sd_nm": 0.0,
                             "ion_density_per_um3": 2e7, "homwidth_base_hz": 1e8,
                             "homwidth_surface_hz": 1e8},
                "excitation": {"power_w": 2e-13},
            },
            "task": {"name": "report.figure2", "trials": 20000, "scan_trials": 6000,
                     "n_points": 41, "step_um": 3.0},
        })
        out = self.root / "fig2"
        self.assertEqual(cli_dispatch(["report", "figure2", "--config", config_path, "--out", str(out)]), 0)
        summary = json.loads((out / "summary.json").read_text())
        self.assertAlmostEqual(summary["cavity"]["waist_um"], 3.0, delta=0.06)
        self.assertTrue(summary["purcell"]["consistent"])
        envelope = summary["inhomogeneous"]["fit"]
        self.assertTrue(envelope["converged"])
        self.assertAlmostEqual(envelope["fwhm"]["value"] / 6e9, 1.0, delta=0.05)
        self.assertTrue((out / "microscopy" / "transmission.csv").exists())
        self.assertTrue((out / "inhomogeneous" / "scan.csv").exists())
        self.assertEqual(verify_run(out), [])

    def test_figure3_report(self):
        """The saturation series recovers P_sat, p_max and the zero-power width."""
        config_path = self._config("fig3.json", {
            "seed": 2,
            "task": {"name": "report.figure3", "trials": 200000, "scan_trials": 30000, "n_points": 21,
                     "powers_w": [3e-12, 6e-12, 10.7e-12, 20e-12, 40e-12, 100e-12]},
        })
        out = self.root / "fig3"
        self.assertEqual(cli_dispatch(["report", "figure3", "--config", config_path, "--out", str(out)]), 0)
        summary = json.loads((out / "summary.json").read_text())
        saturation = summary["saturation"]
        self.assertEqual(saturation["powers"], 6)
        self.assertTrue((out / "saturation" / "saturation.csv").exists())

        saturated = single_ion_scenario(power_w=1e3)
        p_max = expected_counts_per_trial(saturated) - saturated.chain.dark_rate_hz * saturated.timing.window_s
        self.assertAlmostEqual(saturation["rate"]["p_sat"]["value"] / 10.7e-12, 1.0, delta=0.1)
        self.assertAlmostEqual(saturation["rate"]["p_max"]["value"] / p_max, 1.0, delta=0.1)
        self.assertAlmostEqual(saturation["linewidth"]["linewidth0"]["value"] / 2.2e6, 1.0, delta=0.1)
        self.assertLess(summary["broadening_22pW"]["fit"]["reduced_chi2"], 2.0)


if __name__ == "__main__":
    unittest.main()
