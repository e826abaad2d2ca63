import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from physmodel.exceptions import InvalidModel
from protocols.sequences import REFERENCE_TIMINGS

from .artifacts import MANIFEST_NAME, ArtifactWriter, jsonable, verify_manifest
from .config import config_from_dict, load_config, parse_sweep
from .exceptions import ConfigInvalid, IoFailure, ManifestMismatch, UnknownVariable
from .pipeline import execute, run_experiment, sweep

BUNDLED = (
    "paper-nlpe",
    "paper-qubit",
    "paper-decay-tau2",
    "paper-decay-tau3",
    "rose-comparison",
    "afc-baseline",
)


def nlpe_config(**run):
    return config_from_dict({"run": {"experiment": "nlpe", "trials": 5000, **run}})


class ConfigTestCase(SimpleTestCase):
    """Test experiment file validation"""

    def test_bundled_configs_load(self):
        """Test every bundled config loads by name"""
        for name in BUNDLED:
            with self.subTest(name=name):
                config = load_config(name)
                self.assertEqual(config.name, name)

    def test_defaults(self):
        """Test a bare [run] table picks up the storage timings and defaults"""
        config = config_from_dict({"run": {"experiment": "nlpe"}})
        self.assertAlmostEqual(config.timings.t5, REFERENCE_TIMINGS.t5, delta=1e-15)
        self.assertEqual(config.run["trials"], 50_000)
        self.assertEqual(config.run["bin_width_ns"], 262.0)
        self.assertEqual(config.sequence["protocol"], "NLPE")
        self.assertEqual(config.output["formats"], ["csv", "json"])
        self.assertEqual(config.params.d, 0.6)

    def test_protocol_follows_experiment(self):
        """Test the qubit experiment defaults to the qubit readout sequence"""
        config = config_from_dict({"run": {"experiment": "qubit"}})
        self.assertEqual(config.sequence["protocol"], "QUBIT")

    def test_zero_trials(self):
        """Test zero trials is refused naming run.trials"""
        with self.assertRaises(ConfigInvalid) as ctx:
            config_from_dict({"run": {"experiment": "nlpe", "trials": 0}})
        self.assertTrue(str(ctx.exception).startswith("run.trials"))
        line = ctx.exception.one_line()
        self.assertTrue(line.startswith("CONFIG_INVALID run.trials"))

    def test_unknown_key(self):
        """Test unknown keys and tables are refused by name"""
        with self.assertRaisesMessage(ConfigInvalid, "run.shots"):
            config_from_dict({"run": {"experiment": "nlpe", "shots": 10}})
        with self.assertRaisesMessage(ConfigInvalid, "detector"):
            config_from_dict({"run": {"experiment": "nlpe"}, "detector": {}})

    def test_missing_run_table(self):
        """Test a file without [run] is refused"""
        with self.assertRaisesMessage(ConfigInvalid, "run.experiment"):
            config_from_dict({"model": {"d": 0.6}})

    def test_unknown_experiment(self):
        """Test an experiment kind outside the known ones"""
        with self.assertRaisesMessage(ConfigInvalid, "run.experiment"):
            config_from_dict({"run": {"experiment": "gem"}})

    def test_wrong_types(self):
        """Test fractional integers and text numbers are refused"""
        with self.assertRaisesMessage(ConfigInvalid, "run.trials"):
            config_from_dict({"run": {"experiment": "nlpe", "trials": 10.5}})
        with self.assertRaisesMessage(ConfigInvalid, "run.mu"):
            config_from_dict({"run": {"experiment": "nlpe", "mu": "lots"}})

    def test_timings_must_increase(self):
        """Test non-increasing pulse centers are refused on the sequence table"""
        data = {"run": {"experiment": "nlpe"}, "sequence": {"t2_us": 3.0}}
        with self.assertRaises(ConfigInvalid) as ctx:
            config_from_dict(data)
        self.assertTrue(str(ctx.exception).startswith("sequence"))

    def test_delay_range(self):
        """Test a decay grid that runs backwards"""
        run = {"experiment": "decay", "delay_start_us": 50.0, "delay_stop_us": 10.0}
        with self.assertRaisesMessage(ConfigInvalid, "run.delay_stop_us"):
            config_from_dict({"run": run})

    def test_protocol_mismatch(self):
        """Test a protocol the experiment does not run"""
        data = {"run": {"experiment": "qubit"}, "sequence": {"protocol": "NLPE"}}
        with self.assertRaisesMessage(ConfigInvalid, "sequence.protocol"):
            config_from_dict(data)

    def test_variant_needs_ions(self):
        """Test comparison echoes are only simulated on an ensemble"""
        data = {"run": {"experiment": "nlpe"}, "sequence": {"protocol": "FLE4"}}
        with self.assertRaisesMessage(ConfigInvalid, "run.ions"):
            config_from_dict(data)

    def test_material_overrides(self):
        """Test [model] overrides reach the material constants"""
        config = config_from_dict({"run": {"experiment": "afc"}, "model": {"d": 1.2}})
        self.assertEqual(config.params.d, 1.2)
        self.assertEqual(config.params.d_fc, 6.6)

    def test_invalid_material(self):
        """Test overrides still go through model validation"""
        with self.assertRaises(InvalidModel):
            config_from_dict(
                {"run": {"experiment": "afc"}, "model": {"gamma13": -1.0}}
            )

    def test_model_file(self):
        """Test a relative model file is read next to the config"""
        with tempfile.TemporaryDirectory() as tmp:
            (Path(tmp) / "crystal.toml").write_text("[material]\nd = 0.9\n")
            config_path = Path(tmp) / "run.toml"
            config_path.write_text(
                '[model]\nfile = "crystal.toml"\n\n[run]\nexperiment = "afc"\n'
            )
            config = load_config(config_path)
        self.assertEqual(config.params.d, 0.9)
        self.assertEqual(config.name, "run")

    def test_missing_files(self):
        """Test unreadable config and model files"""
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(IoFailure):
                load_config(Path(tmp) / "absent.toml")
            with self.assertRaisesMessage(IoFailure, "model.file"):
                config_from_dict(
                    {"run": {"experiment": "afc"}, "model": {"file": "absent.toml"}},
                    tmp,
                )

    def test_malformed_model_file(self):
        """Test bad model files surface as ConfigInvalid naming model.file"""
        cases = {
            "broken": "[material\n",
            "text": '[material]\nd = "abc"\n',
            "unknown": "[material]\ndepth = 0.6\n",
        }
        with tempfile.TemporaryDirectory() as tmp:
            for stem, text in cases.items():
                with self.subTest(stem=stem):
                    (Path(tmp) / f"{stem}.toml").write_text(text)
                    model = {"file": f"{stem}.toml"}
                    data = {"run": {"experiment": "afc"}, "model": model}
                    with self.assertRaisesMessage(ConfigInvalid, "model.file"):
                        config_from_dict(data, tmp)

    def test_broken_toml(self):
        """Test a file that is not TOML"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "broken.toml"
            path.write_text("[run\n")
            with self.assertRaises(ConfigInvalid):
                load_config(path)

    def test_with_value(self):
        """Test replacing one key revalidates and leaves the original alone"""
        config = nlpe_config()
        changed = config.with_value("model.d", 2.0).with_seed(9)
        self.assertEqual(changed.params.d, 2.0)
        self.assertEqual(changed.seed, 9)
        self.assertEqual(config.params.d, 0.6)
        self.assertEqual(config.seed, 0)
        with self.assertRaisesMessage(ConfigInvalid, "run.trials"):
            config.with_value("run.trials", 0)


class ParseSweepTestCase(SimpleTestCase):
    """Test the KEY=START:STOP:N sweep syntax"""

    def test_grid(self):
        """Test an evenly spaced grid including both ends"""
        key, grid = parse_sweep("model.d=0.1:2.0:20")
        self.assertEqual(key, "model.d")
        self.assertEqual(grid.size, 20)
        self.assertAlmostEqual(grid[0], 0.1)
        self.assertAlmostEqual(grid[-1], 2.0)

    def test_single_point(self):
        """Test N = 1 gives the start value"""
        _, grid = parse_sweep("run.mu=1.5:3.0:1")
        np.testing.assert_array_equal(grid, [1.5])

    def test_malformed(self):
        """Test malformed sweep specifications"""
        for text in ("model.d", "model.d=0.1:2.0", "model.d=a:b:3", "model.d=0:1:0"):
            with self.subTest(text=text), self.assertRaises(ConfigInvalid):
                parse_sweep(text)

    def test_unknown_variable(self):
        """Test keys that do not exist or are not numeric"""
        for text in ("model.depth=0:1:3", "laser.power=0:1:3", "run.vary=0:1:3"):
            with self.subTest(text=text), self.assertRaises(UnknownVariable):
                parse_sweep(text)


class ArtifactsTestCase(SimpleTestCase):
    """Test artifact writing and the manifest"""

    def write_bundle(self, directory):
        writer = ArtifactWriter(directory)
        writer.write_csv("table.csv", ("x", "y"), [(0.5, 1), (1.5, 2)])
        writer.write_json("doc.json", {"b": math.inf, "a": np.float64(0.25)})
        return writer.write_manifest()

    def test_formats(self):
        """Test floats are written with repr and non-finite JSON becomes null"""
        with tempfile.TemporaryDirectory() as tmp:
            self.write_bundle(tmp)
            self.assertEqual(
                (Path(tmp) / "table.csv").read_text(), "x,y\n0.5,1\n1.5,2\n"
            )
            document = json.loads((Path(tmp) / "doc.json").read_text())
        self.assertEqual(document, {"a": 0.25, "b": None})

    def test_manifest_lists_files(self):
        """Test the manifest names every file with its size and hash"""
        with tempfile.TemporaryDirectory() as tmp:
            manifest = json.loads(self.write_bundle(tmp).read_text())
            names = [entry["path"] for entry in manifest["files"]]
            self.assertEqual(names, ["doc.json", "table.csv"])
            for entry in manifest["files"]:
                size = (Path(tmp) / entry["path"]).stat().st_size
                self.assertEqual(entry["bytes"], size)
                self.assertEqual(len(entry["sha256"]), 64)
            self.assertEqual(verify_manifest(tmp), 2)

    def test_tampered_file(self):
        """Test a changed file no longer matches"""
        with tempfile.TemporaryDirectory() as tmp:
            self.write_bundle(tmp)
            (Path(tmp) / "table.csv").write_text("x,y\n0.5,1\n1.5,3\n")
            with self.assertRaisesMessage(ManifestMismatch, "table.csv"):
                verify_manifest(tmp)

    def test_missing_file(self):
        """Test a deleted file and a missing manifest"""
        with tempfile.TemporaryDirectory() as tmp:
            self.write_bundle(tmp)
            (Path(tmp) / "doc.json").unlink()
            with self.assertRaisesMessage(IoFailure, "doc.json"):
                verify_manifest(tmp)
            (Path(tmp) / MANIFEST_NAME).unlink()
            with self.assertRaises(IoFailure):
                verify_manifest(tmp)

    def test_csv_only(self):
        """Test JSON tables are skipped unless forced"""
        with tempfile.TemporaryDirectory() as tmp:
            writer = ArtifactWriter(tmp, formats=("csv",))
            self.assertIsNone(writer.write_json("doc.json", {}))
            self.assertIsNotNone(writer.write_json("summary.json", {}, always=True))

    def test_unwritable_directory(self):
        """Test a directory under a regular file cannot be created"""
        with tempfile.TemporaryDirectory() as tmp:
            blocker = Path(tmp) / "file"
            blocker.write_text("")
            with self.assertRaises(IoFailure):
                ArtifactWriter(blocker / "run")

    def test_jsonable(self):
        """Test numpy values become plain JSON types"""
        data = jsonable({1: np.arange(2), "x": (np.int64(3), np.bool_(True))})
        self.assertEqual(data, {"1": [0, 1], "x": [3, True]})


class NlpeExperimentTestCase(SimpleTestCase):
    """Test the photon echo experiment"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.config = load_config("paper-nlpe")
        cls.result = execute(cls.config)

    def test_echo_and_efficiency(self):
        """Test the echo lands at 21.7 μs with about 10% efficiency"""
        summary = self.result.summary
        self.assertAlmostEqual(summary["echo_time"], 21.7e-6, delta=1e-12)
        self.assertAlmostEqual(summary["eta"], 0.101, delta=0.003)
        self.assertIn("echo at 21.7 μs", self.result.summary_line)
        self.assertIn("η = 10.", self.result.summary_line)

    def test_bundled_ensemble_echo(self):
        """Test the prepared-feature ensemble echoes inside the echo window"""
        summary = self.result.summary
        window = self.config.sequence["window_us"] * 1e-6
        self.assertEqual(self.config.run["ions"], 20000)
        self.assertLessEqual(abs(summary["echo_peak_time"] - 21.7e-6), window / 2)
        self.assertAlmostEqual(summary["echo_peak_time"], 21.7e-6, delta=0.3e-6)
        self.assertGreater(summary["eta_window_ensemble"], 0.0)
        self.assertIn("spectrum.csv", self.result.tables)
        self.assertIn("emission_echo.csv", self.result.tables)
        self.assertIn("simulated peak at", self.result.summary_line)

    def test_histogram(self):
        """Test six 262 ns bins across the echo window with a finite SNR"""
        header, rows = self.result.tables["histogram.csv"]
        self.assertEqual(header, ("bin_start", "counts"))
        self.assertEqual(len(rows), 6)
        self.assertAlmostEqual(rows[1][0] - rows[0][0], 262e-9, delta=1e-15)
        summary = self.result.summary
        self.assertGreater(summary["signal_counts"], summary["noise_counts"])
        self.assertTrue(math.isfinite(summary["snr"]))
        self.assertGreater(summary["snr"], 10.0)
        self.assertAlmostEqual(
            summary["eta_window"], summary["eta"] * summary["capture"]
        )

    def test_noise_budget(self):
        """Test the budget covers the echo and monitor windows"""
        budget = self.result.documents["budget.json"]
        self.assertEqual(set(budget), {"echo", "monitor"})
        self.assertAlmostEqual(
            budget["echo"]["after_filter"], self.result.summary["noise"]
        )

    def test_noiseless_window(self):
        """Test a window without noise counts reports an unbounded SNR"""
        config = config_from_dict(
            {
                "run": {"experiment": "nlpe", "trials": 5000, "eta_control": 1.0},
                "model": {"t1_excited": 1e9},
            }
        )
        with self.assertLogs("experiments.pipeline", "WARNING"):
            summary = execute(config).summary
        self.assertEqual(summary["noise_counts"], 0)
        self.assertEqual(summary["snr"], math.inf)

    def test_byte_identical_reruns(self):
        """Test the same config and seed write identical files"""
        config = nlpe_config()
        with tempfile.TemporaryDirectory() as tmp:
            first, second = Path(tmp) / "first", Path(tmp) / "second"
            run_experiment(config, first)
            run_experiment(config, second)
            names = sorted(path.name for path in first.iterdir())
            self.assertIn(MANIFEST_NAME, names)
            self.assertIn("summary.json", names)
            for name in names:
                self.assertEqual(
                    (first / name).read_bytes(), (second / name).read_bytes()
                )

    def test_thread_count(self):
        """Test histograms do not depend on the worker count"""
        config = nlpe_config()
        with override_settings(ECHO_LAB_THREADS=1):
            single = execute(config)
        with override_settings(ECHO_LAB_THREADS=3):
            threaded = execute(config)
        self.assertEqual(
            single.tables["histogram.csv"], threaded.tables["histogram.csv"]
        )

    def test_seed_changes_counts(self):
        """Test another seed draws other counts"""
        config = nlpe_config()
        first = execute(config).tables["histogram.csv"]
        second = execute(config.with_seed(1)).tables["histogram.csv"]
        self.assertNotEqual(first, second)

    def test_csv_only_output(self):
        """Test output.formats limits the tables written"""
        config = config_from_dict(
            {
                "run": {"experiment": "nlpe", "trials": 1000},
                "output": {"formats": ["csv"]},
            }
        )
        with tempfile.TemporaryDirectory() as tmp:
            run_experiment(config, tmp)
            names = {path.name for path in Path(tmp).iterdir()}
        self.assertIn("histogram.csv", names)
        self.assertNotIn("budget.json", names)
        self.assertIn("summary.json", names)

    def test_output_directory(self):
        """Test output.directory is resolved next to the config"""
        with tempfile.TemporaryDirectory() as tmp:
            config = config_from_dict(
                {
                    "run": {"experiment": "afc"},
                    "output": {"directory": "results"},
                },
                tmp,
            )
            _, directory = run_experiment(config)
            self.assertEqual(directory, Path(tmp) / "results")
            self.assertTrue((directory / MANIFEST_NAME).exists())


class EnsembleExperimentTestCase(SimpleTestCase):
    """Test the photon echo experiment on a Monte-Carlo ensemble"""

    def test_ensemble_echo(self):
        """Test the simulated echo peaks near t5 and emission is written"""
        config = nlpe_config(ions=2000, grid_step_ns=40.0)
        result = execute(config)
        summary = result.summary
        self.assertAlmostEqual(summary["echo_peak_time"], 21.7e-6, delta=0.3e-6)
        self.assertAlmostEqual(summary["echo_time"], 21.7e-6, delta=1e-12)
        self.assertGreater(summary["eta_window_ensemble"], 0.0)
        self.assertIn("emission_echo.csv", result.tables)
        self.assertIn("emission_monitor.csv", result.tables)
        header, rows = result.tables["emission_echo.csv"]
        self.assertEqual(header, ("time", "Re", "Im", "intensity"))
        self.assertEqual(len(rows[0]), 4)

    def test_variant_without_closed_form(self):
        """Test a two-pulse echo reports only the ensemble efficiency"""
        config = config_from_dict(
            {
                "run": {"experiment": "nlpe", "trials": 1000, "ions": 1000},
                "sequence": {"protocol": "PE2", "t1_us": 4.1},
            }
        )
        result = execute(config)
        self.assertIsNone(result.summary["eta"])
        self.assertAlmostEqual(result.summary["echo_peak_time"], 8.2e-6, delta=0.2e-6)
        self.assertNotIn("η = ", result.summary_line.replace("window η = ", ""))


class OtherExperimentsTestCase(SimpleTestCase):
    """Test the decay, ROSE, AFC and qubit experiments"""

    def test_decay_tau2(self):
        """Test the spin decay fit recovers Γ13 within 1%"""
        result = execute(load_config("paper-decay-tau2"))
        self.assertAlmostEqual(result.summary["gamma"], 5.6e3, delta=56.0)
        _, rows = result.tables["decay.csv"]
        self.assertEqual(len(rows), 25)
        self.assertTrue(all(a[1] > b[1] for a, b in zip(rows, rows[1:])))

    def test_decay_tau3(self):
        """Test the optical decay fit recovers Γ and γ within 2%"""
        result = execute(load_config("paper-decay-tau3"))
        self.assertAlmostEqual(result.summary["gamma"], 18.6e3, delta=372.0)
        self.assertAlmostEqual(result.summary["gamma_opt"], 12e3, delta=240.0)
        self.assertIn("γ = ", result.summary_line)

    def test_rose(self):
        """Test ROSE is unfilterable and at least 30 times noisier"""
        result = execute(load_config("rose-comparison"))
        self.assertGreaterEqual(result.summary["ratio"], 30.0)
        self.assertFalse(result.summary["rose_filterable"])
        self.assertTrue(result.summary["nlpe_filterable"])

    def test_afc(self):
        """Test the comb optimum and its scan"""
        result = execute(load_config("afc-baseline"))
        self.assertAlmostEqual(result.summary["eta"], 0.027, delta=0.001)
        self.assertGreaterEqual(result.summary["finesse"], 2.0)
        self.assertLessEqual(result.summary["finesse"], 2.3)
        _, rows = result.tables["afc.csv"]
        self.assertEqual(len(rows), 400)
        self.assertLessEqual(max(row[1] for row in rows), result.summary["eta"] + 1e-12)

    def test_qubit(self):
        """Test a short qubit run beats the classical bound"""
        config = load_config("paper-qubit").with_value("run.trials", 50_000)
        result = execute(config)
        summary = result.summary
        self.assertAlmostEqual(summary["classical_bound"], 0.880, delta=0.005)
        self.assertGreater(summary["f_avg"], 0.9)
        self.assertTrue(summary["beats_classical"])
        _, fringe_rows = result.tables["fringes.csv"]
        self.assertEqual(len(fringe_rows), 16)
        self.assertIn("histogram_e.csv", result.tables)
        self.assertIn("histogram_l.csv", result.tables)
        self.assertIn("F_avg = ", result.summary_line)


class SweepTestCase(SimpleTestCase):
    """Test sweeps over one configuration key"""

    def test_depth_sweep_peaks_at_two(self):
        """Test the η column peaks at d = 2 where d²e^-d is largest"""
        config = nlpe_config(trials=1000)
        with tempfile.TemporaryDirectory() as tmp:
            grid = np.linspace(0.5, 3.5, 13)
            outcome, directory = sweep(config, "model.d", grid, tmp)
            lines = (directory / "sweep.csv").read_text().splitlines()
            self.assertEqual(verify_manifest(directory), 2)
        self.assertEqual(lines[0], "model.d,eta,snr")
        self.assertEqual(len(lines), 14)
        etas = [row[1] for row in outcome.rows()]
        self.assertAlmostEqual(outcome.grid[int(np.argmax(etas))], 2.0)

    def test_single_point_matches_run(self):
        """Test a one-point sweep row equals the plain run summary"""
        config = nlpe_config(trials=1000)
        with tempfile.TemporaryDirectory() as tmp:
            outcome, _ = sweep(config, "model.d", [0.6], tmp)
        summary = execute(config).summary
        self.assertEqual(outcome.rows(), [(0.6, summary["eta"], summary["snr"])])

    def test_spin_storage_sweep_decays(self):
        """Test η falls as t4 moves away from t1"""
        config = nlpe_config(trials=1000)
        with tempfile.TemporaryDirectory() as tmp:
            grid = np.linspace(17.4, 60.0, 8)
            outcome, _ = sweep(config, "sequence.t4_us", grid, tmp)
        etas = [row[1] for row in outcome.rows()]
        self.assertTrue(all(a > b for a, b in zip(etas, etas[1:])))

    def test_qubit_sweep_reports_fidelity(self):
        """Test qubit sweeps carry the F_avg column"""
        config = load_config("paper-qubit").with_value("run.trials", 2000)
        with tempfile.TemporaryDirectory() as tmp:
            outcome, _ = sweep(config, "run.mu", [2.29], tmp)
        self.assertEqual(outcome.metrics, ("eta", "snr", "f_avg"))

    def test_bad_sweeps(self):
        """Test unknown variables and empty grids"""
        config = nlpe_config()
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(UnknownVariable):
                sweep(config, "model.depth", [1.0], tmp)
            with self.assertRaises(ConfigInvalid):
                sweep(config, "model.d", [], tmp)


class CommandTestCase(SimpleTestCase):
    """Test the run_experiment and verify_manifest commands"""

    def test_run_bundled(self):
        """Test a bundled config runs, prints its summary and verifies"""
        out = StringIO()
        with tempfile.TemporaryDirectory() as tmp:
            call_command("run_experiment", config="afc-baseline", out=tmp, stdout=out)
            self.assertIn("afc: F* = ", out.getvalue())
            check = StringIO()
            call_command("verify_manifest", tmp, stdout=check)
            self.assertIn("files match the manifest", check.getvalue())

    def test_quiet(self):
        """Test --quiet prints nothing"""
        out = StringIO()
        with tempfile.TemporaryDirectory() as tmp:
            call_command(
                "run_experiment", config="afc-baseline", out=tmp, quiet=True, stdout=out
            )
        self.assertEqual(out.getvalue(), "")

    def test_seed_override(self):
        """Test --seed replaces run.seed"""
        with tempfile.TemporaryDirectory() as tmp:
            config_path = Path(tmp) / "short.toml"
            config_path.write_text(
                '[run]\nexperiment = "nlpe"\ntrials = 500\nseed = 3\n'
            )
            call_command(
                "run_experiment",
                config=str(config_path),
                seed=5,
                out=str(Path(tmp) / "out"),
                stdout=StringIO(),
            )
            summary = json.loads((Path(tmp) / "out" / "summary.json").read_text())
        self.assertEqual(summary["seed"], 5)
        self.assertEqual(summary["experiment"], "nlpe")

    def test_sweep_flag(self):
        """Test --sweep writes the sweep table"""
        out = StringIO()
        with tempfile.TemporaryDirectory() as tmp:
            call_command(
                "run_experiment",
                config="afc-baseline",
                sweep="model.d=0.5:1.5:3",
                out=tmp,
                stdout=out,
            )
            lines = (Path(tmp) / "sweep.csv").read_text().splitlines()
        self.assertEqual(len(lines), 4)
        self.assertIn("swept model.d over 3 points", out.getvalue())

    def test_invalid_config(self):
        """Test a failing config exits with a one-line error code"""
        with tempfile.TemporaryDirectory() as tmp:
            config_path = Path(tmp) / "bad.toml"
            config_path.write_text('[run]\nexperiment = "nlpe"\ntrials = 0\n')
            with self.assertRaises(CommandError) as ctx:
                call_command("run_experiment", config=str(config_path), out=tmp)
        message = str(ctx.exception)
        self.assertTrue(message.startswith("CONFIG_INVALID run.trials"))
        self.assertNotIn("\n", message)

    def test_malformed_model_file(self):
        """Test a model value that is not a number exits with one line"""
        with tempfile.TemporaryDirectory() as tmp:
            (Path(tmp) / "crystal.toml").write_text('[material]\nd = "abc"\n')
            config_path = Path(tmp) / "run.toml"
            config_path.write_text(
                '[model]\nfile = "crystal.toml"\n\n[run]\nexperiment = "afc"\n'
            )
            with self.assertRaises(CommandError) as ctx:
                call_command("run_experiment", config=str(config_path), out=tmp)
        message = str(ctx.exception)
        self.assertTrue(message.startswith("CONFIG_INVALID model.file"))
        self.assertIn("material.d: expected a number", message)
        self.assertNotIn("\n", message)

    def test_missing_config(self):
        """Test a missing config file is an I/O failure"""
        with self.assertRaises(CommandError) as ctx:
            call_command("run_experiment", config="/nonexistent/run.toml")
        self.assertTrue(str(ctx.exception).startswith("IO_FAILURE"))

    def test_unknown_sweep_variable(self):
        """Test --sweep with a key that does not exist"""
        with self.assertRaises(CommandError) as ctx:
            call_command(
                "run_experiment", config="afc-baseline", sweep="model.depth=0:1:2"
            )
        self.assertTrue(str(ctx.exception).startswith("UNKNOWN_VARIABLE model.depth"))

    def test_verify_tampered(self):
        """Test verify_manifest fails on a changed artifact"""
        with tempfile.TemporaryDirectory() as tmp:
            call_command(
                "run_experiment", config="afc-baseline", out=tmp, stdout=StringIO()
            )
            (Path(tmp) / "afc.csv").write_text("finesse,efficiency\n")
            with self.assertRaises(CommandError) as ctx:
                call_command("verify_manifest", tmp)
        self.assertTrue(str(ctx.exception).startswith("MANIFEST_MISMATCH"))
