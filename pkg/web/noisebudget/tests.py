import json
import math

import numpy as np
from django.test import SimpleTestCase

from ionensemble.engine import run_sequence
from ionensemble.sampling import sample_ensemble
from physmodel.geometry import Geometry
from physmodel.material import MaterialParams
from physmodel.spectra import SpectralProfile
from protocols.sequences import (
    ECHO_WINDOW,
    MONITOR_WINDOW,
    REFERENCE_TIMINGS,
    NlpeTimings,
    Sequence,
    build_nlpe,
)

from .budget import (
    RESIDUAL_NOISE_TARGET,
    calibrate_branching,
    echo_window_noise,
    filtered_noise,
    inverted_medium_noise,
    residual_inversion,
    rose_noise_comparison,
    safe_snr,
    snr,
    window_noise,
)
from .exceptions import BranchingUnreachable, MissingPopulationTrace, ZeroNoise
from .traces import pulse_label, population_trace

ETA_CONTROL = 0.938


class PerModeNoiseTestCase(SimpleTestCase):
    """Test the inverted-medium and filter formulas"""

    def test_inverted_medium(self):
        """Test e^d - 1 at zero, reference depth and small depth"""
        self.assertEqual(inverted_medium_noise(0.0), 0.0)
        self.assertAlmostEqual(inverted_medium_noise(0.6), 0.8221, delta=1e-4)
        self.assertAlmostEqual(inverted_medium_noise(0.02), 0.02, delta=0.01 * 0.02)
        with self.assertRaises(ValueError):
            inverted_medium_noise(-0.1)

    def test_filtered(self):
        """Test the filter crystal attenuation"""
        self.assertAlmostEqual(
            filtered_noise(math.expm1(0.6), 6.6), 1.12e-3, delta=0.01e-3
        )
        self.assertEqual(filtered_noise(0.3, 0.0), 0.3)
        self.assertEqual(filtered_noise(0.0, 6.6), 0.0)


class WindowNoiseTestCase(SimpleTestCase):
    """Test per-window noise budgets"""

    def setUp(self):
        self.params = MaterialParams()
        self.seq = build_nlpe(REFERENCE_TIMINGS, monitor_window=True)

    def budget(self, params=None, eta_control=1.0, seq=None, dark_counts=0.0):
        params = params or self.params
        seq = seq or self.seq
        trace = population_trace(seq, params, eta_control)
        return window_noise(seq, trace, params, dark_counts)

    def test_first_window_is_filterable(self):
        """Test the window after the first π pair against the measured 9e-4"""
        budget = self.budget(eta_control=ETA_CONTROL)
        total = budget.total(MONITOR_WINDOW)
        self.assertAlmostEqual(total, 1.05e-3, delta=0.02e-3)
        self.assertLess(total / 9e-4, 1.3)
        entries = budget.entries_for(MONITOR_WINDOW)
        dominant = max(entries, key=lambda e: e.before_filter)
        self.assertTrue(dominant.filterable)

    def test_ideal_controls_first_window(self):
        """Test perfect controls put (e^d - 1)e^-dfc in the first window"""
        total = self.budget().total(MONITOR_WINDOW)
        self.assertAlmostEqual(total, 1.12e-3, delta=0.02e-3)

    def test_no_decay_no_echo_window_noise(self):
        """Test T1 → ∞ leaves the echo window dark"""
        params = self.params.with_changes(t1_excited=math.inf)
        self.assertEqual(self.budget(params).total(ECHO_WINDOW), 0.0)

    def test_one_mode_per_window(self):
        """Test the window width does not scale the noise of a window"""
        narrow = build_nlpe(REFERENCE_TIMINGS, window_width=0.8e-6, monitor_window=True)
        wide = build_nlpe(REFERENCE_TIMINGS, window_width=2.4e-6, monitor_window=True)
        for label in (ECHO_WINDOW, MONITOR_WINDOW):
            with self.subTest(label=label):
                self.assertAlmostEqual(
                    self.budget(eta_control=ETA_CONTROL, seq=narrow).total(label),
                    self.budget(eta_control=ETA_CONTROL, seq=wide).total(label),
                    delta=1e-15,
                )

    def test_filter_never_adds(self):
        """Test every entry after the filter is at most the entry before it"""
        budget = self.budget(eta_control=ETA_CONTROL, dark_counts=1e-5)
        for entry in budget.entries:
            self.assertGreaterEqual(entry.before_filter, 0.0)
            self.assertLessEqual(entry.after_filter, entry.before_filter)

    def test_dark_counts(self):
        """Test dark counts are added unfiltered"""
        clean = self.budget().total(ECHO_WINDOW)
        dark = self.budget(dark_counts=2e-4).total(ECHO_WINDOW)
        self.assertAlmostEqual(dark - clean, 2e-4, delta=1e-15)

    def test_monotone_in_optical_storage_and_branching(self):
        """Test echo-window noise grows with t3 - t2 and with the branching fraction"""
        longer = build_nlpe(NlpeTimings(0.0, 4.1e-6, 6.6e-6, 17.0e-6, 19.4e-6))
        short = self.budget(seq=self.seq).total(ECHO_WINDOW)
        self.assertGreater(self.budget(seq=longer).total(ECHO_WINDOW), short)
        more = self.params.with_changes(branching_e3_to_g3=0.9)
        self.assertGreater(self.budget(params=more).total(ECHO_WINDOW), short)

    def test_missing_window(self):
        """Test a trace without the monitor window snapshot"""
        trace = population_trace(build_nlpe(REFERENCE_TIMINGS), self.params)
        with self.assertRaises(MissingPopulationTrace):
            window_noise(self.seq, trace, self.params)

    def test_json_export(self):
        """Test the budget exports as JSON keyed by window label"""
        data = json.loads(self.budget(eta_control=ETA_CONTROL).to_json())
        self.assertEqual(set(data), {MONITOR_WINDOW, ECHO_WINDOW})
        echo = data[ECHO_WINDOW]
        self.assertAlmostEqual(
            echo["after_filter"], sum(e["after_filter"] for e in echo["entries"])
        )
        self.assertEqual({e["channel"] for e in echo["entries"]}, {"f13", "f15"})


class CalibrateBranchingTestCase(SimpleTestCase):
    """Test the branching calibration against the residual noise target"""

    def test_reference_target(self):
        """Test the calibrated fraction reproduces 1.5e-3 photons per trial"""
        params = MaterialParams()
        seq = build_nlpe(REFERENCE_TIMINGS)
        branching = calibrate_branching(seq, params, ETA_CONTROL)
        self.assertAlmostEqual(branching, 0.416, delta=0.02)
        calibrated = params.with_changes(branching_e3_to_g3=branching)
        self.assertAlmostEqual(
            echo_window_noise(seq, calibrated, ETA_CONTROL),
            RESIDUAL_NOISE_TARGET,
            delta=1e-12,
        )

    def test_unreachable(self):
        """Test targets beyond full branching or without decay"""
        seq = build_nlpe(REFERENCE_TIMINGS)
        with self.assertRaises(BranchingUnreachable):
            calibrate_branching(seq, MaterialParams(), target=1.0)
        lossless = MaterialParams().with_changes(t1_excited=math.inf)
        with self.assertRaises(BranchingUnreachable):
            calibrate_branching(seq, lossless)


class SnrTestCase(SimpleTestCase):
    """Test signal-to-noise ratios"""

    def test_reference_snr(self):
        """Test 1.17 photons at 6.4% over 1.76e-3 noise gives 42.5"""
        self.assertAlmostEqual(snr(1.17 * 0.064, 1.76e-3), 42.5, delta=0.1)
        self.assertEqual(snr(2e-3, 2e-3), 1.0)

    def test_zero_noise(self):
        """Test a noiseless window raises, or returns the infinite marker"""
        with self.assertRaises(ZeroNoise):
            snr(0.07, 0.0)
        self.assertEqual(safe_snr(0.07, 0.0), math.inf)
        self.assertEqual(ZeroNoise.marker, math.inf)


class RoseComparisonTestCase(SimpleTestCase):
    """Test the ROSE versus NLPE noise comparison"""

    def test_no_residual_inversion(self):
        """Test ROSE noise vanishes with perfect inversion"""
        comparison = rose_noise_comparison(
            MaterialParams(), 0.0, build_nlpe(REFERENCE_TIMINGS), ETA_CONTROL
        )
        self.assertEqual(comparison.rose_noise, 0.0)
        self.assertEqual(comparison.ratio, 0.0)

    def test_rose_is_far_noisier(self):
        """Test imperfect controls make ROSE at least 30 times noisier"""
        residual = residual_inversion(ETA_CONTROL)
        comparison = rose_noise_comparison(
            MaterialParams(), residual, build_nlpe(REFERENCE_TIMINGS), ETA_CONTROL
        )
        self.assertGreaterEqual(comparison.ratio, 30.0)
        self.assertFalse(comparison.rose_filterable)
        self.assertTrue(comparison.nlpe_filterable)

    def test_residual_inversion(self):
        """Test the residual population of two imperfect π pulses"""
        self.assertEqual(residual_inversion(1.0), 0.0)
        self.assertEqual(residual_inversion(0.5), 1.0)
        self.assertAlmostEqual(residual_inversion(0.938), 0.2326, delta=1e-4)

    def test_residual_range(self):
        """Test a residual inversion outside [0, 1]"""
        with self.assertRaises(ValueError):
            rose_noise_comparison(MaterialParams(), 1.5, build_nlpe(REFERENCE_TIMINGS))


class PopulationTraceTestCase(SimpleTestCase):
    """Test the rate-bookkeeping trace"""

    def test_labels(self):
        """Test one snapshot per pulse and per window"""
        seq = build_nlpe(REFERENCE_TIMINGS, monitor_window=True)
        trace = population_trace(seq, MaterialParams())
        self.assertEqual(len(trace.labels), 7)
        self.assertTrue(trace.covers(pulse_label(2, "f13")))
        self.assertAlmostEqual(trace.level(pulse_label(2, "f13"), "e3"), 1.0)

    def test_matches_monte_carlo_without_signal(self):
        """Test the ensemble trace of the control pulses equals the bookkeeping"""
        params = MaterialParams()
        geometry = Geometry()
        full = build_nlpe(REFERENCE_TIMINGS, geometry=geometry, monitor_window=True)
        seq = Sequence(full.pulses[1:], full.detection_windows, geometry)
        ens = sample_ensemble(
            300, SpectralProfile.gaussian(700e3), params, geometry, seed=4
        )
        simulated = run_sequence(ens, seq, params, workers=1).trace
        expected = population_trace(seq, params)
        self.assertEqual(simulated.labels, expected.labels)
        np.testing.assert_allclose(
            simulated.populations, expected.populations, atol=1e-12
        )
