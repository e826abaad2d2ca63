import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy.stats import poisson

from noisebudget.exceptions import ZeroNoise

from .classical import (
    CLASSICAL_RESPONSE_BUDGET,
    classical_bound,
    classical_bound_bruteforce,
)
from .counting import (
    count_histogram,
    empirical_snr,
    expected_counts,
    sample_trial_counts,
    simulate_counts,
    uniform_edges,
    window_counts,
)
from .exceptions import InvalidBudget, InvalidQubit, MissingBasis, NoCounts
from .fidelity import (
    EARLY_BIN,
    INPUT_STATES,
    LATE_BIN,
    MIDDLE_BIN,
    TimeBinQubit,
    count_fidelity,
    fidelity_basis,
    fidelity_from_visibility,
    fidelity_report,
    fit_fringe,
    temporal_beamsplitter_readout,
    visibility,
)
from .qubit import echo_bin_fractions, simulate_qubit_experiment, window_capture

TABLE_COUNTS = {"e": (939, 61), "l": (970, 30), "+": (959, 41), "+i": (942, 58)}


def echo_shape(bins: int, bin_width: float = 262e-9) -> np.ndarray:
    centers = (np.arange(bins) + 0.5) * bin_width
    sigma = 2.62e-6 / (4 * math.sqrt(math.log(2)))
    shape = np.exp(-0.5 * ((centers - centers.mean()) / sigma) ** 2)
    return shape / shape.sum()


class SimulateCountsTestCase(SimpleTestCase):
    """Test the photon-counting Monte-Carlo"""

    def test_no_light_no_counts(self):
        """Test μ = 0 without noise gives an empty histogram"""
        histogram = simulate_counts(echo_shape(6), 0.0, 0.0, 0.1, 1000, seed=1)
        self.assertEqual(histogram.total, 0)
        self.assertFalse(histogram.with_input)

    def test_total_counts(self):
        """Test the summed counts match trials·(μη + noise) within 3σ"""
        trials = 50_000
        histogram = simulate_counts(echo_shape(6), 1e-3, 1.17, 0.064, trials, seed=2)
        expected = trials * (1.17 * 0.064 + 6 * 1e-3)
        self.assertLess(abs(histogram.total - expected), 3 * math.sqrt(expected))

    def test_measured_snr(self):
        """Test μ = 1.17 at 6.4% over 1.76e-3 noise per window gives SNR 42.5 ± 7.5"""
        shape = echo_shape(6)
        edges = uniform_edges(6)
        noise = 1.76e-3 / 6
        trials = 400_000
        signal = simulate_counts(shape, noise, 1.17, 0.064, trials, 5, edges, stream=0)
        dark = simulate_counts(shape, noise, 0.0, 0.064, trials, 5, edges, stream=1)
        ratio, error = empirical_snr(signal, dark, edges[0], edges[-1])
        self.assertAlmostEqual(ratio, 42.5, delta=7.5)
        self.assertGreater(error, 0.0)

    def test_zero_noise_snr(self):
        """Test a window without noise counts raises ZeroNoise"""
        shape = echo_shape(6)
        signal = simulate_counts(shape, 0.0, 1.0, 0.5, 100, seed=3)
        dark = simulate_counts(shape, 0.0, 0.0, 0.5, 100, seed=3, stream=1)
        with self.assertRaises(ZeroNoise):
            empirical_snr(signal, dark, 0.0, 1.0)

    def test_poisson_variance(self):
        """Test per-bin variance equals the mean within 5σ over 50000 trials"""
        means = np.array([0.5, 2.0])
        trials = 50_000
        draws = sample_trial_counts(means, trials, seed=7)
        self.assertEqual(draws.shape, (trials, 2))
        for column, mean in zip(draws.T, means):
            tolerance = 5 * math.sqrt((mean + 2 * mean**2) / trials)
            self.assertAlmostEqual(column.var(), mean, delta=tolerance)

    def test_summed_equals_per_trial(self):
        """Test histogram sums match the per-trial draws for any thread count"""
        means = expected_counts(echo_shape(4), 0.01, 2.0, 0.1)
        draws = sample_trial_counts(means, 20_000, seed=9)
        inline = count_histogram(means, 20_000, seed=9, workers=1)
        threaded = count_histogram(means, 20_000, seed=9, workers=3)
        np.testing.assert_array_equal(inline, draws.sum(axis=0))
        np.testing.assert_array_equal(inline, threaded)

    def test_photon_cap(self):
        """Test capped counts never exceed trials times the cap"""
        histogram = simulate_counts([1.0], 0.0, 50.0, 1.0, 100, seed=4, max_photons=2)
        self.assertLessEqual(histogram.total, 200)

    def test_window_counts(self):
        """Test bins are selected by their centers"""
        histogram = simulate_counts(echo_shape(6), 0.05, 1.0, 0.5, 1000, seed=6)
        edges = histogram.bin_edges
        self.assertEqual(window_counts(histogram, edges[0], edges[-1]), histogram.total)
        self.assertEqual(
            window_counts(histogram, edges[2], edges[3]), int(histogram.counts[2])
        )

    def test_csv_export(self):
        """Test the histogram CSV lists bin starts and counts"""
        histogram = simulate_counts(echo_shape(6), 0.05, 1.0, 0.5, 1000, seed=6)
        with tempfile.TemporaryDirectory() as tmp:
            lines = histogram.to_csv(Path(tmp) / "h.csv").read_text().splitlines()
        self.assertEqual(lines[0], "bin_start,counts")
        self.assertEqual(len(lines), 7)
        self.assertEqual(int(lines[3].split(",")[1]), int(histogram.counts[2]))
        self.assertEqual(histogram.metadata()["trials"], 1000)


class BasisFidelityTestCase(SimpleTestCase):
    """Test fidelities from correct and wrong bin counts"""

    def test_noiseless(self):
        """Test no counts in the wrong bin gives F = 1"""
        self.assertEqual(fidelity_basis(120, 0, "e"), 1.0)
        self.assertEqual(fidelity_basis(0, 120, "l"), 1.0)

    def test_signal_to_noise(self):
        """Test F = (S + N)/(S + 2N) at S/N = 14.4"""
        noise = 100.0
        signal = 14.4 * noise
        self.assertAlmostEqual(
            fidelity_basis(signal + noise, noise, "e"), 0.939, delta=5e-4
        )

    def test_pure_noise(self):
        """Test equal counts in both bins is a coin flip"""
        self.assertEqual(count_fidelity(50, 50), 0.5)

    def test_increasing_in_snr(self):
        """Test the fidelity grows with the signal-to-noise ratio"""
        values = [count_fidelity(s + 10.0, 10.0) for s in (0.0, 5.0, 50.0, 500.0)]
        self.assertEqual(values, sorted(values))
        for ratio in (0.5, 3.0, 20.0):
            self.assertAlmostEqual(
                count_fidelity(ratio + 1.0, 1.0), (ratio + 1) / (ratio + 2)
            )

    def test_errors(self):
        """Test empty bins and unknown bases"""
        with self.assertRaises(NoCounts):
            fidelity_basis(0, 0, "e")
        with self.assertRaises(InvalidQubit):
            fidelity_basis(3, 1, "+")


class BeamsplitterReadoutTestCase(SimpleTestCase):
    """Test the three-bin readout of the temporal beam splitter"""

    def setUp(self):
        self.balanced = TimeBinQubit.for_input("+", 2.0, 1.6e-6)

    def test_constructive(self):
        """Test the in-phase middle bin holds twice the signal of both outer bins"""
        bins = temporal_beamsplitter_readout(self.balanced, 0.0, 0.1, 0.0)
        self.assertAlmostEqual(
            bins[MIDDLE_BIN], 2 * (bins[EARLY_BIN] + bins[LATE_BIN]), delta=1e-12
        )

    def test_destructive(self):
        """Test a phase difference of π empties the middle bin down to the noise"""
        bins = temporal_beamsplitter_readout(self.balanced, math.pi, 0.1, 2e-3)
        self.assertAlmostEqual(bins[MIDDLE_BIN], 2e-3, delta=1e-12)

    def test_noiseless_fringe(self):
        """Test the fitted visibility of a noiseless phase sweep is one"""
        phases = np.linspace(0.0, 2 * math.pi, 8, endpoint=False)
        qubit = TimeBinQubit.for_input("+i", 2.0, 1.6e-6)
        middle = [
            temporal_beamsplitter_readout(qubit, p, 0.1, 0.0)[MIDDLE_BIN]
            for p in phases
        ]
        c_max, c_min = fit_fringe(phases, np.array(middle))
        self.assertAlmostEqual(visibility(c_max, c_min), 1.0, delta=1e-6)

    def test_input_set(self):
        """Test the four inputs are |e⟩, |l⟩, |+⟩ and |+i⟩"""
        self.assertEqual(INPUT_STATES, ("e", "l", "+", "+i"))
        qubit = TimeBinQubit.for_input("+i", 2.0, 1.6e-6)
        self.assertAlmostEqual(qubit.phase1, math.pi / 2, delta=1e-15)
        self.assertEqual(qubit.alpha, qubit.beta)
        with self.assertRaises(InvalidQubit):
            TimeBinQubit.for_input("-", 2.0, 1.6e-6)

    def test_visibility_to_fidelity(self):
        """Test V = 0.918 gives F = 0.959"""
        self.assertAlmostEqual(fidelity_from_visibility(0.918), 0.959, delta=1e-12)

    def test_invalid_qubit(self):
        """Test unnormalized amplitudes and negative photon numbers"""
        with self.assertRaises(InvalidQubit):
            TimeBinQubit(1.6e-6, 0.0, 1.0, 1.0, 1.0)
        with self.assertRaises(InvalidQubit):
            TimeBinQubit(1.6e-6, 0.0, 1.0, 0.0, -1.0)


class FidelityReportTestCase(SimpleTestCase):
    """Test the average fidelity over four inputs"""

    def test_table_counts(self):
        """Test counts reconstructed from the measured fidelities give 95.2%"""
        report = fidelity_report(TABLE_COUNTS, 2.29)
        self.assertAlmostEqual(report.f_e, 0.939)
        self.assertAlmostEqual(report.f_avg, 0.9518, delta=1e-4)
        self.assertAlmostEqual(
            report.f_avg, report.f_el / 3 + 2 * report.f_pm / 3, delta=1e-15
        )
        self.assertGreater(report.errors["avg"], 0.0)
        self.assertAlmostEqual(report.visibilities["+"], 0.918, delta=1e-12)

    def test_ideal(self):
        """Test noiseless inputs give F = 1 and an infinite raw SNR"""
        counts = {state: (500, 0) for state in ("e", "l", "+", "+i")}
        report = fidelity_report(counts, 2.29)
        self.assertEqual(report.f_avg, 1.0)
        self.assertEqual(report.snr["e"], math.inf)
        self.assertIn('"e": null', report.to_json())

    def test_missing_basis(self):
        """Test a report without the |+i⟩ input"""
        counts = dict(TABLE_COUNTS)
        del counts["+i"]
        with self.assertRaises(MissingBasis):
            fidelity_report(counts, 2.29)


class ClassicalBoundTestCase(SimpleTestCase):
    """Test the measure-and-prepare bound"""

    def test_calibrated_limit(self):
        """Test the frozen response budget gives 0.880 at μ = 2.29"""
        self.assertAlmostEqual(
            classical_bound(2.29, CLASSICAL_RESPONSE_BUDGET), 0.880, delta=0.005
        )

    def test_threshold_is_optimal(self):
        """Test the threshold strategy equals the vertex enumeration for N <= 12"""
        for mu, budget in ((2.29, 0.03), (2.29, 0.3), (0.8, 0.1), (4.0, 0.9)):
            self.assertAlmostEqual(
                classical_bound(mu, budget, n_max=12),
                classical_bound_bruteforce(mu, budget, n_max=12),
                delta=1e-9,
            )

    def test_high_photon_floor(self):
        """Test answering only on N >= 10 gives at least 11/12"""
        budget = float(poisson.sf(9, 2.29))
        self.assertGreaterEqual(classical_bound(2.29, budget), 11 / 12 - 1e-9)

    def test_single_photon_limit(self):
        """Test μ → 0 with every detection answered tends to 2/3"""
        mu = 1e-4
        bound = classical_bound(mu, -math.expm1(-mu))
        self.assertAlmostEqual(bound, 2 / 3, delta=1e-3)

    def test_monotone(self):
        """Test the bound falls with the budget and rises with μ"""
        budgets = [classical_bound(2.29, b) for b in (0.01, 0.03, 0.1, 0.5)]
        self.assertEqual(budgets, sorted(budgets, reverse=True))
        mus = [classical_bound(mu, 0.03) for mu in (1.0, 2.29, 4.0)]
        self.assertEqual(mus, sorted(mus))

    def test_invalid_budget(self):
        """Test nonpositive μ and budgets outside the detectable range"""
        for mu, budget in ((0.0, 0.03), (2.29, 0.0), (2.29, 1.5), (0.1, 0.5)):
            with self.assertRaises(InvalidBudget):
                classical_bound(mu, budget)


class QubitExperimentTestCase(SimpleTestCase):
    """Test the end-to-end time-bin qubit run"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.qubit_run = simulate_qubit_experiment(trials=200_000, seed=11)

    def test_average_fidelity(self):
        """Test the simulated average fidelity lands in [0.93, 0.97]"""
        self.assertGreaterEqual(self.qubit_run.report.f_avg, 0.93)
        self.assertLessEqual(self.qubit_run.report.f_avg, 0.97)

    def test_ingredients(self):
        """Test the efficiency, bin capture and noise feeding the run"""
        self.assertAlmostEqual(self.qubit_run.eta, 0.0687, delta=5e-4)
        self.assertAlmostEqual(self.qubit_run.capture, 0.691, delta=2e-3)
        self.assertAlmostEqual(self.qubit_run.noise_per_bin, 2.64e-3, delta=0.05e-3)

    def test_histograms(self):
        """Test the basis runs keep their three readout bins"""
        early = self.qubit_run.histograms["e"]
        self.assertEqual(early.counts.size, 3)
        self.assertAlmostEqual(early.bin_width, 1.6e-6, delta=1e-12)
        self.assertGreater(early.counts[0], 5 * early.counts[2])

    def test_capture(self):
        """Test a wide bin captures the whole echo"""
        self.assertAlmostEqual(window_capture(2.62e-6, 20e-6), 1.0, delta=1e-9)

    def test_bin_fractions(self):
        """Test centred bins share the captured energy symmetrically"""
        edges = 1e-5 + 262e-9 * (np.arange(7) - 3)
        fractions = echo_bin_fractions(edges, 1e-5, 2.62e-6)
        np.testing.assert_allclose(fractions, fractions[::-1], rtol=1e-9)
        self.assertAlmostEqual(
            fractions.sum(), window_capture(2.62e-6, 6 * 262e-9), delta=1e-9
        )
