import json
import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from physmodel.geometry import Geometry
from physmodel.material import MaterialParams
from pulseshape.shapes import SIGNAL, GaussianShape, IdealShape, PulseSpec

from .afc import afc_efficiency, afc_optimal_efficiency
from .echoes import echo_at, predict_echoes
from .efficiency import TAU2, TAU3, decay_curve, fit_decay, nlpe_efficiency
from .exceptions import (
    EchoOverlapsPulse,
    InfeasibleConstraints,
    NonMonotoneTimings,
    OverlappingPulses,
    UnknownVariant,
)
from .optimize import DEFAULT_CONSTRAINTS, TimingConstraints, optimize_timings
from .sequences import (
    ECHO_WINDOW,
    FIRST_ECHO_WINDOW,
    FLE4,
    MONITOR_WINDOW,
    REFERENCE_TIMINGS,
    PE2,
    QUBIT_TIMINGS,
    ROSE,
    DetectionWindow,
    NlpeTimings,
    Sequence,
    build_nlpe,
    build_qubit_readout,
    build_variant,
    sequence_from_dict,
    sequence_to_dict,
)


class BuildNlpeTestCase(SimpleTestCase):
    """Test the NLPE sequence builder"""

    def test_reference_timings_center_window_on_t5(self):
        """Test the echo window of the reference sequence is centered at 21.7 μs"""
        seq = build_nlpe(REFERENCE_TIMINGS)
        window = seq.window(ECHO_WINDOW)
        self.assertAlmostEqual(window.center, 21.7e-6, delta=1e-15)
        self.assertAlmostEqual(window.width, 1.57e-6, delta=1e-15)
        self.assertEqual(
            [p.transition for p in seq.pulses], ["f15", "f35", "f13", "f13", "f35"]
        )
        self.assertEqual(seq.pulses[0].role, SIGNAL)
        seq.check_windows()

    def test_symmetric_timings(self):
        """Test t1 - t0 equals t5 - t4 when t3 - t2 is twice t1 - t0"""
        timings = NlpeTimings(0.0, 4e-6, 5e-6, 13e-6, 14e-6)
        self.assertAlmostEqual(
            timings.t1 - timings.t0, timings.t5 - timings.t4, delta=1e-18
        )
        build_nlpe(timings)

    def test_echo_too_close_to_last_pulse(self):
        """Test t3 = 12 μs puts the echo at 18.7 μs on top of the last π35"""
        timings = replace(REFERENCE_TIMINGS, t3=12.0e-6)
        self.assertAlmostEqual(timings.t5, 18.7e-6, delta=1e-15)
        with self.assertRaises(EchoOverlapsPulse):
            build_nlpe(timings)

    def test_non_monotone_timings(self):
        """Test unordered timings are rejected"""
        with self.assertRaises(NonMonotoneTimings):
            NlpeTimings(0.0, 6.6e-6, 4.1e-6, 15e-6, 17.4e-6)

    def test_monitor_window_between_pi13_pulses(self):
        """Test the monitor window sits midway between t2 and t3"""
        seq = build_nlpe(REFERENCE_TIMINGS, monitor_window=True)
        monitor = seq.window(MONITOR_WINDOW)
        self.assertAlmostEqual(monitor.center, 10.8e-6, delta=1e-15)
        self.assertEqual(seq.detection_windows[-1].label, ECHO_WINDOW)

    def test_overlapping_window_detected(self):
        """Test a window over a pulse support raises OverlappingPulses"""
        pulse = PulseSpec("f15", 5e-6, IdealShape(1e-6))
        window = DetectionWindow.centered("bad", 5.2e-6, 1e-6)
        with self.assertRaises(OverlappingPulses):
            Sequence((pulse,), (window,)).check_windows()

    def test_pulses_must_be_time_ordered(self):
        """Test a sequence with descending pulse centers is rejected"""
        first = PulseSpec("f15", 5e-6, IdealShape(1e-6))
        second = PulseSpec("f15", 4e-6, IdealShape(1e-6))
        with self.assertRaises(NonMonotoneTimings):
            Sequence((first, second))

    def test_json_round_trip(self):
        """Test a sequence survives JSON serialization"""
        seq = build_nlpe(REFERENCE_TIMINGS, monitor_window=True)
        restored = sequence_from_dict(json.loads(json.dumps(sequence_to_dict(seq))))
        self.assertEqual(restored, seq)


class BuildVariantTestCase(SimpleTestCase):
    """Test the comparison echo builders"""

    def test_two_pulse_echo(self):
        """Test PE2 with t1 = 5 μs echoes at 10 μs"""
        seq = build_variant(PE2, (0.0, 5e-6))
        self.assertAlmostEqual(seq.window(ECHO_WINDOW).center, 10e-6, delta=1e-15)

    def test_four_level_echo(self):
        """Test FLE4 echoes at t2 + t1 - t0 on f33"""
        seq = build_variant(FLE4, (0.0, 4.1e-6, 6.6e-6))
        window = seq.window(ECHO_WINDOW)
        self.assertAlmostEqual(window.center, 10.7e-6, delta=1e-15)
        self.assertEqual(window.transition, "f33")

    def test_rose(self):
        """Test ROSE t0 = 0, t1 = 5, t2 = 12 μs echoes at 14 μs"""
        seq = build_variant(ROSE, (0.0, 5e-6, 12e-6))
        self.assertAlmostEqual(seq.window(ECHO_WINDOW).center, 14e-6, delta=1e-15)
        self.assertAlmostEqual(seq.window(FIRST_ECHO_WINDOW).center, 10e-6, delta=1e-15)
        self.assertTrue(all(p.transition == "f15" for p in seq.pulses))

    def test_unknown_variant(self):
        """Test an unknown variant name"""
        with self.assertRaises(UnknownVariant):
            build_variant("AFC", (0.0, 5e-6))

    def test_wrong_number_of_timings(self):
        """Test ROSE without its third timing"""
        with self.assertRaises(NonMonotoneTimings):
            build_variant(ROSE, (0.0, 5e-6))


class PredictEchoesTestCase(SimpleTestCase):
    """Test rephasing pathway enumeration and phase matching"""

    def test_nlpe_time_and_direction(self):
        """Test the NLPE echo is emitted at t5 along k0"""
        seq = build_nlpe(REFERENCE_TIMINGS)
        echo = echo_at(predict_echoes(seq), REFERENCE_TIMINGS.t5)
        t5 = REFERENCE_TIMINGS.t5
        self.assertLessEqual(abs(echo.time - t5), 1e-12 * t5)
        self.assertEqual(echo.transition, "f15")
        k0 = seq.geometry.wavevector(seq.geometry.signal_direction)
        np.testing.assert_allclose(echo.wavevector, k0, rtol=1e-12)
        self.assertFalse(echo.silenced)
        self.assertFalse(echo.inverted)

    def test_collinear_geometry_silences_nothing(self):
        """Test θ = 0 gives zero mismatch for every echo"""
        seq = build_nlpe(REFERENCE_TIMINGS, geometry=Geometry(angle=0.0))
        echoes = predict_echoes(seq)
        self.assertGreaterEqual(len(echoes), 2)
        for echo in echoes:
            self.assertFalse(echo.silenced)
            self.assertLess(echo.mismatch_norm, 1e-6)

    def test_four_level_echo_silenced(self):
        """Test the echo at t2 + t1 - t0 is silenced at 30 mrad over 8 mm"""
        seq = build_nlpe(REFERENCE_TIMINGS)
        echo = echo_at(predict_echoes(seq), 10.7e-6, "f33")
        self.assertTrue(echo.silenced)
        self.assertTrue(echo.inverted)
        self.assertGreater(echo.mismatch_norm * seq.geometry.sample_length, 2 * math.pi)

    def test_rose_first_echo_from_inverted_medium(self):
        """Test the first ROSE echo is silenced and inverted, the second is neither"""
        seq = build_variant(ROSE, (0.0, 5e-6, 12e-6))
        echoes = predict_echoes(seq)
        first = echo_at(echoes, 10e-6)
        second = echo_at(echoes, 14e-6)
        self.assertTrue(first.silenced)
        self.assertTrue(first.inverted)
        self.assertFalse(second.silenced)
        self.assertFalse(second.inverted)

    def test_qubit_readout_has_three_bins(self):
        """Test two π/2 readouts of two inputs give three bins, the middle doubled"""
        delta_t = 1.6e-6
        seq = build_qubit_readout(QUBIT_TIMINGS, delta_t)
        echoes = [e for e in predict_echoes(seq) if e.time > QUBIT_TIMINGS.t4 + delta_t]
        self.assertEqual(len(echoes), 3)
        for i, echo in enumerate(echoes):
            self.assertAlmostEqual(
                echo.time, QUBIT_TIMINGS.t5 + i * delta_t, delta=1e-15
            )
            self.assertEqual(echo.transition, "f15")
        self.assertEqual([e.pathways for e in echoes], [1, 2, 1])

    def test_sequence_without_controls_has_no_echo(self):
        """Test a lone signal pulse only gives free-induction decay"""
        signal = PulseSpec("f15", 0.0, GaussianShape(1e-6), role=SIGNAL)
        self.assertEqual(predict_echoes(Sequence((signal,))), [])


class NlpeEfficiencyTestCase(SimpleTestCase):
    """Test the closed-form storage efficiency"""

    def setUp(self):
        self.params = MaterialParams()

    def test_reference_efficiency(self):
        """Test reference parameters give 13.0% with perfect controls"""
        value = nlpe_efficiency(self.params, REFERENCE_TIMINGS)
        self.assertAlmostEqual(value, 0.1305, delta=0.003)

    def test_reference_efficiency_with_control_loss(self):
        """Test η_control = 0.938 gives 10.1%"""
        value = nlpe_efficiency(self.params, REFERENCE_TIMINGS, eta_control=0.938)
        self.assertAlmostEqual(value, 0.101, delta=0.003)

    def test_vanishing_delays(self):
        """Test all separations going to zero leave d²e^-d"""
        timings = NlpeTimings(0.0, 1e-12, 2e-12, 3e-12, 4e-12)
        value = nlpe_efficiency(self.params, timings)
        self.assertAlmostEqual(value, 0.1976, delta=1e-4)

    def test_monotone_in_delays_and_rates(self):
        """Test longer delays or faster dephasing never raise the efficiency"""
        base = nlpe_efficiency(self.params, REFERENCE_TIMINGS)
        later = replace(REFERENCE_TIMINGS, t4=20e-6)
        self.assertLess(nlpe_efficiency(self.params, later), base)
        longer = replace(REFERENCE_TIMINGS, t3=16e-6, t4=18.4e-6)
        self.assertLess(nlpe_efficiency(self.params, longer), base)
        for name in ("gamma13", "gamma35bar", "gamma_opt"):
            faster = self.params.with_changes(**{name: 2 * getattr(self.params, name)})
            self.assertLess(nlpe_efficiency(faster, REFERENCE_TIMINGS), base)


class DecayCurveTestCase(SimpleTestCase):
    """Test decay curves and their fits"""

    def test_tau2_fit_recovers_gamma13(self):
        """Test the τ2 Gaussian fit returns Γ13 = 5.6 kHz within 1%"""
        curve = decay_curve(MaterialParams(), TAU2, np.linspace(5e-6, 60e-6, 25))
        fit = fit_decay(curve)
        self.assertAlmostEqual(fit.gamma, 5.6e3, delta=56.0)

    def test_flat_curve_without_dephasing(self):
        """Test Γ13 = 0 gives a flat τ2 curve"""
        params = MaterialParams().with_changes(gamma13=0.0)
        curve = decay_curve(params, TAU2, np.linspace(5e-6, 60e-6, 10))
        np.testing.assert_allclose(curve.efficiency, curve.efficiency[0], rtol=1e-12)

    def test_tau3_fit_recovers_both_rates(self):
        """Test the τ3 fit returns Γ35bar and γ within 2%"""
        curve = decay_curve(MaterialParams(), TAU3, np.linspace(4e-6, 60e-6, 29))
        fit = fit_decay(curve)
        self.assertAlmostEqual(fit.gamma, 18.6e3, delta=0.02 * 18.6e3)
        self.assertAlmostEqual(fit.gamma_opt, 12e3, delta=0.02 * 12e3)

    def test_tau3_uses_half_the_delay(self):
        """Test τ3 = 2(t3 - t2) reproduces the measured point at 16.8 μs"""
        curve = decay_curve(MaterialParams(), TAU3, [16.8e-6])
        self.assertAlmostEqual(
            curve.efficiency[0],
            nlpe_efficiency(MaterialParams(), REFERENCE_TIMINGS),
            delta=1e-12,
        )


class AfcTestCase(SimpleTestCase):
    """Test the square-tooth AFC baseline"""

    def test_reference_depth(self):
        """Test d = 0.6 limits the comb to 2.7%"""
        finesse, efficiency = afc_optimal_efficiency(0.6)
        self.assertAlmostEqual(efficiency, 0.027, delta=0.001)
        self.assertGreaterEqual(finesse, 2.0)
        self.assertLessEqual(finesse, 2.3)

    def test_agrees_with_dense_scan(self):
        """Test the refined optimum is at least as good as a dense scan"""
        grid = np.linspace(1.0, 20.0, 200_001)[1:]
        _, efficiency = afc_optimal_efficiency(0.6)
        scanned = float(np.max(afc_efficiency(0.6, grid)))
        self.assertGreaterEqual(efficiency, scanned - 1e-12)

    def test_finesse_two(self):
        """Test η(F = 2) at d = 0.6"""
        self.assertAlmostEqual(afc_efficiency(0.6, 2.0), 0.0270, delta=1e-4)

    def test_bounded_by_dephasing_free_value(self):
        """Test the sinc factor only lowers the efficiency"""
        for d in (0.1, 0.6, 2.0, 5.0):
            grid = np.linspace(1.0, 20.0, 20_001)[1:]
            ceiling = float(np.max((d / grid) ** 2 * np.exp(-d / grid)))
            self.assertLessEqual(afc_optimal_efficiency(d)[1], ceiling + 1e-12)

    def test_vanishing_depth(self):
        """Test the optimum vanishes quadratically as d goes to zero"""
        self.assertLess(afc_optimal_efficiency(1e-3)[1], 1e-6)


class OptimizeTimingsTestCase(SimpleTestCase):
    """Test the coordinate-descent timing optimizer"""

    def setUp(self):
        self.params = MaterialParams()

    def test_collapse_without_lower_bounds(self):
        """Test zero lower bounds push the efficiency to d²e^-d"""
        result = optimize_timings(self.params, TimingConstraints())
        self.assertAlmostEqual(result.efficiency, 0.197572, delta=1e-5)

    def test_reference_constraints_respected(self):
        """Test t3 - t2 stays above 7 μs"""
        result = optimize_timings(self.params, DEFAULT_CONSTRAINTS)
        timings = result.timings
        self.assertGreaterEqual(timings.t3 - timings.t2, 7.0e-6 - 1e-15)
        self.assertGreaterEqual(timings.t5 - timings.t4, 2.66e-6 - 1e-15)
        reference = nlpe_efficiency(self.params, REFERENCE_TIMINGS)
        self.assertGreater(result.efficiency, reference)

    def test_matches_dense_grid(self):
        """Test the two-variable toy instance against a 100 x 100 grid"""
        constraints = TimingConstraints(
            min_gaps=(2e-6, 2e-6, 7e-6, 2e-6),
            max_gaps=(2e-6, 6e-6, 15e-6, 2e-6),
            echo_clearance=6e-6,
        )
        result = optimize_timings(self.params, constraints)
        best = 0.0
        for g12 in np.linspace(2e-6, 6e-6, 100):
            for g23 in np.linspace(7e-6, 15e-6, 100):
                if g23 < 2e-6 + 6e-6:
                    continue
                t2, t3 = 2e-6 + g12, 2e-6 + g12 + g23
                timings = NlpeTimings(0.0, 2e-6, t2, t3, t3 + 2e-6)
                best = max(best, nlpe_efficiency(self.params, timings))
        self.assertGreaterEqual(result.efficiency, best - 1e-4)
        self.assertLessEqual(result.efficiency, nlpe_efficiency(
            self.params, NlpeTimings(0.0, 2e-6, 4e-6, 12e-6, 14e-6)
        ) + 1e-12)

    def test_line_search_keeps_interval_ends(self):
        """Test efficiencies falling with every gap leave each gap at its lower end"""
        constraints = TimingConstraints(
            min_gaps=(3e-6, 2e-6, 8e-6, 2e-6),
            max_gaps=(6e-6, 9e-6, 20e-6, 9e-6),
        )
        result = optimize_timings(self.params, constraints)
        timings = result.timings
        gaps = [b - a for a, b in zip(timings.as_tuple(), timings.as_tuple()[1:5])]
        for gap, low in zip(gaps, constraints.min_gaps):
            self.assertAlmostEqual(gap, low, delta=1e-15)

    def test_clearance_out_of_reach(self):
        """Test an echo clearance the t3 - t2 cap cannot meet"""
        constraints = TimingConstraints(
            min_gaps=(4e-6, 1e-6, 1e-6, 1e-6),
            max_gaps=(5e-6, 2e-6, 5e-6, 2e-6),
            echo_clearance=3e-6,
        )
        with self.assertRaises(InfeasibleConstraints):
            optimize_timings(self.params, constraints)

    def test_negative_bound(self):
        """Test a negative gap bound"""
        with self.assertRaises(InfeasibleConstraints):
            constraints = TimingConstraints(min_gaps=(-1e-6, 0.0, 0.0, 0.0))
            optimize_timings(self.params, constraints)

    def test_duration_cap(self):
        """Test a total duration shorter than the minimum sequence"""
        with self.assertRaises(InfeasibleConstraints):
            constraints = replace(DEFAULT_CONSTRAINTS, max_duration=10e-6)
            optimize_timings(self.params, constraints)
