import math

import numpy as np
from django.test import SimpleTestCase

from physmodel.exceptions import UnnormalizedProfile
from physmodel.spectra import SpectralProfile

from .efficiency import calibrate_sech, sech_pulse, transfer_efficiency
from .exceptions import InvalidPulse
from .propagation import (
    propagate_fixed_step,
    project_unitary,
    propagate_many,
    propagate_two_level,
    rotation,
    unitarity_drift,
)
from .shapes import (
    ChirpShape,
    GaussianShape,
    IdealShape,
    PulseSpec,
    SechShape,
    envelope,
    pulse_from_dict,
    pulse_to_dict,
)


def gaussian_pulse(area=math.pi, fwhm=1.0e-6, phase=0.0):
    return PulseSpec(
        transition="f15",
        center_time=2.0e-6,
        shape=GaussianShape(fwhm=fwhm),
        nominal_area=area,
        phase=phase,
        role="signal",
    )


class EnvelopeTestCase(SimpleTestCase):
    """Test pulse envelopes"""

    def test_gaussian_peak_and_half_maximum(self):
        """Test the amplitude FWHM convention for a 2.62 us signal"""
        spec = gaussian_pulse(fwhm=2.62e-6)
        peak = envelope(spec, spec.center_time)
        self.assertAlmostEqual(abs(peak), spec.peak_amplitude, delta=1e-9)
        for offset in (-1.31e-6, 1.31e-6):
            value = envelope(spec, spec.center_time + offset)
            self.assertAlmostEqual(abs(value) / abs(peak), 0.5, delta=1e-12)

    def test_sech_peak_has_zero_instantaneous_detuning(self):
        """Test the sech phase is stationary at its center"""
        spec = sech_pulse(1.5e-6, peak_rabi=2.0e6, chirp_mu=3.0, center_time=1.0e-6)
        dt = 1e-12
        before = envelope(spec, spec.center_time - dt)
        after = envelope(spec, spec.center_time + dt)
        self.assertAlmostEqual(abs(envelope(spec, spec.center_time)), 2.0e6, delta=1e-6)
        self.assertLess(abs(np.angle(after / before)), 1e-9)

    def test_envelope_is_zero_outside_support(self):
        """Test truncation at five characteristic widths"""
        spec = gaussian_pulse()
        start, stop = spec.support
        self.assertEqual(envelope(spec, stop + 1e-9), 0j)
        self.assertEqual(envelope(spec, start - 1e-9), 0j)
        self.assertNotEqual(envelope(spec, stop - 1e-9), 0j)

    def test_sech_support_matches_duration(self):
        """Test beta = 10 / duration gives a support of the requested length"""
        spec = sech_pulse(3.75e-6, peak_rabi=1.0e6)
        start, stop = spec.support
        self.assertAlmostEqual(stop - start, 3.75e-6, delta=1e-15)

    def test_invalid_direction(self):
        """Test non-normalized directions are refused"""
        with self.assertRaises(InvalidPulse):
            PulseSpec("f15", 0.0, IdealShape(1e-6), direction=(1.0, 0.1))

    def test_rabi_scale_on_sech(self):
        """Test scaling a sech pulse multiplies its peak Rabi frequency"""
        spec = sech_pulse(1.5e-6, peak_rabi=2.0e6, chirp_mu=3.0)
        scaled = spec.with_rabi_scale(0.5)
        self.assertAlmostEqual(scaled.peak_amplitude, 1.0e6, delta=1e-6)
        self.assertEqual(scaled.shape.beta, spec.shape.beta)
        self.assertIs(spec.with_rabi_scale(1.0), spec)

    def test_rabi_scale_on_gaussian(self):
        """Test scaling a Gaussian pulse multiplies its area and keeps its width"""
        spec = gaussian_pulse(area=math.pi)
        scaled = spec.with_rabi_scale(0.5)
        self.assertAlmostEqual(scaled.nominal_area, math.pi / 2, delta=1e-15)
        self.assertAlmostEqual(
            scaled.peak_amplitude, spec.peak_amplitude / 2, delta=1e-9
        )
        self.assertEqual(scaled.support, spec.support)

    def test_pulse_dict_round_trip(self):
        """Test pulse tables survive a dictionary round trip"""
        spec = sech_pulse(1.5e-6, peak_rabi=2.5e6, transition="f13", center_time=6.6e-6)
        self.assertEqual(pulse_from_dict(pulse_to_dict(spec)), spec)


class PropagationTestCase(SimpleTestCase):
    """Test two-level transfer maps"""

    def test_resonant_square_pi_pulse(self):
        """Test a resonant square pi pulse fully inverts"""
        spec = PulseSpec(
            "f15", 0.0, ChirpShape(sweep_width=0.0, duration=1.0e-6), phase=0.3
        )
        transfer = propagate_two_level(spec, 0.0)
        out = transfer.apply(np.array([1.0, 0.0]))
        self.assertAlmostEqual(abs(out[1]) ** 2, 1.0, delta=1e-6)
        expected = -1j * np.exp(1j * 0.3)
        self.assertAlmostEqual(abs(out[1] - expected), 0.0, delta=1e-6)

    def test_zero_amplitude_is_identity(self):
        """Test a null pulse leaves amplitudes untouched"""
        spec = gaussian_pulse(area=0.0)
        transfer = propagate_two_level(spec, 1.0e5)
        np.testing.assert_array_equal(transfer.matrix, np.eye(2))

    def test_ideal_shape_matches_rotation(self):
        """Test the hard-pulse shape is an exact rotation at any detuning"""
        spec = PulseSpec("f35", 0.0, IdealShape(1e-6), nominal_area=math.pi / 2)
        maps = propagate_many(spec, np.array([-1e6, 0.0, 3e6]))
        for matrix in maps:
            np.testing.assert_allclose(matrix, rotation(math.pi / 2, 0.0), atol=1e-15)

    def test_unitarity(self):
        """Test maps are unitary within 1e-9"""
        spec = sech_pulse(1.5e-6, peak_rabi=3.0e6, chirp_mu=2.0)
        for detuning in (-8e5, -1e5, 0.0, 2e5, 1.2e6):
            self.assertLess(propagate_two_level(spec, detuning).unitarity_error(), 1e-9)

    def test_projection_reports_drift(self):
        """Test maps far from unitary are logged before being projected"""
        maps = np.broadcast_to(1.01 * np.eye(2, dtype=complex), (3, 2, 2))
        self.assertAlmostEqual(unitarity_drift(maps), 0.0201, delta=1e-12)
        with self.assertLogs("pulseshape.propagation", level="WARNING") as logs:
            projected = project_unitary(maps, "f15 pulse")
        self.assertIn("f15 pulse maps drift 2.01e-02", logs.output[0])
        np.testing.assert_allclose(projected[0], np.eye(2), atol=1e-15)

    def test_integrated_maps_are_close_to_unitary(self):
        """Test the integrator lands within tolerance without logging a warning"""
        spec = gaussian_pulse(area=math.pi)
        with self.assertLogs("pulseshape.propagation", level="DEBUG") as logs:
            propagate_many(spec, np.array([-2e5, 0.0, 4e5]))
        self.assertFalse([line for line in logs.output if "WARNING" in line])

    def test_symmetric_envelope_gives_even_transfer(self):
        """Test P(delta) = P(-delta) for an unchirped Gaussian"""
        spec = gaussian_pulse(area=0.8 * math.pi)
        detunings = np.array([1e5, 3e5, 7e5])
        plus = np.abs(propagate_many(spec, detunings)[:, 1, 0]) ** 2
        minus = np.abs(propagate_many(spec, -detunings)[:, 1, 0]) ** 2
        np.testing.assert_allclose(plus, minus, atol=1e-6)

    def test_fixed_step_resolution_doubling(self):
        """Test doubling the fixed-step resolution moves entries by < 1e-6"""
        spec = gaussian_pulse(area=math.pi)
        detunings = np.array([-4e5, 0.0, 2.5e5])
        coarse = propagate_fixed_step(spec, detunings, 2000)
        fine = propagate_fixed_step(spec, detunings, 4000)
        self.assertLess(np.max(np.abs(coarse - fine)), 1e-6)

    def test_adaptive_agrees_with_fixed_step(self):
        """Test the adaptive solver against a ten-times finer fixed-step oracle"""
        spec = sech_pulse(1.5e-6, peak_rabi=4.0e6, chirp_mu=2.0, transition="f13")
        detunings = np.array([-6e5, -2e5, 0.0, 3e5, 9e5])
        adaptive = np.abs(propagate_many(spec, detunings)[:, 1, 0]) ** 2
        oracle = np.abs(propagate_fixed_step(spec, detunings, 20000)[:, 1, 0]) ** 2
        np.testing.assert_allclose(adaptive, oracle, atol=1e-6)


class TransferEfficiencyTestCase(SimpleTestCase):
    """Test profile-averaged control efficiency"""

    def test_ideal_pi_on_delta_profile(self):
        """Test an ideal pi pulse on a resonant delta profile gives 1"""
        spec = PulseSpec("f15", 0.0, IdealShape(1e-6))
        self.assertAlmostEqual(
            transfer_efficiency(spec, SpectralProfile.delta()), 1.0, delta=1e-12
        )

    def test_zero_amplitude(self):
        """Test a null pulse transfers nothing"""
        spec = PulseSpec("f15", 0.0, SechShape(0.0, 1e7, 2.0))
        profile = SpectralProfile.gaussian(700e3, points=41)
        self.assertEqual(transfer_efficiency(spec, profile), 0.0)

    def test_unnormalized_profile(self):
        """Test unnormalized profiles are refused"""
        spec = PulseSpec("f15", 0.0, IdealShape(1e-6))
        profile = SpectralProfile(np.array([0.0, 1e5]), np.array([1.0, 1.0]))
        with self.assertRaises(UnnormalizedProfile):
            transfer_efficiency(spec, profile)

    def test_calibrated_sech_reaches_target(self):
        """Test sech calibration over a 700 kHz peak hits 0.938"""
        profile = SpectralProfile.gaussian(700e3, points=41, span=2.0)
        shape = calibrate_sech(1.5e-6, profile, chirp_mu=2.0, transition="f13")
        spec = PulseSpec("f13", 0.0, shape)
        self.assertAlmostEqual(transfer_efficiency(spec, profile), 0.938, delta=0.03)
        self.assertAlmostEqual(shape.beta, 10.0 / 1.5e-6, delta=1e-3)
