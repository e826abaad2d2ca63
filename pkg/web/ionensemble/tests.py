import io
import math
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from physmodel.exceptions import UnknownTransition, UnnormalizedProfile
from physmodel.geometry import Geometry
from physmodel.material import MaterialParams
from physmodel.spectra import SpectralProfile
from protocols.efficiency import nlpe_efficiency
from protocols.sequences import (
    ECHO_WINDOW,
    FLE4,
    REFERENCE_TIMINGS,
    PE2,
    DetectionWindow,
    NlpeTimings,
    PulseDurations,
    Sequence,
    build_nlpe,
    build_variant,
)
from pulseshape.shapes import SIGNAL, GaussianShape, IdealShape, PulseSpec

from .dynamics import apply_pulse, decay_factors, free_evolution
from .emission import CSV_HEADER, EmissionRecord, emitted_field
from .engine import propagate_sequence, run_sequence
from .exceptions import EmptyWindow, OverlappingPulses
from .sampling import sample_ensemble

PROFILE = SpectralProfile.gaussian(700e3, points=201)
FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))


def ground_ensemble(n, params=None, geometry=None, profile=PROFILE, seed=7):
    return sample_ensemble(
        n, profile, params or MaterialParams().ideal(), geometry or Geometry(), seed
    )


def single_ion(rho):
    ens = ground_ensemble(1, profile=SpectralProfile.delta())
    rho = np.asarray(rho, dtype=complex)[None]
    return ens.evolve(positions=np.zeros((1, 2)), rho=rho)


class SampleEnsembleTestCase(SimpleTestCase):
    """Test ion sampling"""

    def test_single_ion_delta_profile(self):
        """Test one ion from a delta profile sits at zero detuning in g1"""
        ens = ground_ensemble(1, profile=SpectralProfile.delta())
        self.assertEqual(ens.n, 1)
        self.assertEqual(ens.ion(0).delta_opt, 0.0)
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        np.testing.assert_array_equal(ens.ion(0).rho, expected)

    def test_same_seed_is_bit_identical(self):
        """Test regenerating with one seed reproduces every array"""
        first = ground_ensemble(5000, params=MaterialParams(), seed=11)
        second = ground_ensemble(5000, params=MaterialParams(), seed=11)
        for name in ("delta_opt", "delta_g", "delta_e", "positions", "rho"):
            np.testing.assert_array_equal(getattr(first, name), getattr(second, name))
        other = ground_ensemble(5000, params=MaterialParams(), seed=12)
        self.assertFalse(np.array_equal(first.delta_opt, other.delta_opt))

    def test_blocks_do_not_depend_on_ion_count(self):
        """Test the first block of a larger ensemble matches a smaller one"""
        small = ground_ensemble(4096, params=MaterialParams(), seed=3)
        large = ground_ensemble(6000, params=MaterialParams(), seed=3)
        np.testing.assert_array_equal(small.delta_g, large.delta_g[:4096])

    def test_spin_width_statistics(self):
        """Test the sampled ground spin FWHM is within 2% of 5.6 kHz"""
        ens = ground_ensemble(100_000, params=MaterialParams(), seed=5)
        fwhm = float(np.std(ens.delta_g)) * FWHM_PER_SIGMA
        self.assertAlmostEqual(fwhm, 5.6e3, delta=0.02 * 5.6e3)

    def test_positions_inside_sample(self):
        """Test positions are uniform over the sample length and beam waist"""
        geometry = Geometry()
        ens = ground_ensemble(10_000, geometry=geometry)
        along = ens.positions[:, 0]
        self.assertTrue(np.all((along >= 0) & (along <= geometry.sample_length)))
        self.assertTrue(np.all(np.abs(ens.positions[:, 1]) <= geometry.beam_waist / 2))

    def test_unnormalized_profile(self):
        """Test a profile whose weights do not sum to one is rejected"""
        profile = SpectralProfile(np.array([0.0, 1.0]), np.array([0.5, 0.6]))
        with self.assertRaises(UnnormalizedProfile):
            ground_ensemble(10, profile=profile)


class ApplyPulseTestCase(SimpleTestCase):
    """Test pulse maps on the four-level ions"""

    def test_pi35_maps_optical_to_spin_coherence(self):
        """Test an ideal π35 turns the g1-e5 coherence into a g1-g3 coherence"""
        alpha, beta = math.sqrt(0.7), math.sqrt(0.3)
        psi = np.array([alpha, 0.0, 0.0, beta])
        ens = single_ion(np.outer(psi, psi.conj()))
        pulse = PulseSpec("f35", 1e-6, IdealShape(1e-6))
        after = apply_pulse(free_evolution(ens, 1e-6, MaterialParams().ideal()), pulse)
        self.assertAlmostEqual(abs(after.rho[0, 1, 0]), alpha * beta, delta=1e-6)
        self.assertAlmostEqual(abs(after.rho[0, 3, 0]), 0.0, delta=1e-12)

    def test_zero_area_pulse_is_identity(self):
        """Test a zero-area pulse leaves the ensemble untouched"""
        ens = ground_ensemble(10)
        pulse = PulseSpec(
            "f15", 0.0, GaussianShape(1e-6), nominal_area=0.0, role=SIGNAL
        )
        self.assertIs(apply_pulse(ens, pulse), ens)

    def test_weak_signal_excitation(self):
        """Test a resonant 0.05π signal excites sin²(area/2) of each ion"""
        ens = ground_ensemble(200, profile=SpectralProfile.delta())
        area = 0.05 * math.pi
        pulse = PulseSpec(
            "f15", 0.0, GaussianShape(1e-6), nominal_area=area, role=SIGNAL
        )
        after = apply_pulse(ens, pulse)
        expected = math.sin(area / 2) ** 2
        np.testing.assert_allclose(after.rho[:, 3, 3].real, expected, rtol=0.05)
        self.assertIsNotNone(after.reference)

    def test_spatial_phase_follows_position(self):
        """Test the optical coherence carries e^{ik·r} of the exciting beam"""
        ens = single_ion(np.diag([1.0, 0.0, 0.0, 0.0]))
        x = 1.234e-3
        ens = ens.evolve(positions=np.array([[x, 0.0]]))
        pulse = PulseSpec("f15", 0.0, IdealShape(1e-6), nominal_area=math.pi / 2)
        after = apply_pulse(ens, pulse)
        k = ens.geometry.wavenumber
        stripped = after.rho[0, 3, 0] * np.exp(-1j * k * x)
        self.assertAlmostEqual(stripped.real, 0.0, delta=1e-9)
        self.assertAlmostEqual(stripped.imag, -0.5, delta=1e-9)

    def test_unknown_transition(self):
        """Test a pulse on a transition outside the scheme"""
        pulse = PulseSpec("f99", 0.0, IdealShape(1e-6))
        with self.assertRaises(UnknownTransition):
            apply_pulse(ground_ensemble(3), pulse)

    def test_dipole_strength_scales_rabi_frequency(self):
        """Test a π pulse on a transition of half strength acts as a π/2 pulse"""
        ens = single_ion(np.diag([1.0, 0.0, 0.0, 0.0]))
        weak = tuple(
            replace(t, dipole_strength=0.5) if t.name == "f15" else t
            for t in ens.scheme.transitions
        )
        ens = ens.evolve(scheme=replace(ens.scheme, transitions=weak))
        after = apply_pulse(ens, PulseSpec("f15", 0.0, IdealShape(1e-6)))
        self.assertAlmostEqual(after.rho[0, 3, 3].real, 0.5, delta=1e-9)
        self.assertAlmostEqual(after.rho[0, 0, 0].real, 0.5, delta=1e-9)

    def test_dipole_strength_reaches_shaped_pulses(self):
        """Test tabulated shaped pulses see the scaled Rabi frequency too"""
        ens = ground_ensemble(50, profile=SpectralProfile.delta())
        dark = tuple(
            replace(t, dipole_strength=0.0) if t.name == "f15" else t
            for t in ens.scheme.transitions
        )
        ens = ens.evolve(scheme=replace(ens.scheme, transitions=dark))
        after = apply_pulse(ens, PulseSpec("f15", 0.0, GaussianShape(1e-6)))
        np.testing.assert_allclose(after.rho[:, 3, 3].real, 0.0, atol=1e-9)


class FreeEvolutionTestCase(SimpleTestCase):
    """Test precession, dephasing and decay between pulses"""

    def test_zero_duration_is_identity(self):
        """Test dt = 0 returns the same ensemble"""
        ens = ground_ensemble(5)
        self.assertIs(free_evolution(ens, 0.0, MaterialParams()), ens)

    def test_negative_duration(self):
        """Test dt < 0 is refused"""
        with self.assertRaises(ValueError):
            free_evolution(ground_ensemble(5), -1e-6, MaterialParams())

    def test_ground_spin_dephasing(self):
        """Test the mean g1-g3 coherence decays as the Gaussian of Γ13"""
        params = MaterialParams().ideal().with_changes(gamma13=5.6e3)
        ens = ground_ensemble(100_000, params=params, seed=21)
        rho = np.zeros((ens.n, 4, 4), dtype=complex)
        rho[:, 0, 0] = rho[:, 1, 1] = rho[:, 0, 1] = rho[:, 1, 0] = 0.5
        dt = 40e-6
        after = free_evolution(ens.evolve(rho=rho), dt, params)
        ratio = abs(after.rho[:, 1, 0].mean()) ** 2 / 0.25
        expected = math.exp(-((5.6e3 * dt) ** 2) * math.pi**2 / (2 * math.log(2)))
        self.assertAlmostEqual(ratio, expected, delta=0.02 * expected)

    def test_excited_decay_and_branching(self):
        """Test e3 decays to e^-1 after T1 and refills g3 by the branching ratio"""
        params = MaterialParams()
        ens = single_ion(np.diag([0.0, 0.0, 1.0, 0.0]))
        after = free_evolution(ens, params.t1_excited, params)
        self.assertAlmostEqual(after.rho[0, 2, 2].real, math.exp(-1), delta=1e-12)
        self.assertAlmostEqual(
            after.rho[0, 1, 1].real, 0.5 * (1 - math.exp(-1)), delta=1e-12
        )
        self.assertLessEqual(np.trace(after.rho[0]).real, 1.0)

    def test_gamma_damps_only_e3_coherences(self):
        """Test γ decays g-e3 coherences while g-e5 ones keep the half-T1 rate"""
        params = MaterialParams().ideal().with_changes(gamma_opt=12e3, t1_excited=1e-3)
        dt = 10e-6
        factors = decay_factors(dt, params)
        half_t1 = math.exp(-dt / (2 * params.t1_excited))
        self.assertAlmostEqual(factors[3, 0], half_t1, delta=1e-12)
        self.assertAlmostEqual(factors[0, 3], half_t1, delta=1e-12)
        self.assertAlmostEqual(
            factors[2, 1], math.exp(-12e3 * dt) * half_t1, delta=1e-12
        )

    def test_density_matrices_stay_physical(self):
        """Test Hermiticity, positivity and trace through a decaying NLPE"""
        params = MaterialParams()
        ens = ground_ensemble(256, params=params)
        seq = build_nlpe(REFERENCE_TIMINGS)
        final = propagate_sequence(ens, seq, params, until=30e-6)
        rho = final.rho
        np.testing.assert_allclose(rho, np.conj(np.swapaxes(rho, 1, 2)), atol=1e-9)
        self.assertGreaterEqual(float(np.linalg.eigvalsh(rho).min()), -1e-9)
        traces = np.einsum("nii->n", rho).real
        self.assertTrue(np.all(traces <= 1 + 1e-9))
        self.assertTrue(np.all(traces >= 0))

    def test_purity_conserved_without_decay(self):
        """Test unitary pulses and lossless evolution keep trace(rho²)"""
        params = MaterialParams().ideal()
        ens = ground_ensemble(128, params=params)
        seq = build_nlpe(REFERENCE_TIMINGS)
        final = propagate_sequence(ens, seq, params, until=25e-6)
        purity = np.einsum("nij,nji->n", final.rho, final.rho).real
        np.testing.assert_allclose(purity, 1.0, atol=1e-8)


class EmissionTestCase(SimpleTestCase):
    """Test macroscopic emission"""

    def test_no_coherence_no_emission(self):
        """Test a ground-state ensemble radiates nothing"""
        record = emitted_field(
            ground_ensemble(50),
            "f15",
            (1.0, 0.0),
            (1e-6, 2e-6),
            20e-9,
            MaterialParams(),
        )
        self.assertTrue(np.all(record.amplitude == 0))
        self.assertEqual(record.integrated_intensity, 0.0)

    def test_empty_window(self):
        """Test reversed or sub-step windows"""
        ens = ground_ensemble(5)
        params = MaterialParams()
        with self.assertRaises(EmptyWindow):
            emitted_field(ens, "f15", (1.0, 0.0), (2e-6, 1e-6), 20e-9, params)
        with self.assertRaises(EmptyWindow):
            emitted_field(ens, "f15", (1.0, 0.0), (1e-6, 1.01e-6), 20e-9, params)

    def test_csv_export(self):
        """Test the CSV columns and that intensity is |amplitude|²"""
        record = EmissionRecord(
            "echo", "f15", np.array([0.0, 1e-8]), np.array([1 + 2j, -0.5j])
        )
        np.testing.assert_allclose(record.intensity, [5.0, 0.25], atol=1e-12)
        with tempfile.TemporaryDirectory() as tmp:
            path = record.to_csv(Path(tmp) / "echo.csv")
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], ",".join(CSV_HEADER))
        self.assertEqual(len(lines), 3)
        row = lines[1].split(",")
        self.assertEqual(row[:3], ["0.0", "1.0", "2.0"])
        self.assertAlmostEqual(float(row[3]), 5.0, delta=1e-12)

    def test_two_pulse_echo_time(self):
        """Test a collinear two-pulse echo peaks at 2t1 - t0"""
        geometry = Geometry(angle=0.0)
        params = MaterialParams().ideal()
        ens = ground_ensemble(100_000, params=params, geometry=geometry)
        seq = build_variant(PE2, (0.0, 5e-6), geometry=geometry)
        record = run_sequence(ens, seq, params, workers=1).record(ECHO_WINDOW)
        self.assertAlmostEqual(record.peak_time, 10e-6, delta=40e-9)

    def test_four_level_echo_is_silenced(self):
        """Test the four-level echo loses at least 20 dB at 30 mrad over 8 mm"""
        params = MaterialParams().ideal()
        energies = {}
        for angle in (0.0, 30e-3):
            geometry = Geometry(angle=angle)
            ens = ground_ensemble(20_000, params=params, geometry=geometry)
            seq = build_variant(FLE4, (0.0, 4.1e-6, 6.6e-6), geometry=geometry)
            record = run_sequence(ens, seq, params, workers=1).record(ECHO_WINDOW)
            energies[angle] = record.integrated_intensity
        self.assertGreater(energies[0.0], 0.0)
        self.assertLessEqual(energies[30e-3], 0.01 * energies[0.0])


class RunSequenceTestCase(SimpleTestCase):
    """Test full sequences through the block engine"""

    def test_reference_echo_time(self):
        """Test the NLPE with reference timings peaks at 21.7 μs"""
        params = MaterialParams()
        ens = ground_ensemble(50_000, params=params)
        result = run_sequence(ens, build_nlpe(REFERENCE_TIMINGS), params, workers=1)
        record = result.record(ECHO_WINDOW)
        self.assertAlmostEqual(record.peak_time, 21.7e-6, delta=40e-9)
        self.assertTrue(result.trace.covers(ECHO_WINDOW))

    def test_no_pulses_no_emission(self):
        """Test a sequence without pulses radiates nothing"""
        window = DetectionWindow("echo", 1e-6, 3e-6)
        seq = Sequence((), (window,))
        result = run_sequence(ground_ensemble(100), seq, MaterialParams())
        self.assertTrue(np.all(result.record("echo").amplitude == 0))

    def test_window_over_pulse(self):
        """Test a window intersecting a pulse support"""
        pulse = PulseSpec("f15", 2e-6, IdealShape(1e-6))
        window = DetectionWindow("echo", 1.8e-6, 3e-6)
        seq = Sequence((pulse,), (window,))
        with self.assertRaises(OverlappingPulses):
            run_sequence(ground_ensemble(10), seq, MaterialParams())

    def test_ideal_efficiency_is_forward_echo_factor(self):
        """Test ideal pulses without dephasing give d²e^-d"""
        params = MaterialParams().ideal()
        timings = NlpeTimings(0.0, 2e-6, 3e-6, 20e-6, 21e-6)
        seq = build_nlpe(
            timings, PulseDurations(pi35=0.2e-6, pi13=0.2e-6), window_width=8e-6
        )
        ens = ground_ensemble(5000, params=params)
        record = run_sequence(ens, seq, params, workers=1).record(ECHO_WINDOW)
        expected = params.d**2 * math.exp(-params.d)
        self.assertAlmostEqual(
            record.integrated_intensity, expected, delta=0.02 * expected
        )

    def test_monte_carlo_matches_closed_form(self):
        """Test the dephased NLPE efficiency against the closed form within 3%"""
        params = MaterialParams().with_changes(t1_excited=math.inf)
        timings = NlpeTimings(0.0, 2e-6, 3e-6, 20e-6, 21e-6)
        seq = build_nlpe(
            timings, PulseDurations(pi35=0.2e-6, pi13=0.2e-6), window_width=8e-6
        )
        ens = ground_ensemble(200_000, params=params, seed=99)
        record = run_sequence(ens, seq, params, grid_step=40e-9).record(ECHO_WINDOW)
        expected = nlpe_efficiency(params, timings)
        self.assertAlmostEqual(
            record.integrated_intensity, expected, delta=0.03 * expected
        )

    def test_thread_count_does_not_change_results(self):
        """Test one and four workers give bit-identical emission and traces"""
        params = MaterialParams()
        ens = ground_ensemble(6000, params=params)
        seq = build_nlpe(REFERENCE_TIMINGS, monitor_window=True)
        one = run_sequence(ens, seq, params, workers=1, block_size=512)
        four = run_sequence(ens, seq, params, workers=4, block_size=512)
        for label in one.records:
            np.testing.assert_array_equal(
                one.record(label).amplitude, four.record(label).amplitude
            )
        np.testing.assert_array_equal(one.trace.populations, four.trace.populations)

    def test_csv_is_reproducible(self):
        """Test two runs with one seed write identical CSV text"""
        params = MaterialParams()
        texts = []
        for _ in range(2):
            ens = ground_ensemble(3000, params=params, seed=5)
            result = run_sequence(ens, build_nlpe(REFERENCE_TIMINGS), params)
            record = result.record(ECHO_WINDOW)
            handle = io.StringIO()
            record.write_csv(handle)
            texts.append(handle.getvalue())
        self.assertEqual(texts[0], texts[1])
