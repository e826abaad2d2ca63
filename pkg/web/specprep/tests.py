import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from physmodel.material import MaterialParams

from .exceptions import InvalidSchedule, UnknownTransition, WindowOutsideGrid
from .population import ClassTable, SpectralPopulation
from .pumping import (
    BACKPUMP,
    CLASS_CLEANING,
    MEMORY_SCHEDULE,
    SPIN_POLARIZATION,
    Pump,
    PumpSettings,
    pump_step,
    run_preparation,
)
from .spectrum import (
    absorption_spectrum,
    calibrate_peak_depth,
    class_activity,
    prepare_filter,
    prepare_memory,
)


def points_above(depth, level):
    return int(np.count_nonzero(depth > level))


class ClassTableTestCase(SimpleTestCase):
    """Test the transition offsets of the ion classes"""

    def test_default_offsets(self):
        """Test offsets follow from the ground, reservoir and excited splittings"""
        table = ClassTable.default()
        expected = {
            "f15": 0.0,
            "f35": -34.5e6,
            "f55": -80.7e6,
            "f13": -102.0e6,
            "f33": -136.5e6,
            "f53": -182.7e6,
        }
        for name, offset in expected.items():
            self.assertAlmostEqual(table.offset(name), offset, delta=1.0)

    def test_probe_reaches_each_class_once(self):
        """Test a laser at f15 addresses the lower level of every class's own line"""
        table = ClassTable.default()
        found = table.resonances("f15", 12.5e3)
        expected = [(0, 0), (1, 1), (2, 2), (3, 0), (4, 1), (5, 2)]
        self.assertEqual(sorted(found), expected)

    def test_unknown_transition(self):
        """Test an unknown laser transition"""
        with self.assertRaises(UnknownTransition):
            ClassTable.default().offset("f99")


class PumpStepTestCase(SimpleTestCase):
    """Test single pumps"""

    def setUp(self):
        self.pop = SpectralPopulation.unprepared()

    def test_zero_repetitions_is_identity(self):
        """Test a pump with no passes returns the input unchanged"""
        self.assertIs(pump_step(self.pop, Pump("f15", repetitions=0)), self.pop)

    def test_closed_form_depletion(self):
        """Test 100 passes at transfer 0.2 leave at most 1e-9 of the pumped level"""
        pump = Pump("f53", 0.0, 1e6, repetitions=100)
        after = pump_step(self.pop, pump, PumpSettings(transfer=0.2))
        mask = self.pop.window(0.0, 1e6)
        before = self.pop.level("f15", "g5")[mask]
        self.assertTrue(np.all(after.level("f15", "g5")[mask] <= 1e-9 * before))
        outside = ~mask
        np.testing.assert_array_equal(
            after.level("f15", "g5")[outside], before.max() * np.ones(outside.sum())
        )

    def test_monotone_in_repetitions(self):
        """Test more passes never refill the pumped level"""
        mask = self.pop.window(0.0, 1e6)
        remaining = [
            pump_step(self.pop, Pump("f53", 0.0, 1e6, repetitions=r))
            .level("f15", "g5")[mask]
            .sum()
            for r in (1, 2, 5, 20)
        ]
        self.assertEqual(remaining, sorted(remaining, reverse=True))

    def test_conservation(self):
        """Test pumping moves population between levels without losing any"""
        after = pump_step(self.pop, Pump("f15", 0.0, 5e6, repetitions=30))
        self.assertAlmostEqual(after.total, self.pop.total, delta=1e-9)
        np.testing.assert_allclose(
            after.class_weights(), self.pop.class_weights(), rtol=1e-12
        )

    def test_disjoint_pumps_commute(self):
        """Test pumps with non-overlapping windows act independently"""
        left = Pump("f15", -3e6, 1e6, repetitions=3)
        right = Pump("f35", 3e6, 1e6, repetitions=3)
        one = pump_step(pump_step(self.pop, left), right)
        other = pump_step(pump_step(self.pop, right), left)
        np.testing.assert_array_equal(one.density, other.density)

    def test_window_outside_grid(self):
        """Test a sweep that leaves the frequency grid"""
        with self.assertRaises(WindowOutsideGrid):
            pump_step(self.pop, Pump("f15", 9e6, 5e6))

    def test_unknown_transition(self):
        """Test a pump on a transition no class has"""
        with self.assertRaises(UnknownTransition):
            pump_step(self.pop, Pump("f99", 0.0, 1e6))

    def test_invalid_settings(self):
        """Test negative repetitions, zero transfer and bad redistribution rows"""
        with self.assertRaises(InvalidSchedule):
            Pump("f15", repetitions=-1)
        with self.assertRaises(InvalidSchedule):
            PumpSettings(transfer=0.0)
        with self.assertRaises(InvalidSchedule):
            PumpSettings(redistribution=((0.0, 1.0, 1.0),) * 3)


class MemoryPreparationTestCase(SimpleTestCase):
    """Test the class cleaning, spin polarization and backpump schedule"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.initial = SpectralPopulation.unprepared()
        cls.cleaned = run_preparation(cls.initial, (CLASS_CLEANING,))
        cls.polarized = run_preparation(cls.cleaned, (SPIN_POLARIZATION,))
        cls.prepared = run_preparation(cls.polarized, (BACKPUMP,))

    def test_cleaning_isolates_one_class(self):
        """Test only the reference class still absorbs the cleaning lasers"""
        activity = class_activity(self.cleaned, ("f15", "f35", "f13", "f53"), 5e6)
        survivor = activity.pop("f15")
        self.assertAlmostEqual(survivor, (1 / 6) * 201 / 801, delta=1e-9)
        for name, value in activity.items():
            self.assertLess(value, 1e-9 * survivor, name)

    def test_spin_polarization_empties_memory_levels(self):
        """Test the reference class ends up in the reservoir inside the window"""
        mask = self.polarized.window(0.0, 5e6)
        g5 = self.polarized.level("f15", "g5")[mask].sum()
        rest = sum(self.polarized.level("f15", lv)[mask].sum() for lv in ("g1", "g3"))
        self.assertLess(rest, 1e-9 * g5)

    def test_backpump_fills_g1(self):
        """Test at least 99% of the reference class is in g1 within ±350 kHz"""
        mask = self.prepared.window(0.0, 700e3)
        index = self.prepared.class_index("f15")
        inside = self.prepared.density[index][:, mask]
        fraction = inside[0].sum() / inside.sum()
        self.assertGreaterEqual(fraction, 0.99)
        self.assertEqual(int(mask.sum()), 29)

    def test_other_classes_dark_at_probe(self):
        """Test no other class absorbs at f15 inside the backpump window"""
        mask = self.prepared.window(0.0, 700e3)
        peak = self.prepared.level("f15", "g1")[mask].sum()
        for class_index, level in self.prepared.table.resonances("f15", 12.5e3):
            if class_index == 0:
                continue
            dark = self.prepared.density[class_index, level][mask].sum()
            self.assertLess(dark, 1e-9 * peak)

    def test_conservation(self):
        """Test the whole schedule conserves each class weight"""
        np.testing.assert_allclose(
            self.prepared.class_weights(), self.initial.class_weights(), rtol=1e-9
        )

    def test_schedule_matches_stagewise_run(self):
        """Test running the named schedule equals running its stages one by one"""
        whole = run_preparation(self.initial, MEMORY_SCHEDULE)
        np.testing.assert_array_equal(whole.density, self.prepared.density)


class AbsorptionSpectrumTestCase(SimpleTestCase):
    """Test absorption spectra of prepared media"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.memory = prepare_memory()
        cls.filter = prepare_filter()

    def test_unprepared_medium_is_flat(self):
        """Test a medium never pumped absorbs the calibration everywhere"""
        depth = absorption_spectrum(SpectralPopulation.unprepared(), "f15", 0.6)
        np.testing.assert_allclose(depth, 0.6, rtol=1e-9)

    def test_peak_calibration(self):
        """Test half of the absorbers remain, so the calibration doubles d"""
        self.assertAlmostEqual(self.memory.calibration, 1.2, delta=0.01)
        self.assertAlmostEqual(self.memory.peak_depth, 0.6, delta=1e-12)
        self.assertAlmostEqual(
            calibrate_peak_depth(self.memory.population, target=0.3), 0.6, delta=5e-3
        )

    def test_peak_width(self):
        """Test the absorption peak is about 700 kHz wide"""
        width = points_above(self.memory.depth, 0.3) * self.memory.population.step
        self.assertAlmostEqual(width, 700e3, delta=50e3)

    def test_transparency_trench(self):
        """Test the trench between 1 and 2 MHz is below 1e-3 of the peak"""
        distance = np.abs(self.memory.grid)
        trench = (distance >= 1e6) & (distance <= 2e6)
        self.assertLessEqual(self.memory.depth[trench].max(), 1e-3 * 0.6)

    def test_filter_floor(self):
        """Test the filter hole is dark at centre and d_fc far from it"""
        d_fc = MaterialParams().d_fc
        distance = np.abs(self.filter.grid)
        floor = self.filter.depth[distance <= 200e3]
        self.assertLessEqual(floor.max(), 1e-3 * d_fc)
        width = self.filter.population.step * (
            self.filter.grid.size - points_above(self.filter.depth, d_fc / 2)
        )
        self.assertAlmostEqual(width, 1e6, delta=50e3)
        flat = self.filter.depth[distance >= 2e6]
        np.testing.assert_allclose(flat, d_fc, rtol=1e-3)

    def test_profile(self):
        """Test the prepared spectrum becomes a normalized sampling profile"""
        profile = self.memory.profile(window=(-1e6, 1e6))
        self.assertTrue(profile.is_normalized)
        self.assertGreater(profile.average(np.abs(profile.detunings) < 400e3), 0.99)

    def test_csv_export(self):
        """Test the spectrum CSV has a header and one row per grid point"""
        with tempfile.TemporaryDirectory() as tmp:
            path = self.memory.to_csv(Path(tmp) / "spectrum.csv")
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "frequency,d")
        self.assertEqual(len(lines), 802)
        frequency, depth = lines[401].split(",")
        self.assertAlmostEqual(float(frequency), 0.0, delta=1e-6)
        self.assertAlmostEqual(float(depth), 0.6, delta=1e-3)
