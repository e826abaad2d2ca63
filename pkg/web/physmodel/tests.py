import json
import math
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from .config import geometry_from_dict, load_model, model_from_dict, model_to_dict
from .exceptions import (
    BranchingOutOfRange,
    FrequencyClosureViolated,
    InvalidModel,
    MalformedModel,
    NegativeRate,
    UnknownModelKey,
    UnknownTransition,
    UnnormalizedProfile,
)
from .geometry import Geometry
from .levels import LevelScheme, Transition
from .material import MaterialParams
from .spectra import SpectralProfile
from .validation import validate_model


class ValidateModelTestCase(SimpleTestCase):
    """Test model invariants"""

    def setUp(self):
        self.scheme = LevelScheme.default()
        self.params = MaterialParams()

    def test_reference_defaults_are_valid(self):
        """Test that the shipped defaults pass validation"""
        model = validate_model(self.scheme, self.params)
        self.assertIs(model.scheme, self.scheme)
        self.assertEqual(model.params.d, 0.6)
        self.assertEqual(model.params.d_fc, 6.6)
        self.assertEqual(model.params.gamma13, 5.6e3)
        self.assertEqual(model.params.gamma35bar, 18.6e3)
        self.assertEqual(model.params.gamma_opt, 12.0e3)
        self.assertEqual(model.params.opt_inhomogeneous_fwhm, 0.7e9)

    def test_negative_depth_is_rejected(self):
        """Test d = -0.1 gives NegativeRate"""
        with self.assertRaises(InvalidModel) as ctx:
            validate_model(self.scheme, replace(self.params, d=-0.1))
        self.assertEqual(len(ctx.exception.violations), 1)
        self.assertIsInstance(ctx.exception.violations[0], NegativeRate)

    def test_closure_violation_of_one_khz(self):
        """Test a 1 kHz closure error against the 1 Hz tolerance"""
        transitions = tuple(
            replace(t, carrier=t.carrier + 1e3) if t.name == "f33" else t
            for t in self.scheme.transitions
        )
        broken = replace(self.scheme, transitions=transitions)
        with self.assertRaises(InvalidModel) as ctx:
            validate_model(broken, self.params)
        self.assertTrue(
            any(
                isinstance(v, FrequencyClosureViolated)
                for v in ctx.exception.violations
            )
        )

    def test_violations_are_collected_exhaustively(self):
        """Test every violation is reported at once"""
        params = replace(self.params, gamma13=-1.0, branching_e3_to_g3=1.5)
        with self.assertRaises(InvalidModel) as ctx:
            validate_model(self.scheme, params)
        kinds = {type(v) for v in ctx.exception.violations}
        self.assertEqual(kinds, {NegativeRate, BranchingOutOfRange})

    def test_validation_is_idempotent(self):
        """Test validating a validated model returns an equal model"""
        first = validate_model(self.scheme, self.params)
        second = validate_model(first.scheme, first.params)
        self.assertEqual(first, second)

    def test_infinite_lifetime_is_allowed(self):
        """Test t1_excited may be infinite for decay-free runs"""
        model = validate_model(self.scheme, self.params.ideal())
        self.assertTrue(math.isinf(model.params.t1_excited))

    def test_default_scheme_closes(self):
        """Test the default carriers satisfy f15 + f33 = f13 + f35"""
        self.assertLess(abs(self.scheme.closure_error()), 1.0)

    def test_pair_indices(self):
        """Test transitions map onto the fixed basis order"""
        self.assertEqual(self.scheme.pair("f15"), (0, 3))
        self.assertEqual(self.scheme.pair("f35"), (1, 3))
        self.assertEqual(self.scheme.pair("f13"), (0, 2))
        self.assertEqual(self.scheme.pair("f33"), (1, 2))
        with self.assertRaises(UnknownTransition):
            self.scheme.pair("f55")


class ModelSerializationTestCase(SimpleTestCase):
    """Test model files and dictionaries"""

    def test_dict_round_trip_is_bit_exact(self):
        """Test JSON round trip reproduces every float exactly"""
        scheme = LevelScheme.default(ground_splitting=34.512345678e6)
        params = MaterialParams(d=0.6000000000000001, t1_excited=1.9e-3)
        model = validate_model(scheme, params)
        restored = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
        self.assertEqual(restored.scheme, model.scheme)
        self.assertEqual(restored.params, model.params)

    def test_load_model_file(self):
        """Test TOML model files with shorthand scheme keys"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "model.toml"
            path.write_text(
                "[scheme]\nground_splitting = 30.0e6\n"
                "[material]\nd = 0.8\n"
                "[geometry]\nangle = 0.0\n"
            )
            model, geometry = load_model(path)
        self.assertEqual(model.params.d, 0.8)
        self.assertEqual(model.scheme.ground_splitting, 30.0e6)
        self.assertEqual(geometry.angle, 0.0)

    def test_unknown_key_is_named(self):
        """Test unknown material keys are refused with their dotted name"""
        with self.assertRaises(UnknownModelKey) as ctx:
            model_from_dict({"material": {"depth": 0.6}})
        self.assertEqual(ctx.exception.key, "material.depth")

    def test_explicit_transitions(self):
        """Test explicit level and transition tables are accepted"""
        data = model_to_dict(validate_model(LevelScheme.default(), MaterialParams()))
        data["scheme"]["transitions"][0]["dipole_strength"] = 0.5
        model = model_from_dict(data)
        self.assertIsInstance(model.scheme.transitions[0], Transition)
        self.assertEqual(model.scheme.transition("f15").dipole_strength, 0.5)


    def test_malformed_file(self):
        """Test a model file that is not TOML names the file"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "model.toml"
            path.write_text("[material\nd = 0.8\n")
            with self.assertRaisesMessage(MalformedModel, str(path)):
                load_model(path)

    def test_non_numeric_value_is_named(self):
        """Test a material value that is not a number names its dotted key"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "model.toml"
            path.write_text('[material]\nd = "abc"\n')
            expected = "material.d: expected a number"
            with self.assertRaisesMessage(MalformedModel, expected):
                load_model(path)
        with self.assertRaisesMessage(MalformedModel, "geometry.angle"):
            geometry_from_dict({"angle": True})

    def test_missing_required_key_is_named(self):
        """Test explicit schemes need their level and transition keys"""
        data = model_to_dict(validate_model(LevelScheme.default(), MaterialParams()))
        del data["scheme"]["levels"][2]["label"]
        with self.assertRaisesMessage(MalformedModel, "scheme.levels.label: required"):
            model_from_dict(data)
        with self.assertRaisesMessage(MalformedModel, "scheme.transitions: required"):
            model_from_dict({"scheme": {"levels": []}})
        with self.assertRaisesMessage(MalformedModel, "material: expected a table"):
            model_from_dict({"material": 0.6})


class GeometryTestCase(SimpleTestCase):
    """Test beam geometry helpers"""

    def test_wavenumber(self):
        """Test k = 2 pi n / lambda"""
        geometry = Geometry()
        self.assertAlmostEqual(
            geometry.wavenumber, 2 * math.pi * 1.8 / 580.04e-9, delta=1e-3
        )

    def test_control_direction_is_unit(self):
        """Test the control direction is normalized"""
        x, y = Geometry(angle=0.03).control_direction
        self.assertAlmostEqual(x * x + y * y, 1.0, delta=1e-12)

    def test_silencing_threshold(self):
        """Test mismatch times length is compared with 2 pi"""
        geometry = Geometry(sample_length=8e-3)
        self.assertTrue(geometry.is_silenced(1000.0))
        self.assertFalse(geometry.is_silenced(700.0))


class SpectralProfileTestCase(SimpleTestCase):
    """Test discrete spectral profiles"""

    def test_delta_profile_samples_constant(self):
        """Test a delta profile always returns its center"""
        profile = SpectralProfile.delta(0.0)
        samples = profile.sample(np.array([0.1, 0.5, 0.9]))
        np.testing.assert_array_equal(samples, np.zeros(3))

    def test_unnormalized_profile(self):
        """Test weights not summing to one are refused for sampling"""
        profile = SpectralProfile(np.array([0.0, 1.0]), np.array([0.5, 0.6]))
        with self.assertRaises(UnnormalizedProfile):
            profile.sample(np.array([0.5]))

    def test_gaussian_sampling_width(self):
        """Test samples from a Gaussian profile reproduce its FWHM"""
        profile = SpectralProfile.gaussian(700e3, points=401, span=4.0)
        rng = np.random.default_rng(7)
        samples = profile.sample(rng.random(200_000))
        fwhm = 2 * math.sqrt(2 * math.log(2)) * samples.std()
        self.assertAlmostEqual(fwhm / 700e3, 1.0, delta=0.02)

    def test_from_density_window(self):
        """Test densities are windowed and normalized"""
        grid = np.linspace(-1e6, 1e6, 81)
        density = np.ones_like(grid)
        profile = SpectralProfile.from_density(grid, density, window=(-2e5, 2e5))
        self.assertTrue(profile.is_normalized)
        self.assertLessEqual(profile.detunings.max(), 2e5)

    def test_empty_window_is_refused(self):
        """Test a window without weight cannot form a profile"""
        grid = np.linspace(-1e6, 1e6, 81)
        with self.assertRaises(UnnormalizedProfile):
            SpectralProfile.from_density(grid, np.zeros_like(grid))
