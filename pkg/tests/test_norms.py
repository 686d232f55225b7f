import unittest
from unittest import mock

import numpy as np
import scipy.fft

from src.analysis.norms import (MixedNormSpec, WeightedProfile, a_exponent_floor, apply_fractional_derivative,
                                fractional_sobolev, lq_norm, mixed_time_norm, plancherel_sobolev)
from src.core.grids import Grid3D, GridSpec2D, SpinorField3D
from src.core.landau_eigen import select_mode, solve_modes
from src.core.quasimode import ConstructionParams, GridPolicy, QuasimodeSampler, make_cutoffs, sampling_grid
from src.utils.errors import PaddingError, ParameterError, QuadratureError


def gaussian_field(width=1.0):
    grid = Grid3D((-8.0, -8.0, -8.0), (0.5, 0.5, 0.5), (32, 32, 32))
    X = grid.points()
    profile = np.exp(-np.sum(X ** 2, axis=0) / (2.0 * width ** 2))
    data = np.zeros((4,) + grid.shape, dtype=np.complex128)
    data[0] = profile
    return SpinorField3D(grid, data, 0.0, 'gauss')


class TestLebesgueNorms(unittest.TestCase):

    def setUp(self):
        grid = Grid3D((0.0, 0.0, 0.0), (0.5, 0.5, 0.5), (4, 4, 4))
        self.field = SpinorField3D(grid, 0.5 * np.ones((4, 4, 4, 4)), 0.0, 'const')

    def test_constant_field(self):
        self.assertAlmostEqual(lq_norm(self.field, 1), 8.0)
        self.assertAlmostEqual(lq_norm(self.field, 2), np.sqrt(8.0))
        self.assertAlmostEqual(lq_norm(self.field, 'inf'), 1.0)

    def test_invalid_exponent(self):
        with self.assertRaises(ParameterError):
            lq_norm(self.field, 0.5)
        with self.assertRaises(ParameterError):
            lq_norm(self.field, 'two')


class TestSobolevNorms(unittest.TestCase):

    def setUp(self):
        self.field = gaussian_field()

    def test_gradient_to_mass_ratio(self):
        mass = lq_norm(self.field, 2)
        self.assertAlmostEqual(mass, np.pi ** 0.75, places=8)
        ratio = fractional_sobolev(self.field, 1.0, 2) / mass
        self.assertTrue(np.isclose(ratio, np.sqrt(1.5), rtol=1e-6))

    def test_half_derivative(self):
        value = fractional_sobolev(self.field, 0.5, 2)
        self.assertTrue(np.isclose(value, np.sqrt(2.0 * np.pi), rtol=1e-2))

    def test_plancherel_agrees(self):
        self.assertTrue(np.isclose(plancherel_sobolev(self.field, 1.0), fractional_sobolev(self.field, 1.0, 2),
                                   rtol=1e-8))

    def test_scaling_law(self):
        # ||f(./l)||_{H^s_q} = l^{3/q - s} ||f||_{H^s_q}
        narrow = fractional_sobolev(gaussian_field(1.0), 1.0, 2)
        wide = fractional_sobolev(gaussian_field(1.25), 1.0, 2)
        self.assertTrue(np.isclose(wide / narrow, 1.25 ** 0.5, rtol=1e-6))

    def test_second_order_is_laplacian(self):
        r2 = np.sum(self.field.grid.points() ** 2, axis=0)
        # Delta e^{-|x|^2/2} = (|x|^2 - 3) e^{-|x|^2/2}, ||.||_2^2 = (15/4) pi^{3/2}
        data = np.zeros_like(self.field.data)
        data[0] = (r2 - 3.0) * self.field.data[0]
        value = fractional_sobolev(self.field, 2.0, 2)
        self.assertTrue(np.isclose(value, lq_norm(self.field.with_data(data), 2), rtol=1e-6))
        self.assertTrue(np.isclose(value, np.sqrt(3.75) * np.pi ** 0.75, rtol=1e-6))
        padded = apply_fractional_derivative(self.field, 0.0)
        k1, k2, k3 = padded.grid.wave_mesh()
        laplacian = scipy.fft.ifftn(-(k1 ** 2 + k2 ** 2 + k3 ** 2) * scipy.fft.fftn(padded.data[0]))
        self.assertTrue(np.isclose(value, np.sqrt(np.sum(np.abs(laplacian) ** 2) * padded.grid.cell_volume),
                                   rtol=1e-10))

    def test_translation_in_z(self):
        recentred = SpinorField3D(Grid3D((-8.0, -8.0, 40.0), (0.5, 0.5, 0.5), (32, 32, 32)), self.field.data)
        for s in (0.5, 1.0, 2.0):
            self.assertTrue(np.isclose(fractional_sobolev(recentred, s, 4), fractional_sobolev(self.field, s, 4),
                                       rtol=1e-12))
        shifted = self.field.with_data(np.roll(self.field.data, 2, axis=3))
        for s in (0.5, 1.0):
            self.assertTrue(np.isclose(fractional_sobolev(shifted, s, 2), fractional_sobolev(self.field, s, 2),
                                       rtol=1e-8))

    def test_plancherel_mismatch_raises(self):
        with mock.patch('src.analysis.norms.plancherel_sobolev', return_value=1.0):
            with self.assertRaises(QuadratureError) as ctx:
                fractional_sobolev(self.field, 1.0, 2)
        self.assertEqual(len(ctx.exception.estimates), 2)

    def test_order_zero_returns_padded_field(self):
        derived = apply_fractional_derivative(self.field, 0.0)
        self.assertEqual(derived.grid.shape, (64, 64, 64))
        self.assertAlmostEqual(lq_norm(derived, 2), lq_norm(self.field, 2))

    def test_padding_errors(self):
        grid = Grid3D((0.0, 0.0, 0.0), (0.5, 0.5, 0.5), (8, 8, 8))
        flat = SpinorField3D(grid, np.ones((4, 8, 8, 8)), 0.0, 'flat')
        with self.assertRaises(PaddingError) as ctx:
            fractional_sobolev(flat, 0.5, 2)
        self.assertEqual(ctx.exception.boundary_ratio, 1.0)
        with self.assertRaises(ParameterError):
            fractional_sobolev(self.field, 0.5, 2, padding=1.5)
        with self.assertRaises(ParameterError):
            fractional_sobolev(self.field, 0.5, 'inf')


class TestMixedNorms(unittest.TestCase):

    def setUp(self):
        self.field = gaussian_field()
        self.mass = lq_norm(self.field, 2)

    def test_polynomial_growth_is_exact(self):
        spec = MixedNormSpec(4.0, 2.0, 0.0, 2.0)
        value = mixed_time_norm(lambda t: self.field.with_data((1.0 + t) * self.field.data, t), spec)
        expected = ((3.0 ** 5 - 1.0) / 5.0) ** 0.25 * self.mass
        self.assertTrue(np.isclose(value, expected, rtol=1e-10))

    def test_sup_in_time(self):
        spec = MixedNormSpec('inf', 2.0, 0.0, 1.0)
        bump = lambda t: self.field.with_data((1.0 + t * (1.0 - t)) * self.field.data, t)
        value = mixed_time_norm(bump, spec, rtol=1e-2)
        self.assertLessEqual(value, 1.25 * self.mass * (1.0 + 1e-12))
        self.assertGreater(value, 1.24 * self.mass)

    def test_quadrature_failure(self):
        spec = MixedNormSpec(2.0, 2.0, 0.0, 1.0)
        oscillating = lambda t: self.field.with_data((1.0 + 10.0 * np.sin(50.0 * t)) * self.field.data, t)
        with self.assertRaises(QuadratureError) as ctx:
            mixed_time_norm(oscillating, spec, rtol=1e-8, max_nodes=8)
        self.assertEqual(len(ctx.exception.estimates), 2)

    def test_truncated_quasimode_slices(self):
        # |W_R(t)| does not depend on t, so one doubling of the nodes settles the estimate
        mode = select_mode(solve_modes(GridSpec2D(8.0, 48), count=6))
        params = ConstructionParams(1.5, 0.8, 0.75, 8.0, mode=mode)
        grid = sampling_grid(params, GridPolicy(points_per_mode_scale=2.0, max_points=24))
        sampler = QuasimodeSampler.on_grid(params, make_cutoffs(), grid)
        spec = MixedNormSpec(4.0, 4.0, 0.0, params.time_horizon)
        value = mixed_time_norm(lambda t: sampler.field(sampler.WR(t), t), spec, rtol=1e-10, max_nodes=8)
        expected = params.time_horizon ** 0.25 * lq_norm(sampler.field(sampler.fR()), 4)
        self.assertGreater(expected, 0.0)
        self.assertTrue(np.isclose(value, expected, rtol=1e-10))

    def test_spec_validation(self):
        with self.assertRaises(ParameterError):
            MixedNormSpec(1.0, 2.0, 0.0, 1.0)
        with self.assertRaises(ParameterError):
            MixedNormSpec(2.0, 'inf', 0.0, 1.0)
        with self.assertRaises(ParameterError):
            MixedNormSpec(2.0, 2.0, -0.5, 1.0)
        with self.assertRaises(ParameterError):
            MixedNormSpec(2.0, 2.0, 0.0, 0.0)
        self.assertTrue(np.isinf(MixedNormSpec('inf', 2.0, 0.0, 1.0).p))


class TestWeightedProfiles(unittest.TestCase):

    def test_weight_floor(self):
        self.assertAlmostEqual(a_exponent_floor(1.5, 0.8), 0.2)
        with self.assertRaises(ParameterError):
            WeightedProfile.gradient_profile(1.5, 0.8, 0.15)
        profile = WeightedProfile.gradient_profile(1.5, 0.8, 0.3)
        self.assertEqual(profile.base, 'gradient')

    def test_invalid_profiles(self):
        with self.assertRaises(ParameterError):
            WeightedProfile(-1.0)
        with self.assertRaises(ParameterError):
            WeightedProfile(1.0, 'laplacian')


if __name__ == '__main__':
    unittest.main()
