import unittest

import numpy as np

from src.core.dirac_algebra import exp_i_alpha_dot
from src.core.evolve import (PropagatorSpec, choose_time_step, fidelity, free_step, l2_norm, persistence_experiment,
                             potential_step, strang_evolve, strang_step)
from src.core.grids import Grid3D, GridSpec2D, SpinorField3D
from src.core.landau_eigen import select_mode, solve_modes
from src.core.quasimode import ConstructionParams, GridPolicy, make_cutoffs
from src.utils.errors import BoxTruncationError, DomainError, PaddingError, ParameterError


def constant_field_potential(points):
    return 0.5 * np.stack([points[1], -points[0], np.zeros_like(points[0])])


def gaussian_packet(grid, width=1.0, momentum=(0.0, 0.0, 1.5)):
    X = grid.points()
    profile = np.exp(-np.sum(X ** 2, axis=0) / (2.0 * width ** 2))
    wave = np.exp(1j * np.tensordot(np.asarray(momentum), X, axes=1))
    spinor = np.array([1.0, 0.5j, -0.25, 0.5])
    return SpinorField3D(grid, spinor[:, None, None, None] * (profile * wave)[None], 0.0, 'packet')


class TestFreeFlow(unittest.TestCase):

    def test_plane_wave_oracle(self):
        n = 16
        grid = Grid3D((0.0, 0.0, 0.0), (2.0 * np.pi / n,) * 3, (n, n, n))
        k = np.array([1.0, 2.0, -1.0])
        spinor = np.array([0.3, 1.0j, -0.5, 0.2 + 0.1j])
        wave = np.exp(1j * np.tensordot(k, grid.points(), axes=1))
        f = SpinorField3D(grid, spinor[:, None, None, None] * wave[None])
        t = 0.7
        u = free_step(f, t)
        expected = (exp_i_alpha_dot(k, t) @ spinor)[:, None, None, None] * wave[None]
        self.assertTrue(np.allclose(u.data, expected, atol=1e-12))
        self.assertAlmostEqual(u.time_tag, t)

    def test_zero_time_is_identity(self):
        grid = Grid3D((-4.0, -4.0, -4.0), (0.5, 0.5, 0.5), (16, 16, 16))
        f = gaussian_packet(grid)
        self.assertTrue(np.array_equal(free_step(f, 0.0).data, f.data))

    def test_boundary_guard(self):
        grid = Grid3D((0.0, 0.0, 0.0), (0.5, 0.5, 0.5), (8, 8, 8))
        flat = SpinorField3D(grid, np.ones((4, 8, 8, 8)))
        with self.assertRaises(PaddingError):
            free_step(flat, 0.1, boundary_tol=1e-6)


class TestStrangSplitting(unittest.TestCase):

    def setUp(self):
        self.grid = Grid3D((-5.0, -5.0, -5.0), (0.25, 0.25, 0.25), (40, 40, 40))
        self.f = gaussian_packet(self.grid, width=0.7, momentum=(0.0, 0.0, 0.0))

    def test_mass_is_conserved(self):
        rng = np.random.default_rng(8)
        grid = Grid3D((-4.0, -4.0, -4.0), (0.5, 0.5, 0.5), (16, 16, 16))
        data = rng.normal(size=(4, 16, 16, 16)) + 1j * rng.normal(size=(4, 16, 16, 16))
        spec = PropagatorSpec(0.01, 1000, constant_field_potential, [0, 500], boundary_tol=None)
        trajectory = strang_evolve(SpinorField3D(grid, data), spec)
        self.assertEqual(len(trajectory.fields), 3)
        self.assertLess(trajectory.mass_drift(), 1e-10)
        self.assertAlmostEqual(trajectory.times[-1], 10.0)

    def test_second_order_convergence(self):
        finals = []
        for dt in (0.05, 0.025, 0.0125):
            steps = int(round(1.0 / dt))
            spec = PropagatorSpec(dt, steps, constant_field_potential, boundary_tol=None)
            finals.append(strang_evolve(self.f, spec).final)
        coarse = l2_norm(finals[0].with_data(finals[0].data - finals[1].data))
        fine = l2_norm(finals[1].with_data(finals[1].data - finals[2].data))
        order = np.log2(coarse / fine)
        self.assertGreater(order, 1.8)
        self.assertLess(order, 2.2)

    def test_step_is_reversible(self):
        a_field = constant_field_potential(self.grid.points())
        there = strang_step(self.f, 0.1, a_field)
        back = strang_step(there, -0.1, a_field)
        self.assertTrue(np.allclose(back.data, self.f.data, atol=1e-12))

    def test_potential_step(self):
        moved = potential_step(self.f, 0.2, A_eval=constant_field_potential)
        a_field = constant_field_potential(self.grid.points())
        self.assertTrue(np.allclose(moved.data, potential_step(self.f, 0.2, a_field=a_field).data))
        self.assertTrue(np.allclose(l2_norm(moved), l2_norm(self.f)))
        self.assertTrue(np.array_equal(potential_step(self.f, 0.2).data, self.f.data))

    def test_box_truncation(self):
        grid = Grid3D((0.0, 0.0, 0.0), (0.5, 0.5, 0.5), (8, 8, 8))
        flat = SpinorField3D(grid, np.ones((4, 8, 8, 8)))
        with self.assertRaises(BoxTruncationError) as ctx:
            strang_evolve(flat, PropagatorSpec(0.01, 5))
        self.assertEqual(ctx.exception.step, 1)

    def test_spec_validation(self):
        with self.assertRaises(ParameterError):
            PropagatorSpec(0.0, 10)
        with self.assertRaises(ParameterError):
            PropagatorSpec(0.1, 0)
        with self.assertRaises(ParameterError):
            PropagatorSpec(0.1, 3, checkpoints=[5])
        self.assertEqual(PropagatorSpec(0.1, 6, checkpoints=[3, 1, 3]).checkpoints, [1, 3])


class TestFidelity(unittest.TestCase):

    def setUp(self):
        self.grid = Grid3D((-4.0, -4.0, -4.0), (0.5, 0.5, 0.5), (16, 16, 16))
        self.f = gaussian_packet(self.grid)

    def test_phase_invariance(self):
        self.assertAlmostEqual(fidelity(self.f, self.f), 1.0)
        rotated = self.f.with_data(np.exp(0.3j) * 2.0 * self.f.data)
        self.assertAlmostEqual(fidelity(rotated, self.f), 1.0)

    def test_orthogonal_components(self):
        upper = np.zeros_like(self.f.data)
        lower = np.zeros_like(self.f.data)
        upper[0] = self.f.data[0]
        lower[2] = self.f.data[2]
        self.assertAlmostEqual(fidelity(self.f.with_data(upper), self.f.with_data(lower)), 0.0)

    def test_errors(self):
        other = Grid3D((-4.0, -4.0, -4.0), (0.5, 0.5, 0.5), (8, 8, 8))
        with self.assertRaises(ParameterError):
            fidelity(self.f, SpinorField3D(other, np.ones((4, 8, 8, 8))))
        with self.assertRaises(DomainError):
            fidelity(self.f, self.f.with_data(np.zeros_like(self.f.data)))


class TestTimeStep(unittest.TestCase):

    def test_frequency_and_potential_limits(self):
        grid = Grid3D((0.0, 0.0, 0.0), (0.5, 0.5, 0.5), (16, 16, 16))
        xi_max = 2.0 * np.pi * np.sqrt(3.0)
        dt, steps = choose_time_step(grid, 1.0, 0.05)
        self.assertLessEqual(dt * xi_max, 0.5 + 1e-12)
        self.assertAlmostEqual(dt * steps, 1.0)
        dt, steps = choose_time_step(grid, 1.0, 0.05, a_max=10.0)
        self.assertEqual(steps, 100)
        self.assertAlmostEqual(dt, 0.01)


class TestPersistence(unittest.TestCase):

    def test_small_persistence_run(self):
        mode = select_mode(solve_modes(GridSpec2D(8.0, 48), count=6))
        params = ConstructionParams(1.5, 0.8, 0.3, 8.0, mode=mode)
        result = persistence_experiment(params, make_cutoffs(), GridPolicy(points_per_mode_scale=2.0, max_points=24),
                                        checkpoints=4)
        self.assertEqual(len(result.times), 4)
        self.assertEqual(len(result.magnetic), len(result.free))
        self.assertAlmostEqual(result.times[-1], params.time_horizon)
        for value in result.magnetic + result.free:
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 1.0)
        self.assertIsNotNone(result.final_magnetic)
        self.assertAlmostEqual(l2_norm(result.final_magnetic), l2_norm(result.final_free))
        frame = result.to_frame()
        self.assertEqual(list(frame.columns), ['t', 'fidelity_magnetic', 'fidelity_free',
                                               'boundary_magnetic', 'boundary_free'])


if __name__ == '__main__':
    unittest.main()
