"""
Spectral propagators for the magnetic Dirac flow u(t) = exp(i t D_A) f,
D_A = -i a.grad - a.A, i.e. i d_t u + D_A u = 0.

The free factor exp(i t a.xi) is applied exactly in Fourier space, the
potential factor exp(-i t a.A(x)) exactly pointwise; strang_evolve composes
them as P(dt/2) F(dt) P(dt/2).
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import pandas as pd
import scipy.fft

from src.core.dirac_algebra import apply_exp_i_alpha_dot
from src.core.grids import Grid3D, SpinorField3D, fft_workers
from src.core.quasimode import QuasimodeSampler, eval_A
from src.utils.errors import BoxTruncationError, DomainError, PaddingError, ParameterError
from src.utils.logger import setup_logger

logger = setup_logger('Evolve')

DEFAULT_BOUNDARY_TOL = 1e-6
# The free comparison flow disperses at unit speed; its front is allowed to touch the
# box at this level during the persistence experiment, and the ratios are recorded
PERSISTENCE_BOUNDARY_TOL = 1e-2


@dataclass
class PropagatorSpec:
    dt: float
    steps: int
    potential: Optional[Callable] = None
    checkpoints: List[int] = field(default_factory=list)
    boundary_tol: Optional[float] = DEFAULT_BOUNDARY_TOL

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"Time step must be positive, got {self.dt}")
        if self.steps < 1:
            raise ParameterError(f"Step count must be at least 1, got {self.steps}")
        self.checkpoints = sorted(set(int(c) for c in self.checkpoints))
        if any(c < 0 or c > self.steps for c in self.checkpoints):
            raise ParameterError(f"Checkpoints {self.checkpoints} outside [0, {self.steps}]")

    @property
    def duration(self):
        return self.dt * self.steps


@dataclass
class Trajectory:
    times: List[float]
    fields: List[SpinorField3D]
    masses: List[float]
    boundary_ratios: List[float]

    @property
    def final(self):
        return self.fields[-1]

    def mass_drift(self):
        return max(abs(m - self.masses[0]) for m in self.masses) / self.masses[0]


def l2_norm(field):
    return float(np.sqrt(np.sum(np.abs(field.data.ravel()) ** 2) * field.grid.cell_volume))


def _free_symbol(grid):
    return np.stack(grid.wave_mesh())


def free_step(field, t, boundary_tol=None, symbol=None):
    """exp(i t a.xi) on every Fourier coefficient (identity at xi = 0)."""
    if boundary_tol is not None:
        ratio = field.boundary_ratio()
        if ratio > boundary_tol:
            raise PaddingError(f"Field reaches the box boundary before the free step: ratio {ratio:.3e}", ratio)
    if t == 0:
        return field.with_data(field.data.copy())
    xi = _free_symbol(field.grid) if symbol is None else symbol
    workers = fft_workers()
    spectrum = scipy.fft.fftn(field.data, axes=(1, 2, 3), workers=workers)
    spectrum = apply_exp_i_alpha_dot(xi, t, spectrum)
    data = scipy.fft.ifftn(spectrum, axes=(1, 2, 3), workers=workers)
    return field.with_data(data, field.time_tag + t)


def potential_step(field, dt, A_eval=None, a_field=None):
    """Pointwise exp(-i dt a.A(x)); A_eval is evaluated on the grid unless a_field is given."""
    if a_field is None:
        if A_eval is None:
            return field.with_data(field.data.copy())
        a_field = np.asarray(A_eval(field.grid.points()), dtype=float)
    return field.with_data(apply_exp_i_alpha_dot(a_field, -dt, field.data))


def strang_step(field, dt, a_field=None, symbol=None):
    """One P(dt/2) F(dt) P(dt/2) step; dt may be negative."""
    half = field if a_field is None else field.with_data(apply_exp_i_alpha_dot(a_field, -0.5 * dt, field.data))
    moved = free_step(half, dt, symbol=symbol)
    if a_field is None:
        return moved
    return moved.with_data(apply_exp_i_alpha_dot(a_field, -0.5 * dt, moved.data), moved.time_tag)


def strang_evolve(f, spec):
    """
    Evolve f for spec.steps Strang steps, keeping the fields at the checkpoint
    step indices (and always the final one).
    """
    a_field = None
    if spec.potential is not None:
        a_field = np.asarray(spec.potential(f.grid.points()), dtype=float)
        a_max = float(np.sqrt(np.sum(a_field ** 2, axis=0)).max())
        logger.debug(f"Potential on {f.grid.shape}: max |A| = {a_max:.4f}, dt max|A| = {spec.dt * a_max:.4f}")
    symbol = _free_symbol(f.grid)
    wanted = set(spec.checkpoints) | {spec.steps}

    u = f
    times, fields, masses, ratios = [], [], [], []
    if 0 in wanted:
        times.append(f.time_tag)
        fields.append(f)
        masses.append(l2_norm(f))
        ratios.append(f.boundary_ratio())
    for step in range(1, spec.steps + 1):
        u = strang_step(u, spec.dt, a_field, symbol)
        if spec.boundary_tol is not None or step in wanted:
            ratio = u.boundary_ratio()
            if spec.boundary_tol is not None and ratio > spec.boundary_tol:
                raise BoxTruncationError(f"Field reached the box boundary at step {step} "
                                         f"(ratio {ratio:.3e} > {spec.boundary_tol:.1e})", step)
            if step in wanted:
                times.append(u.time_tag)
                fields.append(u)
                masses.append(l2_norm(u))
                ratios.append(ratio)
    logger.debug(f"Evolved {spec.steps} steps of dt={spec.dt}, {len(fields)} checkpoints kept")
    return Trajectory(times, fields, masses, ratios)


def fidelity(u, ref):
    """|<u, ref>| / (||u|| ||ref||)."""
    if u.grid.shape != ref.grid.shape or not np.allclose(u.grid.spacing, ref.grid.spacing) \
            or not np.allclose(u.grid.origin, ref.grid.origin):
        raise ParameterError("Fidelity needs fields on the same grid")
    nu, nr = l2_norm(u), l2_norm(ref)
    if nu == 0.0 or nr == 0.0:
        raise DomainError("Fidelity of a zero field is undefined")
    overlap = np.vdot(ref.data.ravel(), u.data.ravel()) * u.grid.cell_volume
    return float(min(1.0, abs(overlap) / (nu * nr)))


def choose_time_step(grid, horizon, dt_max, a_max=0.0, max_dt_potential=0.1, max_dt_frequency=0.5):
    """
    Largest dt <= dt_max with dt max|A| <= max_dt_potential and dt xi_max <= max_dt_frequency
    that divides the horizon evenly. Returns (dt, steps).
    """
    xi_max = float(np.sqrt(sum(np.max(np.abs(k)) ** 2 for k in grid.wavenumbers())))
    limit = min(dt_max, max_dt_frequency / xi_max)
    if a_max > 0:
        limit = min(limit, max_dt_potential / a_max)
    steps = max(1, int(np.ceil(horizon / limit - 1e-12)))
    return horizon / steps, steps


def evolution_grid(params, policy):
    """
    Box around the truncation support widened by the travel distance R^beta,
    with z kept strictly positive so the singular point of A stays outside.
    """
    R, spread, horizon = params.R, params.R ** params.gamma, params.time_horizon
    half_width = policy.y_margin * (R + spread) + 0.5 * horizon
    z_lo = max(0.25 * (R - spread), R - spread - horizon)
    z_hi = R + spread + 0.75 * horizon
    h = R ** (0.5 * params.delta) / policy.points_per_mode_scale
    return Grid3D.from_bounds((-half_width, -half_width, z_lo), (half_width, half_width, z_hi), h,
                              policy.max_points)


@dataclass
class PersistenceResult:
    times: List[float]
    magnetic: List[float]
    free: List[float]
    magnetic_boundary: List[float]
    free_boundary: List[float]
    dt: float
    steps: int
    final_magnetic: Optional[SpinorField3D] = None
    final_free: Optional[SpinorField3D] = None

    @property
    def dominates(self):
        """Magnetic fidelity >= free fidelity at every checkpoint."""
        return all(m >= f for m, f in zip(self.magnetic, self.free))

    @property
    def strict_at_horizon(self):
        return self.magnetic[-1] > self.free[-1]

    def to_frame(self):
        return pd.DataFrame({'t': self.times, 'fidelity_magnetic': self.magnetic, 'fidelity_free': self.free,
                             'boundary_magnetic': self.magnetic_boundary, 'boundary_free': self.free_boundary})


def persistence_experiment(params, cutoffs, policy, checkpoints=8, dt_max=0.05, max_dt_potential=0.1,
                           max_dt_frequency=0.5):
    """
    Evolve f_R under the magnetic flow and under the free flow up to R^beta and
    compare fidelity to W_R(t) at evenly spaced checkpoints.
    """
    grid = evolution_grid(params, policy)
    sampler = QuasimodeSampler.on_grid(params, cutoffs, grid)
    f = sampler.field(sampler.fR(), 0.0, 'f_R')

    def potential(points):
        return eval_A(params.delta, points)

    a_field = potential(grid.points())
    a_max = float(np.sqrt(np.sum(a_field ** 2, axis=0)).max())
    dt, steps = choose_time_step(grid, params.time_horizon, dt_max, a_max, max_dt_potential, max_dt_frequency)
    marks = sorted({int(round(k * steps / checkpoints)) for k in range(1, checkpoints + 1)})
    logger.info(f"Persistence run at R={params.R}: grid {grid.shape}, dt={dt:.5f}, {steps} steps")

    magnetic = strang_evolve(f, PropagatorSpec(dt, steps, potential, marks, PERSISTENCE_BOUNDARY_TOL))
    free = strang_evolve(f, PropagatorSpec(dt, steps, None, marks, PERSISTENCE_BOUNDARY_TOL))

    mag_fid, free_fid = [], []
    for t, u_mag, u_free in zip(magnetic.times, magnetic.fields, free.fields):
        reference = sampler.field(sampler.WR(t), t, 'W_R')
        mag_fid.append(fidelity(u_mag, reference))
        free_fid.append(fidelity(u_free, reference))
    result = PersistenceResult(magnetic.times, mag_fid, free_fid, magnetic.boundary_ratios, free.boundary_ratios,
                               dt, steps, magnetic.final, free.final)
    logger.info(f"Successfully ran persistence experiment: final fidelity magnetic {mag_fid[-1]:.4f}, "
                f"free {free_fid[-1]:.4f}")
    return result
