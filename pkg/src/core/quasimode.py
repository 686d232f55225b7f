"""
Quasimode construction on R^3 = {x = (y, z)}.

The eigenmode v of the constant-field operator T is rescaled into the
profile omega(y, z) = v(y / z^{delta/2}), turned into the standing wave
W = exp(i lam t / z^{delta/2}) omega and truncated by smooth cutoffs to W_R.
With A_lin = z^{-delta} (y2, -y1, 0) the truncation solves

    i d_t W_R + D_{A_lin} W_R = F_R,      F_R = c F + G_R,

where c = psi_R(z) psi(rho) chi(rho), rho = |y|^2 / z^2, F = -i a3 d_z W and
G_R = -i (a . grad c) W. The full potential A(x) = |x|^{-delta} (y2, -y1, 0)
differs from A_lin by z^{1-delta} R1(y/z), so W_R solves i d_t u + D_A u = F_tilde_R
with F_tilde_R = F_R - z^{1-delta} (a . R1) W_R on (0, R^beta).

All evaluators take point arrays of shape (3, ...) and return spinor arrays
of shape (4, ...).
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

from src.core.dirac_algebra import alpha_contract, alpha_dot_field
from src.core.grids import Grid3D, SpinorField3D, spectral_gradient
from src.core.landau_eigen import EigenMode2D, mode_gradient, upsample_mode
from src.utils.errors import DomainError, ParameterError
from src.utils.logger import setup_logger

logger = setup_logger('Quasimode')

# F_tilde_R = F_R - REMAINDER_SIGN * z^{1-delta} (a . R1(y/z)) W_R makes W_R an exact solution of
# i d_t u + D_A u = F_tilde_R with D_A = -i a.grad - a.A
REMAINDER_SIGN = +1


@dataclass(frozen=True)
class ConstructionParams:
    delta: float
    gamma: float
    beta: float
    R: float
    mode: Optional[EigenMode2D] = field(default=None, compare=False, repr=False)
    interpolator: Optional['ModeInterpolator'] = field(default=None, compare=False, repr=False)
    oversample: int = field(default=8, compare=False)

    def __post_init__(self):
        if not 1.0 < self.delta < 2.0:
            raise ParameterError(f"delta must lie in (1, 2), got {self.delta}")
        if not 0.5 < self.gamma < 1.0:
            raise ParameterError(f"gamma must lie in (1/2, 1), got {self.gamma}")
        if not self.R > 2.0:
            raise ParameterError(f"R must exceed 2, got {self.R}")
        if not self.beta > 0.0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if self.mode is not None and self.interpolator is None:
            object.__setattr__(self, 'interpolator', ModeInterpolator(self.mode, self.oversample))

    @property
    def above_threshold(self):
        """beta > delta - gamma, the precondition of the blow-up argument."""
        return self.beta > self.delta - self.gamma

    @property
    def time_horizon(self):
        return self.R ** self.beta

    @property
    def lam(self):
        return self._interp().lam

    def with_R(self, R):
        return ConstructionParams(self.delta, self.gamma, self.beta, R, self.mode, self.interpolator,
                                  self.oversample)

    def with_mode(self, mode):
        return ConstructionParams(self.delta, self.gamma, self.beta, self.R, mode, None, self.oversample)

    def _interp(self):
        if self.interpolator is None:
            raise ParameterError("ConstructionParams has no eigenmode attached")
        return self.interpolator

    def describe(self):
        return {'delta': self.delta, 'gamma': self.gamma, 'beta': self.beta, 'R': self.R,
                'lambda': None if self.mode is None else self.mode.lam}


def _bump(t):
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0.0, t, 1.0)
    return np.where(t > 0.0, np.exp(-1.0 / safe), 0.0)


def _bump_prime(t):
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0.0, t, 1.0)
    return np.where(t > 0.0, np.exp(-1.0 / safe) / safe ** 2, 0.0)


def smooth_step(t):
    """0 for t <= 0, 1 for t >= 1, C-infinity in between."""
    a, b = _bump(t), _bump(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def smooth_step_prime(t):
    t = np.asarray(t, dtype=float)
    a, b = _bump(t), _bump(1.0 - t)
    da, db = _bump_prime(t), _bump_prime(1.0 - t)
    return (da * b + a * db) / (a + b) ** 2


def _psi(z):
    return smooth_step(4.0 * (1.0 - np.abs(z)))


def _psi_prime(z):
    return -4.0 * np.sign(z) * smooth_step_prime(4.0 * (1.0 - np.abs(z)))


def _chi(z):
    r = np.abs(z)
    return smooth_step(8.0 * (r - 0.25)) * smooth_step(4.0 * (1.0 - r))


def _chi_prime(z):
    r = np.abs(z)
    inner, outer = 8.0 * (r - 0.25), 4.0 * (1.0 - r)
    return np.sign(z) * (8.0 * smooth_step_prime(inner) * smooth_step(outer)
                         - 4.0 * smooth_step(inner) * smooth_step_prime(outer))


@dataclass(frozen=True)
class CutoffSpec:
    """psi = 1 on |z| <= psi_plateau, 0 beyond 1; chi = 1 on chi_plateau, 0 off (chi_inner, 1)."""
    psi: Callable
    chi: Callable
    psi_prime: Callable
    chi_prime: Callable
    psi_plateau: float = 0.75
    chi_inner: float = 0.25
    chi_plateau: tuple = (0.375, 0.75)
    support: float = 1.0

    def psi_R(self, z, R, gamma):
        return self.psi((np.asarray(z) - R) / R ** gamma)

    def psi_R_prime(self, z, R, gamma):
        scale = R ** gamma
        return self.psi_prime((np.asarray(z) - R) / scale) / scale


def make_cutoffs():
    return CutoffSpec(psi=_psi, chi=_chi, psi_prime=_psi_prime, chi_prime=_chi_prime)


class ModeInterpolator:
    """
    Bicubic interpolation of v and of G(u) = u . grad v on a Fourier-upsampled
    copy of the mode grid; zero outside the grid.
    """

    def __init__(self, mode, oversample=8):
        fine = upsample_mode(mode, oversample)
        d1, d2 = mode_gradient(fine)
        U1, U2 = fine.grid.mesh()
        weighted = U1 * d1 + U2 * d2
        axis = fine.grid.axis
        self.lam = float(mode.lam)
        self.lower = float(axis[0])
        self.upper = float(axis[-1])
        self.fine = fine
        self._v = [self._splines(axis, fine.v[c]) for c in range(4)]
        self._g = [self._splines(axis, weighted[c]) for c in range(4)]
        logger.debug(f"Mode interpolator on {fine.grid.N}^2 nodes, lambda={self.lam:.8f}")

    @staticmethod
    def _splines(axis, values):
        return (RectBivariateSpline(axis, axis, values.real, kx=3, ky=3),
                RectBivariateSpline(axis, axis, values.imag, kx=3, ky=3))

    def _evaluate(self, splines, u1, u2):
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        flat1, flat2 = u1.ravel(), u2.ravel()
        inside = (flat1 >= self.lower) & (flat1 <= self.upper) & (flat2 >= self.lower) & (flat2 <= self.upper)
        out = np.zeros((4, flat1.size), dtype=np.complex128)
        if inside.any():
            a, b = flat1[inside], flat2[inside]
            for c, (re, im) in enumerate(splines):
                out[c, inside] = re.ev(a, b) + 1j * im.ev(a, b)
        return out.reshape((4,) + u1.shape)

    def values(self, u1, u2):
        return self._evaluate(self._v, u1, u2)

    def weighted_gradient(self, u1, u2):
        return self._evaluate(self._g, u1, u2)


def _components(x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != 3:
        raise ParameterError(f"Points must have leading dimension 3, got shape {x.shape}")
    return x[0], x[1], x[2]


def _require_positive_z(z):
    if np.any(np.asarray(z) <= 0.0):
        raise DomainError("Profile evaluated at z <= 0")


def alpha3(psi):
    return alpha_dot_field((0.0, 0.0, 1.0), psi)


def eval_A(delta, x):
    """A(x) = |x|^{-delta} (y2, -y1, 0)."""
    y1, y2, z = _components(x)
    norm = np.sqrt(y1 ** 2 + y2 ** 2 + z ** 2)
    if np.any(norm == 0.0):
        raise DomainError("Magnetic potential evaluated at the origin")
    scale = norm ** (-delta)
    return np.stack([scale * y2, -scale * y1, np.zeros_like(scale * y1)])


def eval_A_linear(delta, x):
    """The linearization z^{-delta} (y2, -y1, 0) about the z axis."""
    y1, y2, z = _components(x)
    _require_positive_z(z)
    scale = z ** (-delta)
    return np.stack([scale * y2, -scale * y1, np.zeros_like(scale * y1)])


def eval_remainder_R1(delta, w):
    """R1(w) = ((1 + |w|^2)^{-delta/2} - 1) (w2, -w1, 0); |R1(w)| <= |w|^2 for |w| < 1."""
    w = np.asarray(w, dtype=float)
    w1, w2 = w[0], w[1]
    factor = (1.0 + w1 ** 2 + w2 ** 2) ** (-0.5 * delta) - 1.0
    return np.stack([factor * w2, -factor * w1, np.zeros_like(factor * w1)])


def eval_omega(params, x):
    y1, y2, z = _components(x)
    _require_positive_z(z)
    s = z ** (0.5 * params.delta)
    return params._interp().values(y1 / s, y2 / s)


def eval_W(params, t, x):
    _, _, z = _components(x)
    _require_positive_z(z)
    phase = np.exp(1j * params.lam * t / z ** (0.5 * params.delta))
    return phase * eval_omega(params, x)


def _source_F(delta, lam, t, z, s, v, g):
    """-i a3 d_z W expressed through v and G = u . grad v at u = y / z^{delta/2}."""
    phase = np.exp(1j * lam * t / s)
    p_term = -(delta * lam / (2.0 * z * s)) * alpha3(v)
    q_term = (1j * delta / (2.0 * z)) * alpha3(g)
    return phase * (t * p_term + q_term)


def eval_F(params, t, x):
    y1, y2, z = _components(x)
    _require_positive_z(z)
    s = z ** (0.5 * params.delta)
    interp = params._interp()
    v = interp.values(y1 / s, y2 / s)
    g = interp.weighted_gradient(y1 / s, y2 / s)
    return _source_F(params.delta, interp.lam, t, z, s, v, g)


GR_TERMS = ('transverse', 'psi_R_prime', 'rho_psi_prime', 'rho_chi_prime')


class QuasimodeSampler:
    """
    Every quasimode quantity on a fixed point set. Cutoffs, the interpolated
    mode and its weighted gradient are evaluated once on the support of the
    truncation; time slices then cost a phase and a few contractions.
    """

    def __init__(self, params, cutoffs, points, grid=None):
        self.params = params
        self.cutoffs = cutoffs
        self.grid = grid
        points = np.asarray(points, dtype=float)
        self.shape = points.shape[1:]
        y1, y2, z = (c.ravel() for c in _components(points))

        positive = z > 0.0
        safe_z = np.where(positive, z, 1.0)
        rho = (y1 ** 2 + y2 ** 2) / safe_z ** 2
        R, gamma = params.R, params.gamma
        psi_r = np.where(positive, cutoffs.psi_R(z, R, gamma), 0.0)
        dpsi_r = np.where(positive, cutoffs.psi_R_prime(z, R, gamma), 0.0)
        psi, dpsi = cutoffs.psi(rho), cutoffs.psi_prime(rho)
        chi, dchi = cutoffs.chi(rho), cutoffs.chi_prime(rho)
        k_rho = dpsi * chi + psi * dchi
        mask = positive & ((psi_r != 0.0) | (dpsi_r != 0.0)) & ((psi * chi != 0.0) | (k_rho != 0.0))
        self.mask = mask
        self.size = mask.size
        self.count = int(mask.sum())

        self.y1, self.y2, self.z = y1[mask], y2[mask], z[mask]
        self.s = self.z ** (0.5 * params.delta)
        self.psi_r, self.dpsi_r = psi_r[mask], dpsi_r[mask]
        self.psi, self.dpsi, self.chi, self.dchi = psi[mask], dpsi[mask], chi[mask], dchi[mask]
        self.cutoff = self.psi_r * self.psi * self.chi
        interp = params._interp()
        self.lam = interp.lam
        u1, u2 = self.y1 / self.s, self.y2 / self.s
        self.v = interp.values(u1, u2)
        self.g = interp.weighted_gradient(u1, u2)
        logger.debug(f"Sampler on {self.size} points, {self.count} inside the truncation support")

    @classmethod
    def on_grid(cls, params, cutoffs, grid):
        return cls(params, cutoffs, grid.points(), grid)

    def _scatter(self, values):
        out = np.zeros((4, self.size), dtype=np.complex128)
        out[:, self.mask] = values
        return out.reshape((4,) + self.shape)

    def _phase(self, t):
        return np.exp(1j * self.lam * t / self.s)

    def _W(self, t):
        return self._phase(t) * self.v

    def _WR(self, t):
        return self.cutoff * self._W(t)

    def _F_term(self, t):
        return self.cutoff * _source_F(self.params.delta, self.lam, t, self.z, self.s, self.v, self.g)

    def _GR_terms(self, t):
        W = self._W(t)
        z = self.z
        radial = -2.0 * (self.y1 ** 2 + self.y2 ** 2) / z ** 3
        transverse = self.psi_r * (self.dpsi * self.chi + self.psi * self.dchi) * (2.0 / z ** 2)
        return {
            'transverse': -1j * transverse * alpha_dot_field((self.y1, self.y2, 0.0), W),
            'psi_R_prime': -1j * self.dpsi_r * self.psi * self.chi * alpha3(W),
            'rho_psi_prime': -1j * self.psi_r * self.dpsi * self.chi * radial * alpha3(W),
            'rho_chi_prime': -1j * self.psi_r * self.psi * self.dchi * radial * alpha3(W),
        }

    def _FR(self, t):
        return self._F_term(t) + sum(self._GR_terms(t).values())

    def _remainder(self, t, sign=REMAINDER_SIGN):
        w = np.stack([self.y1 / self.z, self.y2 / self.z])
        r1 = eval_remainder_R1(self.params.delta, w)
        return sign * self.z ** (1.0 - self.params.delta) * alpha_dot_field(r1, self._WR(t))

    def _F_tilde(self, t, sign=REMAINDER_SIGN):
        if not 0.0 < t < self.params.time_horizon:
            return np.zeros((4, self.count), dtype=np.complex128)
        return self._FR(t) - self._remainder(t, sign)

    def WR(self, t):
        return self._scatter(self._WR(t))

    def fR(self):
        return self._scatter(self._WR(0.0))

    def F_term(self, t):
        return self._scatter(self._F_term(t))

    def GR(self, t):
        return self._scatter(sum(self._GR_terms(t).values()))

    def GR_terms(self, t):
        return {name: self._scatter(value) for name, value in self._GR_terms(t).items()}

    def FR(self, t):
        return self._scatter(self._FR(t))

    def F_tilde(self, t, sign=REMAINDER_SIGN):
        return self._scatter(self._F_tilde(t, sign))

    def field(self, values, t=0.0, label=''):
        if self.grid is None:
            raise ParameterError("Sampler was built on a point set, not a Grid3D")
        return SpinorField3D(self.grid, values, t, label)


def eval_WR(params, cutoffs, t, x):
    return QuasimodeSampler(params, cutoffs, x).WR(t)


def eval_fR(params, cutoffs, x):
    return QuasimodeSampler(params, cutoffs, x).fR()


def eval_GR(params, cutoffs, t, x):
    _require_positive_z(_components(x)[2])
    return QuasimodeSampler(params, cutoffs, x).GR(t)


def eval_FR(params, cutoffs, t, x):
    _require_positive_z(_components(x)[2])
    return QuasimodeSampler(params, cutoffs, x).FR(t)


def eval_F_tilde(params, cutoffs, t, x, sign=REMAINDER_SIGN):
    _require_positive_z(_components(x)[2])
    return QuasimodeSampler(params, cutoffs, x).F_tilde(t, sign)


@dataclass(frozen=True)
class GridPolicy:
    """Box and resolution for sampling a truncated quasimode at scale R."""
    points_per_mode_scale: float = 8.0
    y_margin: float = 1.1
    z_margin: float = 1.5
    max_points: Optional[int] = None

    @classmethod
    def from_config(cls, grid_config):
        return cls(grid_config.points_per_mode_scale, grid_config.y_margin, grid_config.z_margin,
                   grid_config.max_points)


def sampling_grid(params, policy=GridPolicy(), refine=1.0):
    """
    [-Y, Y]^2 x [z_lo, z_hi] with Y = y_margin (R + R^gamma), z about R within
    z_margin R^gamma, and spacing R^{delta/2} / points_per_mode_scale / refine.
    """
    R, spread = params.R, params.R ** params.gamma
    half_width = policy.y_margin * (R + spread)
    z_lo = R - policy.z_margin * spread
    if z_lo <= 0.0:
        z_lo = 0.5 * (R - spread)
    z_hi = R + policy.z_margin * spread
    h = R ** (0.5 * params.delta) / policy.points_per_mode_scale / refine
    grid = Grid3D.from_bounds((-half_width, -half_width, z_lo), (half_width, half_width, z_hi), h,
                              policy.max_points)
    if max(grid.spacing) > h * (1.0 + 1e-12):
        logger.warning(f"Sampling grid capped at {policy.max_points} points per axis; "
                       f"spacing {max(grid.spacing):.4f} exceeds the requested {h:.4f}")
    return grid


def support_sample_points(params, count, rng):
    """Random points inside the truncation support, |z - R| < R^gamma and z/2 < |y| < z."""
    spread = params.R ** params.gamma
    z = params.R + spread * rng.uniform(-0.95, 0.95, count)
    ratio = np.sqrt(rng.uniform(0.26, 0.98, count))
    angle = rng.uniform(0.0, 2.0 * np.pi, count)
    radius = ratio * z
    return np.stack([radius * np.cos(angle), radius * np.sin(angle), z])


def _dirac(u_grads, potential, u):
    return -1j * alpha_contract(*u_grads) - alpha_dot_field(potential, u)


def _central_gradient(params, cutoffs, t, points, step):
    grads = []
    for axis in range(3):
        shift = np.zeros((3,) + (1,) * (points.ndim - 1))
        shift[axis] = step
        f = {k: QuasimodeSampler(params, cutoffs, points + k * shift).WR(t) for k in (-2, -1, 1, 2)}
        grads.append((-f[2] + 8.0 * f[1] - 8.0 * f[-1] + f[-2]) / (12.0 * step))
    return grads


def residual_at_points(params, cutoffs, t, points, potential='linear', step=1e-3, sign=REMAINDER_SIGN):
    """
    Relative residual of the truncated quasimode system at sample points,
    with fourth-order central differences of the pointwise evaluators.

    potential='linear': || i d_t W_R + D_{A_lin} W_R - F_R || / || F_R ||
    potential='full':   || i d_t W_R + D_A W_R - F_tilde_R || / || F_tilde_R ||
    """
    points = np.asarray(points, dtype=float)
    sampler = QuasimodeSampler(params, cutoffs, points)
    u = sampler.WR(t)
    z = points[2]
    # c(x) is time independent, so i d_t W_R = -(lam / z^{delta/2}) W_R
    dt_term = -(sampler.lam / z ** (0.5 * params.delta)) * u
    grads = _central_gradient(params, cutoffs, t, points, step)
    if potential == 'linear':
        a_field, source = eval_A_linear(params.delta, points), sampler.FR(t)
    elif potential == 'full':
        a_field, source = eval_A(params.delta, points), sampler.F_tilde(t, sign)
    else:
        raise ParameterError(f"Unknown potential '{potential}', expected 'linear' or 'full'")
    defect = dt_term + _dirac(grads, a_field, u) - source
    scale = np.sqrt(np.sum(np.abs(source) ** 2))
    if scale == 0.0:
        raise DomainError("Source vanishes at every sample point")
    return float(np.sqrt(np.sum(np.abs(defect) ** 2)) / scale)


def residual_on_grid(sampler, t, potential='linear', sign=REMAINDER_SIGN):
    """Same residual with spectral derivatives on the sampler's box (W_R vanishes at its faces)."""
    if sampler.grid is None:
        raise ParameterError("Grid residual needs a sampler built with QuasimodeSampler.on_grid")
    params = sampler.params
    points = sampler.grid.points()
    u = sampler.WR(t)
    z = points[2]
    dt_term = -(sampler.lam / z ** (0.5 * params.delta)) * u
    grads = spectral_gradient(u, sampler.grid.wavenumbers())
    if potential == 'linear':
        a_field, source = eval_A_linear(params.delta, points), sampler.FR(t)
    elif potential == 'full':
        a_field, source = eval_A(params.delta, points), sampler.F_tilde(t, sign)
    else:
        raise ParameterError(f"Unknown potential '{potential}', expected 'linear' or 'full'")
    defect = dt_term + _dirac(grads, a_field, u) - source
    return float(np.sqrt(np.sum(np.abs(defect) ** 2)) / np.sqrt(np.sum(np.abs(source) ** 2)))
