"""
Lebesgue, homogeneous Sobolev, mixed space-time and weighted-profile norms of
spinor fields. Pointwise magnitudes are spinor 2-norms; reductions go through
np.sum on contiguous arrays (pairwise summation).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft
from numpy.polynomial.legendre import leggauss

from src.core.grids import SpinorField3D, fft_workers
from src.core.landau_eigen import EigenMode2D, mode_gradient
from src.utils.errors import PaddingError, ParameterError, QuadratureError
from src.utils.logger import setup_logger

logger = setup_logger('Norms')

DEFAULT_PADDING = 2.0
BOUNDARY_TOL = 1e-8
PLANCHEREL_RTOL = 1e-8


def _exponent(q):
    if isinstance(q, str):
        if q != 'inf':
            raise ParameterError(f"Lebesgue exponent must be a number or 'inf', got {q!r}")
        return np.inf
    q = float(q)
    if not q >= 1.0:
        raise ParameterError(f"Lebesgue exponent must satisfy q >= 1, got {q}")
    return q


def lq_norm_array(data, cell_volume, q):
    """(sum |f|^q dV)^{1/q} for a (4, ...) spinor array; q = inf gives the max."""
    q = _exponent(q)
    modulus = np.sqrt(np.sum(np.abs(data) ** 2, axis=0)).ravel()
    if np.isinf(q):
        return float(modulus.max()) if modulus.size else 0.0
    return float((np.sum(modulus ** q) * cell_volume) ** (1.0 / q))


def lq_norm(field, q):
    return lq_norm_array(field.data, field.grid.cell_volume, q)


def _frequency_modulus(grid):
    k1, k2, k3 = grid.wave_mesh()
    return np.sqrt(k1 ** 2 + k2 ** 2 + k3 ** 2)


def _sobolev_multiplier(grid, s):
    if s == 0:
        return None
    xi = _frequency_modulus(grid)
    multiplier = np.zeros_like(xi)
    nonzero = xi > 0.0
    multiplier[nonzero] = xi[nonzero] ** s
    return multiplier


def _check_padding(field, boundary_tol):
    ratio = field.boundary_ratio()
    if ratio > boundary_tol:
        raise PaddingError(f"Field '{field.label}' reaches the box boundary: ratio {ratio:.3e} > {boundary_tol:.1e}",
                           ratio)


def apply_fractional_derivative(field, s, padding=DEFAULT_PADDING, boundary_tol=BOUNDARY_TOL):
    """|D|^s f on the padded box (zero multiplier at xi = 0 for s > 0)."""
    if s < 0:
        raise ParameterError(f"Sobolev order must be non-negative, got {s}")
    if padding < 2.0:
        raise ParameterError(f"Padding factor must be at least 2, got {padding}")
    _check_padding(field, boundary_tol)
    padded = field.padded(padding)
    multiplier = _sobolev_multiplier(padded.grid, s)
    if multiplier is None:
        return padded
    workers = fft_workers()
    spectrum = scipy.fft.fftn(padded.data, axes=(1, 2, 3), workers=workers)
    data = scipy.fft.ifftn(multiplier * spectrum, axes=(1, 2, 3), workers=workers)
    return SpinorField3D(padded.grid, data, field.time_tag, field.label)


def plancherel_sobolev(field, s, padding=DEFAULT_PADDING):
    """||f||_{H^s} from (dV / N) sum |xi|^{2s} |f_hat|^2 on the padded box."""
    padded = field.padded(padding)
    spectrum = scipy.fft.fftn(padded.data, axes=(1, 2, 3), workers=fft_workers())
    weight = np.ones(padded.grid.shape) if s == 0 else _sobolev_multiplier(padded.grid, 2.0 * s)
    total = np.sum((weight[None] * np.abs(spectrum) ** 2).ravel())
    return float(np.sqrt(total * padded.grid.cell_volume / np.prod(padded.grid.shape)))


def fractional_sobolev(field, s, q, padding=DEFAULT_PADDING, boundary_tol=BOUNDARY_TOL):
    """
    ||f||_{H^s_q} = || |D|^s f ||_{L^q} with the flat Fourier multiplier |xi|^s.
    The q = 2 value is cross-checked against the Plancherel sum.
    """
    q = _exponent(q)
    if np.isinf(q):
        raise ParameterError("Fractional Sobolev norms are not defined here for q = inf")
    derived = apply_fractional_derivative(field, s, padding, boundary_tol)
    value = lq_norm(derived, q)
    if q == 2.0:
        check = plancherel_sobolev(field, s, padding)
        if abs(check - value) > PLANCHEREL_RTOL * max(check, 1e-300) + 1e-300:
            logger.error(f"Plancherel cross-check differs: {value:.12e} vs {check:.12e}")
            raise QuadratureError(f"Sobolev norm {value:.12e} disagrees with its Plancherel sum {check:.12e}",
                                  (value, check))
    return value


@dataclass(frozen=True)
class MixedNormSpec:
    """L^p in t over (0, T) of the H^s_q norm in x."""
    p: float
    q: float
    s: float
    T: float

    def __post_init__(self):
        p = _exponent(self.p)
        q = _exponent(self.q)
        if not p > 1.0:
            raise ParameterError(f"Time exponent must exceed 1, got {self.p}")
        if not 1.0 < q < np.inf:
            raise ParameterError(f"Space exponent must lie in (1, inf), got {self.q}")
        if self.s < 0:
            raise ParameterError(f"Sobolev order must be non-negative, got {self.s}")
        if not self.T > 0:
            raise ParameterError(f"Time horizon must be positive, got {self.T}")
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'q', q)


def spatial_norm(field, s, q, padding=DEFAULT_PADDING):
    if s == 0:
        return lq_norm(field, q)
    return fractional_sobolev(field, s, q, padding)


def mixed_time_norm(evaluator, spec, rtol=1e-4, max_nodes=64, padding=DEFAULT_PADDING, start_nodes=4):
    """
    Gauss-Legendre quadrature of t -> ||evaluator(t)||^p over (0, T), doubling the
    node count until successive estimates agree to `rtol`; p = inf takes the max
    over the nodes.
    """
    estimates = []
    nodes = start_nodes
    while nodes <= max_nodes:
        x, w = leggauss(nodes)
        times = 0.5 * spec.T * (x + 1.0)
        weights = 0.5 * spec.T * w
        values = np.array([spatial_norm(evaluator(t), spec.s, spec.q, padding) for t in times])
        if np.isinf(spec.p):
            estimate = float(values.max())
        else:
            estimate = float(np.sum(weights * values ** spec.p) ** (1.0 / spec.p))
        estimates.append(estimate)
        logger.debug(f"Mixed norm with {nodes} nodes: {estimate:.12e}")
        if len(estimates) > 1 and abs(estimates[-1] - estimates[-2]) <= rtol * abs(estimates[-1]):
            return estimates[-1]
        nodes *= 2
    raise QuadratureError(f"Mixed norm did not converge to rtol {rtol:.1e} within {max_nodes} nodes",
                          tuple(estimates[-2:]))


def a_exponent_floor(delta, gamma):
    """Weighted gradient profiles need a > (gamma - delta/2) / (1 - delta/2)."""
    return (gamma - 0.5 * delta) / (1.0 - 0.5 * delta)


@dataclass(frozen=True)
class WeightedProfile:
    """|u|^weight |L(u)| with L the mode ('mode') or the modulus of its gradient ('gradient')."""
    weight: float
    base: str = 'mode'

    def __post_init__(self):
        if self.weight < 0:
            raise ParameterError(f"Profile weight must be non-negative, got {self.weight}")
        if self.base not in ('mode', 'gradient'):
            raise ParameterError(f"Profile base must be 'mode' or 'gradient', got {self.base!r}")

    @classmethod
    def gradient_profile(cls, delta, gamma, a=1.0):
        floor = a_exponent_floor(delta, gamma)
        if not a > floor:
            raise ParameterError(f"Weight a={a} must exceed (gamma - delta/2)/(1 - delta/2) = {floor:.6f}")
        return cls(a, 'gradient')

    def values(self, mode):
        """Profile sampled on the mode grid, as a real (N, N) array."""
        if self.base == 'mode':
            modulus = np.sqrt(np.sum(np.abs(mode.v) ** 2, axis=0))
        else:
            d1, d2 = mode_gradient(mode)
            modulus = np.sqrt(np.sum(np.abs(d1) ** 2 + np.abs(d2) ** 2, axis=0))
        if self.weight == 0:
            return modulus
        U1, U2 = mode.grid.mesh()
        return np.sqrt(U1 ** 2 + U2 ** 2) ** self.weight * modulus


PROFILE_FACTORS = ('psi_R', 'psi', 'chi')


def profile_norm(profile, params, cutoffs, q, deriv_flags=(), z_nodes=96, mode: Optional[EigenMode2D] = None):
    """
    || Lambda_w c1(z) c2(rho) c3(rho) ||_{L^q(R^3)} with Lambda_w(y, z) = profile(y / z^{delta/2})
    and rho = |y|^2 / z^2. The y-integral runs over the (oversampled) mode grid
    in u = y / z^{delta/2} with Jacobian z^delta; the z-integral is Gauss-Legendre
    on the support of psi_R.
    """
    unknown = set(deriv_flags) - set(PROFILE_FACTORS)
    if unknown:
        raise ParameterError(f"Unknown cutoff derivative flags {sorted(unknown)}")
    q = _exponent(q)
    if np.isinf(q):
        raise ParameterError("Profile norms are evaluated for finite q")
    if mode is None:
        mode = params._interp().fine
    base = profile.values(mode)
    U1, U2 = mode.grid.mesh()
    u2 = U1 ** 2 + U2 ** 2
    psi = cutoffs.psi_prime if 'psi' in deriv_flags else cutoffs.psi
    chi = cutoffs.chi_prime if 'chi' in deriv_flags else cutoffs.chi
    psi_r = cutoffs.psi_R_prime if 'psi_R' in deriv_flags else cutoffs.psi_R

    spread = params.R ** params.gamma
    x, w = leggauss(z_nodes)
    zs = params.R + spread * x
    weights = spread * w
    total = 0.0
    for z, weight in zip(zs, weights):
        rho = u2 * z ** (params.delta - 2.0)
        integrand = np.abs(base * psi(rho) * chi(rho)) ** q
        inner = np.sum(integrand.ravel()) * mode.grid.cell_area
        total += weight * abs(float(psi_r(z, params.R, params.gamma))) ** q * z ** params.delta * inner
    value = float(total ** (1.0 / q))
    logger.debug(f"Profile norm (w={profile.weight}, base={profile.base}, flags={tuple(deriv_flags)}) "
                 f"at R={params.R}: {value:.8e}")
    return value
