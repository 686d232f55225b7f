"""
Exact 4x4 Dirac/Pauli algebra.

alpha_k = [[0, sigma_k], [sigma_k, 0]], beta = diag(I2, -I2), and the spin
matrices S = (i/4)(a2a3 - a3a2, a3a1 - a1a3, a1a2 - a2a1).

Field versions take component-major spinor arrays (4, ...) and vector arrays
(3, ...); the contractions are unrolled.
"""
from dataclasses import dataclass

import numpy as np

from src.core.grids import spectral_gradient, fft_workers
from src.utils.logger import setup_logger

logger = setup_logger('DiracAlgebra')

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=np.complex128)

IDENTITY4 = np.eye(4, dtype=np.complex128)


def _block_offdiag(sigma):
    zero = np.zeros((2, 2), dtype=np.complex128)
    return np.block([[zero, sigma], [sigma, zero]])


ALPHA = np.array([_block_offdiag(s) for s in PAULI])
BETA = np.diag([1, 1, -1, -1]).astype(np.complex128)
SPIN = 0.25j * np.array([
    ALPHA[1] @ ALPHA[2] - ALPHA[2] @ ALPHA[1],
    ALPHA[2] @ ALPHA[0] - ALPHA[0] @ ALPHA[2],
    ALPHA[0] @ ALPHA[1] - ALPHA[1] @ ALPHA[0],
])
# diag(1,-1,1,-1): spin part of the total angular momentum about the z axis
SIGMA3 = np.diag([1, -1, 1, -1]).astype(np.complex128)


@dataclass(frozen=True)
class DiracMatrixSet:
    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    spin: np.ndarray

    @property
    def alpha(self):
        return (self.alpha1, self.alpha2, self.alpha3)

    def anticommutator_defect(self):
        """max over l,k of |a_l a_k + a_k a_l - 2 delta_lk I| elementwise."""
        worst = 0.0
        for l, al in enumerate(self.alpha):
            for k, ak in enumerate(self.alpha):
                target = 2.0 * IDENTITY4 if l == k else 0.0
                worst = max(worst, float(np.max(np.abs(al @ ak + ak @ al - target))))
        return worst


def dirac_matrices():
    return DiracMatrixSet(ALPHA[0].copy(), ALPHA[1].copy(), ALPHA[2].copy(), SPIN.copy())


def alpha_dot(v, psi):
    """(v1 a1 + v2 a2 + v3 a3) psi for a real 3-vector and a 4-spinor (or a spinor field)."""
    return alpha_dot_field(v, psi)


def alpha_dot_field(v, psi):
    """Pointwise (a . v) psi; v holds three scalars or arrays broadcastable against psi[0]."""
    v1, v2, v3 = v
    psi = np.asarray(psi)
    vm = v1 - 1j * v2
    vp = v1 + 1j * v2
    return np.stack([
        v3 * psi[2] + vm * psi[3],
        vp * psi[2] - v3 * psi[3],
        v3 * psi[0] + vm * psi[1],
        vp * psi[0] - v3 * psi[1],
    ])


def alpha_contract(g1=None, g2=None, g3=None):
    """sum_k a_k g_k for spinor fields g_k (None counts as zero)."""
    out = None
    for k, g in enumerate((g1, g2, g3)):
        if g is None:
            continue
        term = np.einsum('ab,b...->a...', ALPHA[k], g)
        out = term if out is None else out + term
    if out is None:
        raise ValueError("alpha_contract needs at least one field")
    return out


def spin_dot_field(b, psi):
    """Pointwise (S . b) psi."""
    return np.einsum('kab,k...,b...->a...', SPIN, np.asarray(b, dtype=np.complex128), psi)


def exp_i_alpha_dot(v, t):
    """cos(t|v|) I + i sin(t|v|) (a.v)/|v|; identity for v = 0."""
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return IDENTITY4.copy()
    generator = np.einsum('k,kab->ab', v / norm, ALPHA)
    return np.cos(t * norm) * IDENTITY4 + 1j * np.sin(t * norm) * generator


def apply_exp_i_alpha_dot(v, t, psi):
    """Pointwise exp(i t a.v(x)) psi(x) for a vector field v of shape (3, ...)."""
    v = np.asarray(v, dtype=float)
    norm = np.sqrt(np.sum(v ** 2, axis=0))
    safe = np.where(norm > 0.0, norm, 1.0)
    unit = v / safe
    rotated = alpha_dot_field(unit, psi)
    return np.cos(t * norm) * psi + 1j * np.sin(t * norm) * rotated


def curl_field(a_eval, points, step=1e-5):
    """curl A at `points` (3, ...) by central differences of the evaluator."""
    points = np.asarray(points, dtype=float)
    jac = np.empty((3, 3) + points.shape[1:])
    for j in range(3):
        shift = np.zeros((3,) + (1,) * (points.ndim - 1))
        shift[j] = step
        jac[:, j] = (a_eval(points + shift) - a_eval(points - shift)) / (2.0 * step)
    # jac[i, j] = d_j A_i
    return np.stack([
        jac[2, 1] - jac[1, 2],
        jac[0, 2] - jac[2, 0],
        jac[1, 0] - jac[0, 1],
    ])


@dataclass
class SquareIdentityCheck:
    """Relative residuals of D_A^2 u = -Delta_A u - 2 (S.B) u for both orientations of B."""
    residual: float
    residual_opposite: float
    curl: np.ndarray
    orientation: int = -1

    @property
    def field(self):
        return self.orientation * self.curl


def _gaussian_test_spinor(grid):
    X = grid.points()
    upper = np.array(grid.upper)
    lower = np.array(grid.origin)
    centre = 0.5 * (upper + lower)
    width = float(np.min(upper - lower)) / 14.0
    r2 = sum((X[i] - centre[i]) ** 2 for i in range(3))
    profile = np.exp(-r2 / (2.0 * width ** 2))
    spinor = np.array([1.0, 0.5j, -0.25, 0.75 + 0.25j])
    return spinor[:, None, None, None] * profile[None]


def check_square_identity(a_eval, grid, test_spinor=None):
    """
    Residual of D_A^2 u - (-Delta_A u - 2 (S.B) u) relative to ||D_A^2 u||,
    with spectral derivatives on `grid` and B from the finite-difference curl
    of the evaluator. `residual` uses B = -curl A, `residual_opposite` B = +curl A.
    """
    X = grid.points()
    u = _gaussian_test_spinor(grid) if test_spinor is None else np.asarray(test_spinor, dtype=np.complex128)
    A = np.asarray(a_eval(X), dtype=float)
    k = grid.wavenumbers()

    def covariant(field_, axis):
        return spectral_gradient(field_, [k[axis]], first_axis=1 + axis)[0] - 1j * A[axis] * field_

    def dirac(field_):
        grads = spectral_gradient(field_, k)
        return -1j * alpha_contract(*grads) - alpha_dot_field(A, field_)

    d2u = dirac(dirac(u))
    laplace_a = sum(covariant(covariant(u, axis), axis) for axis in range(3))
    curl = curl_field(a_eval, X)
    scale = np.sqrt(np.sum(np.abs(d2u) ** 2))

    def relative(orientation):
        b = orientation * curl
        defect = d2u - (-laplace_a - 2.0 * spin_dot_field(b, u))
        return float(np.sqrt(np.sum(np.abs(defect) ** 2)) / scale)

    result = SquareIdentityCheck(relative(-1), relative(+1), curl)
    logger.debug(f"Square identity residual {result.residual:.3e} (opposite orientation {result.residual_opposite:.3e}), "
                 f"fft workers {fft_workers()}")
    return result


def klein_gordon_defect(xi, omega, mass):
    """|| (omega - H0)(omega + H0) - (omega^2 - |xi|^2 - m^2) I || for the symbol H0 = a.xi + m beta."""
    h0 = np.einsum('k,kab->ab', np.asarray(xi, dtype=float), ALPHA) + mass * BETA
    lhs = (omega * IDENTITY4 - h0) @ (omega * IDENTITY4 + h0)
    rhs = (omega ** 2 - float(np.dot(xi, xi)) - mass ** 2) * IDENTITY4
    return float(np.max(np.abs(lhs - rhs)))
