"""
Low-|lambda| eigenpairs of the constant-field Dirac operator

    T = -i a.grad_y - a.(y2, -y1, 0)

on a periodic spectral grid. Each relativistic Landau level of T is infinitely
degenerate in the plane, so the solver works inside one sector of the total
angular momentum J = -i(y1 d2 - y2 d1) + Sigma3/2, which commutes with T. It
minimises K = T^2 + c (J - j0)^2 with LOBPCG and recovers signed eigenvalues by
a Rayleigh-Ritz step with T on the converged block.
"""
import hashlib
import json
import os
import warnings
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.signal
import scipy.sparse as sp
import scipy.stats
from scipy.sparse.linalg import LinearOperator, eigsh, lobpcg

from src.core.dirac_algebra import ALPHA, SIGMA3, alpha_contract, alpha_dot_field
from src.core.grids import GridSpec2D, spectral_derivative, fft_workers
from src.utils.errors import CacheFormatError, EigenSolveError, ParameterError
from src.utils.field_io import read_field_file, write_field_file
from src.utils.logger import setup_logger

logger = setup_logger('LandauEigen')

LP_EXPONENTS = (1, 2, 4, 8, np.inf)
FIELD_STRENGTH = 2.0
MAX_MODES = 32
ZERO_MODE_TOL = 1e-6
DECAY_R2_MIN = 0.99


@dataclass
class EigenMode2D:
    grid: GridSpec2D
    lam: float
    v: np.ndarray
    residual: float
    decay_rate: float
    decay_r2: float = float('nan')
    lp_norms: Dict[float, float] = field(default_factory=dict)
    sector: float = -0.5

    def l2_norm(self):
        return float(np.sqrt(np.sum(np.abs(self.v) ** 2) * self.grid.cell_area))

    def modulus(self):
        return np.sqrt(np.sum(np.abs(self.v) ** 2, axis=0))

    def boundary_ratio(self):
        mod = self.modulus()
        ring = max(mod[0].max(), mod[-1].max(), mod[:, 0].max(), mod[:, -1].max())
        return float(ring / mod.max())

    def summary(self):
        return {
            'lambda': self.lam,
            'residual': self.residual,
            'decay_rate': self.decay_rate,
            'decay_r2': self.decay_r2,
            **{f'L{"inf" if np.isinf(p) else int(p)}': value for p, value in self.lp_norms.items()},
        }


def landau_ladder(n_max, field_strength=FIELD_STRENGTH):
    """Relativistic Landau levels sqrt(2 n |B|), n = 0..n_max."""
    return [float(np.sqrt(2.0 * n * field_strength)) for n in range(n_max + 1)]


def apply_T(grid, v):
    """-i(a1 d1 + a2 d2) v - (a1 y2 - a2 y1) v with spectral derivatives."""
    k = grid.wavenumbers
    Y1, Y2 = grid.mesh()
    d1 = spectral_derivative(v, k, axis=1)
    d2 = spectral_derivative(v, k, axis=2)
    return -1j * alpha_contract(d1, d2) - alpha_dot_field((Y2, -Y1, 0.0), v)


def apply_J(grid, v):
    """Total angular momentum about the z axis: -i(y1 d2 - y2 d1) v + Sigma3 v / 2."""
    k = grid.wavenumbers
    Y1, Y2 = grid.mesh()
    d1 = spectral_derivative(v, k, axis=1)
    d2 = spectral_derivative(v, k, axis=2)
    orbital = -1j * (Y1 * d2 - Y2 * d1)
    return orbital + 0.5 * np.einsum('ab,b...->a...', SIGMA3, v)


def mode_gradient(mode):
    """Spectral (d1 v, d2 v) on the mode grid."""
    k = mode.grid.wavenumbers
    return spectral_derivative(mode.v, k, axis=1), spectral_derivative(mode.v, k, axis=2)


def mode_laplacian(mode):
    k = mode.grid.wavenumbers
    d11 = spectral_derivative(spectral_derivative(mode.v, k, axis=1), k, axis=1)
    d22 = spectral_derivative(spectral_derivative(mode.v, k, axis=2), k, axis=2)
    return d11 + d22


def lp_norm_2d(grid, v, p):
    mod = np.sqrt(np.sum(np.abs(v) ** 2, axis=0)).ravel()
    if np.isinf(p):
        return float(mod.max())
    return float((np.sum(mod ** p) * grid.cell_area) ** (1.0 / p))


def fit_gaussian_decay(grid, v, inner=0.3, outer=0.7):
    """
    Fit log|v| against |y|^2 on the annulus inner*L <= |y| <= outer*L using the
    radial-bin envelope of |v|. Returns (decay_rate, r_squared); rate > 0 means decay.
    """
    Y1, Y2 = grid.mesh()
    r = np.sqrt(Y1 ** 2 + Y2 ** 2)
    mod = np.sqrt(np.sum(np.abs(v) ** 2, axis=0))
    edges = np.arange(inner * grid.L, outer * grid.L + 2.0 * grid.h, 2.0 * grid.h)
    centres, envelope = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (r >= lo) & (r < hi)
        if not mask.any():
            continue
        peak = mod[mask].max()
        if peak <= 0.0:
            continue
        centres.append(0.5 * (lo + hi))
        envelope.append(peak)
    if len(centres) < 3:
        return float('nan'), float('nan')
    fit = scipy.stats.linregress(np.asarray(centres) ** 2, np.log(envelope))
    return float(-fit.slope), float(fit.rvalue ** 2)


def upsample_mode(mode, factor):
    """Fourier interpolation of the mode onto a grid `factor` times finer."""
    if factor == 1:
        return mode
    n_new = mode.grid.N * factor
    data = scipy.signal.resample(mode.v, n_new, axis=1)
    data = scipy.signal.resample(data, n_new, axis=2)
    grid = GridSpec2D(mode.grid.L, n_new, min_points=mode.grid.min_points)
    return EigenMode2D(grid, mode.lam, data, mode.residual, mode.decay_rate, mode.decay_r2,
                       dict(mode.lp_norms), mode.sector)


class SectorOperator:
    """Matrix-free K = T^2 + c (J - j0)^2 acting on flattened (4, N, N) spinors."""

    def __init__(self, grid, sector=-0.5, penalty=40.0):
        self.grid = grid
        self.sector = sector
        self.penalty = penalty
        self.shape = (4, grid.N, grid.N)
        self.size = 4 * grid.N * grid.N
        self.applications = 0

    def _shift_J(self, v):
        return apply_J(self.grid, v) - self.sector * v

    def apply(self, v):
        self.applications += 1
        tv = apply_T(self.grid, apply_T(self.grid, v))
        jv = self._shift_J(self._shift_J(v))
        return tv + self.penalty * jv

    def _matvec(self, x):
        return self.apply(np.asarray(x).reshape(self.shape)).ravel()

    def _matmat(self, X):
        return np.column_stack([self._matvec(X[:, j]) for j in range(X.shape[1])])

    def as_linear_operator(self):
        return LinearOperator((self.size, self.size), matvec=self._matvec, matmat=self._matmat,
                              dtype=np.complex128)

    def preconditioner(self, shift=4.0):
        k = self.grid.wavenumbers
        k1, k2 = np.meshgrid(k, k, indexing='ij')
        inverse = 1.0 / (k1 ** 2 + k2 ** 2 + shift)
        workers = fft_workers()

        def apply(x):
            block = np.asarray(x).reshape(self.shape)
            spectrum = scipy.fft.fft2(block, axes=(1, 2), workers=workers)
            return scipy.fft.ifft2(spectrum * inverse, axes=(1, 2), workers=workers).ravel()

        def apply_block(X):
            return np.column_stack([apply(X[:, j]) for j in range(X.shape[1])])

        return LinearOperator((self.size, self.size), matvec=apply, matmat=apply_block, dtype=np.complex128)


def _sector_trial_block(grid, sector, columns):
    """Gaussian-weighted monomials w^a conj(w)^b e^{-|y|^2/2} with the orbital momentum each spin slot needs."""
    Y1, Y2 = grid.mesh()
    w = Y1 + 1j * Y2
    gauss = np.exp(-0.5 * (Y1 ** 2 + Y2 ** 2))
    momentum = {0: sector - 0.5, 1: sector + 0.5, 2: sector - 0.5, 3: sector + 0.5}
    degree = 1
    while True:
        trial = []
        for component, ell in momentum.items():
            ell = int(round(ell))
            for b in range(max(0, -ell), degree + 1):
                a = b + ell
                if a < 0 or a + b > degree:
                    continue
                vec = np.zeros((4, grid.N, grid.N), dtype=np.complex128)
                vec[component] = w ** a * np.conj(w) ** b * gauss
                trial.append(vec.ravel())
        if len(trial) >= columns:
            return np.column_stack(trial)
        degree += 1


def _orthonormalize(X):
    Q, _ = scipy.linalg.qr(X, mode='economic')
    return Q


def _rayleigh_ritz(op, Q):
    H = Q.conj().T @ op(Q)
    H = 0.5 * (H + H.conj().T)
    values, vectors = scipy.linalg.eigh(H)
    return values, Q @ vectors


def _reference_profile(grid):
    Y1, Y2 = grid.mesh()
    gauss = np.exp(-0.5 * (Y1 ** 2 + Y2 ** 2))
    return (0.5 * np.ones(4)[:, None, None] * gauss[None]).ravel()


def _align_degenerate(values, vectors, reference, tol):
    """Within each numerically degenerate eigenspace, lead with the projection of `reference`."""
    order = np.argsort(values)
    values, vectors = values[order], vectors[:, order]
    out_vectors = vectors.copy()
    start = 0
    while start < len(values):
        stop = start + 1
        while stop < len(values) and abs(values[stop] - values[start]) <= tol * max(1.0, abs(values[start])):
            stop += 1
        block = vectors[:, start:stop]
        coeffs = block.conj().T @ reference
        if stop - start > 1 and np.linalg.norm(coeffs) > 1e-12:
            lead = coeffs / np.linalg.norm(coeffs)
            basis = np.column_stack([lead, np.eye(stop - start, dtype=np.complex128)])
            rotation = _orthonormalize(basis)[:, :stop - start]
            # QR may flip the leading column's phase; restore it
            rotation[:, 0] = lead
            out_vectors[:, start:stop] = block @ rotation
        start = stop
    return values, out_vectors


def _fix_phase(x, reference):
    overlap = np.vdot(reference, x)
    if abs(overlap) > 1e-12:
        return x * (np.conj(overlap) / abs(overlap))
    pivot = x[np.argmax(np.abs(x))]
    return x * (np.conj(pivot) / abs(pivot))


def _order_by_magnitude(values):
    """Indices sorted by |lambda|, positive before negative inside each level so +- pairs stay adjacent."""
    pos = sorted([i for i, v in enumerate(values) if v >= 0], key=lambda i: values[i])
    neg = sorted([i for i, v in enumerate(values) if v < 0], key=lambda i: -values[i])
    order = []
    while pos or neg:
        if pos and (not neg or abs(values[pos[0]]) <= abs(values[neg[0]]) + 1e-9):
            order.append(pos.pop(0))
        else:
            order.append(neg.pop(0))
    return order


def solve_modes(grid, count=6, tol=1e-8, sector=-0.5, penalty=40.0, maxiter=200,
                boundary_tol=1e-10, guard=4, decay_r2_min=DECAY_R2_MIN):
    """
    The `count` eigenpairs of T with smallest |lambda| inside the angular momentum
    sector `sector`, sorted by |lambda| with each +-lambda pair kept together.
    """
    if count < 1 or count > MAX_MODES:
        raise ParameterError(f"Mode count must lie in [1, {MAX_MODES}], got {count}")
    logger.debug(f"Solving for {count} modes on L={grid.L}, N={grid.N}, sector {sector}, penalty {penalty}")

    operator = SectorOperator(grid, sector, penalty)
    block_size = count + guard

    trial = _orthonormalize(_sector_trial_block(grid, sector, 2 * block_size))
    k_values, k_vectors = _rayleigh_ritz(operator._matmat, trial)
    X0 = k_vectors[:, :block_size]
    logger.debug(f"Trial Rayleigh-Ritz on {trial.shape[1]} functions, lowest K values {k_values[:block_size]}")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        k_lambdas, X, history = lobpcg(operator.as_linear_operator(), X0, M=operator.preconditioner(),
                                       tol=tol, maxiter=maxiter, largest=False,
                                       retResidualNormsHistory=True)
    diagnostics = {
        'iterations': len(history),
        'operator_applications': operator.applications,
        'final_residual_norms': [float(r) for r in np.atleast_1d(history[-1])] if len(history) else [],
        'warnings': [str(w.message) for w in caught],
    }
    for message in diagnostics['warnings']:
        logger.warning(f"LOBPCG: {message}")

    Q = _orthonormalize(X)
    t_values, t_vectors = _rayleigh_ritz(lambda M: np.column_stack(
        [apply_T(grid, M[:, j].reshape(operator.shape)).ravel() for j in range(M.shape[1])]), Q)

    reference = _reference_profile(grid)
    t_values, t_vectors = _align_degenerate(t_values, t_vectors, reference, tol=1e-6)

    order = _order_by_magnitude(list(t_values))
    selected = order[:count]
    last = t_values[selected[-1]]
    if abs(last) > ZERO_MODE_TOL and count < len(order):
        partner = order[count]
        if abs(t_values[partner] + last) <= 1e-6 * max(1.0, abs(last)) and \
                sum(1 for i in selected if abs(t_values[i] - last) <= 1e-6) > \
                sum(1 for i in selected if abs(t_values[i] + last) <= 1e-6):
            logger.warning(f"Extending mode list by one to keep the pair +-{abs(last):.6f} together")
            selected.append(partner)

    modes = []
    for position, index in enumerate(selected):
        x = _fix_phase(t_vectors[:, index], reference)
        v = x.reshape(operator.shape)
        v = v / np.sqrt(np.sum(np.abs(v) ** 2) * grid.cell_area)
        lam = float(t_values[index])
        tv = apply_T(grid, v)
        residual = float(np.sqrt(np.sum(np.abs(tv - lam * v) ** 2) * grid.cell_area))
        decay_rate, decay_r2 = fit_gaussian_decay(grid, v)
        mode = EigenMode2D(grid, lam, v, residual, decay_rate, decay_r2,
                           {p: lp_norm_2d(grid, v, p) for p in LP_EXPONENTS}, sector)
        if residual >= tol:
            diagnostics['offending_mode'] = position
            raise EigenSolveError(f"Mode {position} (lambda={lam:.8f}) residual {residual:.3e} exceeds tolerance {tol:.1e}",
                                  diagnostics)
        if mode.boundary_ratio() >= boundary_tol:
            diagnostics['offending_mode'] = position
            raise EigenSolveError(f"Mode {position} (lambda={lam:.8f}) does not decay at the grid boundary: "
                                  f"ring ratio {mode.boundary_ratio():.3e} >= {boundary_tol:.1e}", diagnostics)
        if not (decay_rate > 0.0 and decay_r2 > decay_r2_min):
            diagnostics['offending_mode'] = position
            raise EigenSolveError(f"Mode {position} (lambda={lam:.8f}) is not Gaussian-localized: decay rate "
                                  f"{decay_rate:.4g}, log-profile fit R^2 {decay_r2:.4f} (need > {decay_r2_min})",
                                  diagnostics)
        modes.append(mode)

    logger.info(f"Successfully solved {len(modes)} modes: lambda = {[round(m.lam, 8) for m in modes]}")
    return modes


def select_mode(modes, index='auto'):
    """`index` picks a returned mode; 'auto' is the smallest positive nonzero lambda."""
    if index != 'auto':
        index = int(index)
        if not 0 <= index < len(modes):
            raise ParameterError(f"Mode index {index} outside the {len(modes)} solved modes")
        return modes[index]
    positive = [m for m in modes if m.lam > ZERO_MODE_TOL]
    if not positive:
        raise ParameterError("No positive nonzero eigenvalue among the solved modes; raise eigen.count")
    return min(positive, key=lambda m: m.lam)


def _fd_derivative_1d(grid):
    n = grid.N
    main = sp.diags([np.ones(n - 1), -np.ones(n - 1)], [1, -1], shape=(n, n), format='lil')
    main[0, n - 1] = -1.0
    main[n - 1, 0] = 1.0
    return sp.csr_matrix(main) / (2.0 * grid.h)


def _fd_operators(grid):
    n = grid.N
    eye = sp.identity(n, format='csr')
    d = _fd_derivative_1d(grid)
    y = sp.diags(grid.axis)
    return {
        'd1': sp.kron(d, eye, format='csr'),
        'd2': sp.kron(eye, d, format='csr'),
        'y1': sp.kron(y, eye, format='csr'),
        'y2': sp.kron(eye, y, format='csr'),
    }


def finite_difference_T(grid):
    """Sparse second-order centred-difference discretization of T, component-major ordering."""
    ops = _fd_operators(grid)
    return (-1j * (sp.kron(ALPHA[0], ops['d1']) + sp.kron(ALPHA[1], ops['d2']))
            - sp.kron(ALPHA[0], ops['y2']) + sp.kron(ALPHA[1], ops['y1'])).tocsr()


def oracle_dense_spectrum(grid):
    """Full sorted spectrum of the finite-difference T (dense Hermitian solve, N <= 48)."""
    if grid.N > 48:
        raise ParameterError(f"Dense oracle is limited to N <= 48, got N={grid.N}")
    matrix = finite_difference_T(grid).toarray()
    logger.debug(f"Dense oracle on {matrix.shape[0]} unknowns")
    return np.sort(scipy.linalg.eigh(matrix, eigvals_only=True))


ORACLE_SHIFT = -1e-2


def oracle_sector_levels(grid, count=6, sector=-0.5, penalty=40.0, guard=4):
    """
    Low eigenvalues of the finite-difference T inside one angular momentum sector:
    shift-invert Lanczos on the sparse sector operator, then Rayleigh-Ritz with T.
    """
    ops = _fd_operators(grid)
    size = grid.N * grid.N
    T = finite_difference_T(grid)
    orbital = -1j * (ops['y1'] @ ops['d2'] - ops['y2'] @ ops['d1'])
    J = sp.kron(sp.identity(4), orbital) + 0.5 * sp.kron(sp.csr_matrix(SIGMA3), sp.identity(size))
    shifted = (J - sector * sp.identity(4 * size)).tocsr()
    K = (T @ T + penalty * (shifted @ shifted)).tocsc()
    K = 0.5 * (K + K.conj().T)
    block = count + guard
    logger.debug(f"Sector oracle on {K.shape[0]} unknowns, {block} Lanczos vectors")
    _, vectors = eigsh(K, k=block, sigma=ORACLE_SHIFT, which='LM')
    H = vectors.conj().T @ (T @ vectors)
    values = scipy.linalg.eigvalsh(0.5 * (H + H.conj().T))
    order = _order_by_magnitude(list(values))
    return [float(values[i]) for i in order[:count]]


def extrapolated_oracle_level(L, coarse_N=32, fine_N=48, sector=-0.5, penalty=40.0):
    """Smallest positive sector level of the centred-difference T, Richardson-extrapolated in h^2."""
    levels = []
    for n in (coarse_N, fine_N):
        values = oracle_sector_levels(GridSpec2D(L, n, min_points=8), 6, sector, penalty)
        positive = [v for v in values if v > ZERO_MODE_TOL]
        if not positive:
            raise EigenSolveError(f"Sector oracle at N={n} found no positive level")
        levels.append(min(positive))
    weight = (fine_N / coarse_N) ** 2
    return float((weight * levels[1] - levels[0]) / (weight - 1.0)), levels


def write_mode_cache(path, mode, config_hash=''):
    """One mode per file; see src.utils.field_io for the byte layout."""
    return write_field_file(path, 'MODE', mode.v, L=float(mode.grid.L), N=int(mode.grid.N),
                            **{'lambda': float(mode.lam)}, residual=float(mode.residual),
                            decay_rate=float(mode.decay_rate), decay_r2=float(mode.decay_r2),
                            sector=float(mode.sector), config_hash=config_hash or '-')


def read_mode_cache(path):
    header, v = read_field_file(path, 'MODE')
    grid = GridSpec2D(float(header['L']), int(header['N']))
    mode = EigenMode2D(grid, float(header['lambda']), v, float(header['residual']),
                       float(header['decay_rate']), float(header.get('decay_r2', 'nan')),
                       {p: lp_norm_2d(grid, v, p) for p in LP_EXPONENTS}, float(header.get('sector', -0.5)))
    return mode, header


def cache_key(grid, count, tol, sector, penalty):
    blob = json.dumps({'L': grid.L, 'N': grid.N, 'count': count, 'tol': tol,
                       'sector': sector, 'penalty': penalty}, sort_keys=True)
    return hashlib.sha256(blob.encode('utf-8')).hexdigest()[:12]


def load_or_solve_modes(grid, cache_dir, count=6, tol=1e-8, sector=-0.5, penalty=40.0, maxiter=200,
                        boundary_tol=1e-10, config_hash=''):
    """
    Reuse the cached modes for these solver settings when every file verifies,
    otherwise solve and write a fresh cache. Returns (modes, reused).
    """
    key = cache_key(grid, count, tol, sector, penalty)
    index_path = os.path.join(cache_dir, f'modes_{key}.json')
    if os.path.exists(index_path):
        try:
            with open(index_path, 'r') as handle:
                index = json.load(handle)
            modes = []
            for entry in index['files']:
                mode, header = read_mode_cache(os.path.join(cache_dir, entry['file']))
                if header['sha256'] != entry['sha256']:
                    raise CacheFormatError(f"Index checksum differs for {entry['file']}")
                modes.append(mode)
            logger.info(f"Reusing {len(modes)} cached modes from {index_path} (checksum match)")
            return modes, True
        except (CacheFormatError, OSError, KeyError, ValueError) as e:
            logger.warning(f"Discarding unusable mode cache {index_path}: {e}")

    modes = solve_modes(grid, count, tol, sector, penalty, maxiter, boundary_tol)
    os.makedirs(cache_dir, exist_ok=True)
    files = []
    for position, mode in enumerate(modes):
        name = f'mode_{key}_{position:02d}.bin'
        digest = write_mode_cache(os.path.join(cache_dir, name), mode, config_hash)
        files.append({'file': name, 'sha256': digest, 'lambda': mode.lam})
    with open(index_path, 'w') as handle:
        json.dump({'key': key, 'config_hash': config_hash, 'files': files}, handle, indent=2)
    logger.info(f"Successfully cached {len(modes)} modes under {cache_dir}")
    return modes, False
