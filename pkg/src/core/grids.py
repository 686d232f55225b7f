"""
Rectilinear grids, the 4-spinor field carrier and shared spectral helpers.

All spinor arrays are component-major: shape (4, n1, n2[, n3]) with
`indexing='ij'` meshes, so axis 1 is y1, axis 2 is y2 and axis 3 is z.
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.fft

from src.utils.errors import ParameterError

MIN_POINTS_2D = 32

_fft_workers = 1


def set_fft_workers(workers):
    """Cap the number of threads scipy.fft may use for every transform in the lab."""
    global _fft_workers
    _fft_workers = max(1, int(workers))


def fft_workers():
    return _fft_workers


@dataclass(frozen=True)
class GridSpec2D:
    """Periodic square grid [-L, L)^2 with N points per axis."""
    L: float
    N: int
    min_points: int = MIN_POINTS_2D

    def __post_init__(self):
        if not self.L > 0:
            raise ParameterError(f"Grid half-width must be positive, got L={self.L}")
        if self.N % 2 != 0 or self.N < self.min_points:
            raise ParameterError(f"Grid points per axis must be even and >= {self.min_points}, got N={self.N}")

    @property
    def h(self):
        return 2.0 * self.L / self.N

    @property
    def axis(self):
        return -self.L + self.h * np.arange(self.N)

    def mesh(self):
        return np.meshgrid(self.axis, self.axis, indexing='ij')

    @property
    def wavenumbers(self):
        return 2.0 * np.pi * scipy.fft.fftfreq(self.N, d=self.h)

    @property
    def cell_area(self):
        return self.h ** 2

    def refined(self, L, N):
        return GridSpec2D(L=L, N=N, min_points=self.min_points)


@dataclass(frozen=True)
class Grid3D:
    """Rectilinear 3D box: node j on axis a sits at origin[a] + j * spacing[a]."""
    origin: Tuple[float, float, float]
    spacing: Tuple[float, float, float]
    shape: Tuple[int, int, int]

    def __post_init__(self):
        if len(self.origin) != 3 or len(self.spacing) != 3 or len(self.shape) != 3:
            raise ParameterError("Grid3D needs three origins, spacings and sizes")
        if min(self.spacing) <= 0 or min(self.shape) < 2:
            raise ParameterError(f"Invalid Grid3D spacing={self.spacing} shape={self.shape}")

    @classmethod
    def from_bounds(cls, lower, upper, h, max_points=None):
        """Smallest even-sized grid on [lower, upper) with spacing at most h per axis."""
        origin, spacing, shape = [], [], []
        for lo, hi in zip(lower, upper):
            n = int(np.ceil((hi - lo) / h))
            n += n % 2
            if max_points is not None and n > max_points:
                n = max_points - max_points % 2
            origin.append(float(lo))
            spacing.append(float((hi - lo) / n))
            shape.append(int(n))
        return cls(tuple(origin), tuple(spacing), tuple(shape))

    def axes(self):
        return [o + s * np.arange(n) for o, s, n in zip(self.origin, self.spacing, self.shape)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing='ij')

    def points(self):
        return np.stack(self.mesh())

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def upper(self):
        return tuple(o + s * n for o, s, n in zip(self.origin, self.spacing, self.shape))

    def wavenumbers(self):
        return [2.0 * np.pi * scipy.fft.fftfreq(n, d=s) for n, s in zip(self.shape, self.spacing)]

    def wave_mesh(self):
        return np.meshgrid(*self.wavenumbers(), indexing='ij')

    def padded(self, factor):
        """Same spacing, each axis extended by `factor`, original box centred inside."""
        pads = [self._pad_width(n, factor) for n in self.shape]
        origin = tuple(o - s * p[0] for o, s, p in zip(self.origin, self.spacing, pads))
        shape = tuple(n + p[0] + p[1] for n, p in zip(self.shape, pads))
        return Grid3D(origin, self.spacing, shape), pads

    @staticmethod
    def _pad_width(n, factor):
        extra = int(np.ceil(n * (factor - 1.0)))
        extra += extra % 2
        return (extra // 2, extra // 2)

    def contains(self, point):
        return all(lo <= x <= hi for x, lo, hi in zip(point, self.origin, self.upper))

    def describe(self):
        return {'origin': list(self.origin), 'spacing': list(self.spacing), 'shape': list(self.shape)}


@dataclass
class SpinorField3D:
    """4-component complex samples on a Grid3D, tagged with the time they represent."""
    grid: Grid3D
    data: np.ndarray
    time_tag: float = 0.0
    label: str = field(default='')

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        expected = (4,) + tuple(self.grid.shape)
        if self.data.shape != expected:
            raise ParameterError(f"Field shape {self.data.shape} does not match grid {expected}")
        if not np.all(np.isfinite(self.data)):
            raise ParameterError(f"Field '{self.label}' contains non-finite samples")

    def modulus(self):
        """Pointwise spinor 2-norm."""
        return np.sqrt(np.sum(np.abs(self.data) ** 2, axis=0))

    def boundary_ratio(self):
        """max |f| on the outer faces of the box over max |f| overall (0 for a zero field)."""
        mod = self.modulus()
        peak = mod.max()
        if peak == 0.0:
            return 0.0
        faces = [mod[0], mod[-1], mod[:, 0], mod[:, -1], mod[:, :, 0], mod[:, :, -1]]
        return float(max(f.max() for f in faces) / peak)

    def padded(self, factor):
        grid, pads = self.grid.padded(factor)
        data = np.pad(self.data, [(0, 0)] + list(pads))
        return SpinorField3D(grid, data, self.time_tag, self.label)

    def with_data(self, data, time_tag=None):
        return SpinorField3D(self.grid, data, self.time_tag if time_tag is None else time_tag, self.label)


def spectral_derivative(data, k, axis):
    """d/dx along `axis` of periodic samples, k the angular wavenumbers of that axis."""
    shape = [1] * data.ndim
    shape[axis] = k.size
    spectrum = scipy.fft.fft(data, axis=axis, workers=_fft_workers)
    return scipy.fft.ifft(1j * k.reshape(shape) * spectrum, axis=axis, workers=_fft_workers)


def spectral_gradient(data, wavenumbers, first_axis=1):
    """Spectral partial derivatives along consecutive spatial axes starting at `first_axis`."""
    return [spectral_derivative(data, k, first_axis + i) for i, k in enumerate(wavenumbers)]
