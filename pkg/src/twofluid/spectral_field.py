"""Periodic grid fields with exact spectral calculus.

All fields live on the torus ``[0, 2*pi)^dim`` sampled on a uniform grid with
``n`` points per axis, so the wavenumber lattice is the integer lattice
``k_j in [-n/2, n/2)``.

Transform normalization: the forward transform divides by the total number of
grid points ``M``, so ``spectral`` holds Fourier-series coefficients and a
constant field ``c`` has a single nonzero coefficient ``c`` at ``k = 0``.

Derivatives multiply by ``i*k_j``. The Nyquist wavenumber ``k_j = -n/2`` is
treated as having zero derivative, which is the only choice that keeps the
derivative of a real field real.

Two-dimensional curl convention: a 2D vector field ``v = (v1, v2)`` has scalar
curl ``d1 v2 - d2 v1`` (the out-of-plane component), and a scalar field ``b``
(an out-of-plane vector) has vector curl ``(d2 b, -d1 b)``.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

MAGIC = b"BPF1"
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``[0, 2*pi)^dim``."""

    dim: int
    n: int

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"points_per_axis must be a power of two >= 16, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.n

    @property
    def volume(self) -> float:
        return (2.0 * np.pi) ** self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        """Trailing spatial axes; leading axes index components."""
        return tuple(range(-self.dim, 0))

    @cached_property
    def coords(self) -> np.ndarray:
        x = np.arange(self.n) * self.dx
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer lattice ``k`` with shape ``(dim, *shape)``."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return np.stack(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(np.sum(self.wavenumbers**2, axis=0))

    @cached_property
    def deriv_wavenumbers(self) -> np.ndarray:
        """Wavenumbers used for differentiation (Nyquist entries zeroed)."""
        k = self.wavenumbers.copy()
        k[k == -self.n // 2] = 0.0
        return k

    @cached_property
    def nyquist_free(self) -> np.ndarray:
        """Boolean mask of lattice points with no Nyquist component."""
        return np.all(self.wavenumbers != -self.n // 2, axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with every ``|k_j| < n/3``."""
        return np.all(np.abs(self.wavenumbers) < self.n / 3.0, axis=0)


def fft(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Fourier-series coefficients of a component-first array."""
    return np.fft.fftn(values, axes=grid.axes) / grid.size


def ifft(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Real physical values from Fourier-series coefficients."""
    return np.fft.ifftn(coeffs * grid.size, axes=grid.axes).real


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real vector-valued field on a periodic grid.

    ``values`` has shape ``(components, *grid.shape)``. The spectral
    representation is computed lazily and cached.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape == self.grid.shape:
            values = values[None]
        if values.ndim != self.grid.dim + 1 or values.shape[1:] != self.grid.shape:
            raise ValueError(
                f"values of shape {values.shape} do not match grid {self.grid.shape}"
            )
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_spectral(cls, grid: GridSpec, coeffs: np.ndarray) -> SpectralField:
        return cls(grid, ifft(coeffs, grid))

    @classmethod
    def zeros(cls, grid: GridSpec, components: int = 1) -> SpectralField:
        return cls(grid, np.zeros((components, *grid.shape)))

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> SpectralField:
        """Sample ``func(*coords)``; a sequence result becomes a vector field."""
        out = func(*grid.coords)
        if isinstance(out, (list, tuple)):
            out = np.stack([np.broadcast_to(np.asarray(c, float), grid.shape) for c in out])
        else:
            out = np.broadcast_to(np.asarray(out, float), grid.shape)
        return cls(grid, out)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    @cached_property
    def spectral(self) -> np.ndarray:
        return fft(self.values, self.grid)

    def component(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.values[i])

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean magnitude over components."""
        if self.components == 1:
            return np.abs(self.values[0])
        return np.sqrt(np.sum(self.values**2, axis=0))

    def _check(self, other: SpectralField) -> None:
        if other.grid != self.grid or other.components != self.components:
            raise ValueError("fields live on different grids or have different shapes")

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.values + other.values)

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> SpectralField:
        return SpectralField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.values)


def stack(fields: list[SpectralField]) -> SpectralField:
    """Concatenate fields along the component axis."""
    grid = fields[0].grid
    return SpectralField(grid, np.concatenate([f.values for f in fields]))


def _spectral_derivative(coeffs: np.ndarray, grid: GridSpec, j: int) -> np.ndarray:
    return 1j * grid.deriv_wavenumbers[j] * coeffs


def gradient(f: SpectralField) -> SpectralField:
    """Gradient of a scalar field."""
    if f.components != 1:
        raise ValueError("gradient expects a scalar field; use jacobian for vectors")
    return jacobian(f)


def jacobian(f: SpectralField) -> SpectralField:
    """Component-wise gradient: component ``c*dim + j`` holds ``d_j f_c``."""
    grid = f.grid
    out = [
        _spectral_derivative(f.spectral[c], grid, j)
        for c in range(f.components)
        for j in range(grid.dim)
    ]
    return SpectralField.from_spectral(grid, np.stack(out))


def divergence(v: SpectralField) -> SpectralField:
    if v.components != v.grid.dim:
        raise ValueError(f"divergence needs {v.grid.dim} components, got {v.components}")
    grid = v.grid
    out = sum(_spectral_derivative(v.spectral[j], grid, j) for j in range(grid.dim))
    return SpectralField.from_spectral(grid, out)


def curl_coeffs(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Curl in spectral space, following the module's 2D convention."""
    d = lambda c, j: _spectral_derivative(coeffs[c], grid, j)  # noqa: E731
    if grid.dim == 3:
        if coeffs.shape[0] != 3:
            raise ValueError("3D curl needs a 3-component field")
        return np.stack([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)])
    if coeffs.shape[0] == 2:
        return (d(1, 0) - d(0, 1))[None]
    if coeffs.shape[0] == 1:
        return np.stack([d(0, 1), -d(0, 0)])
    raise ValueError("2D curl needs a 1- or 2-component field")


def curl(v: SpectralField) -> SpectralField:
    """Curl; in 2D maps vectors to scalars and scalars to vectors."""
    return SpectralField.from_spectral(v.grid, curl_coeffs(v.spectral, v.grid))


def laplacian(f: SpectralField) -> SpectralField:
    k2 = np.sum(f.grid.deriv_wavenumbers**2, axis=0)
    return SpectralField.from_spectral(f.grid, -k2 * f.spectral)


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField.from_spectral(f.grid, f.spectral * f.grid.dealias_mask)


def lp_norm(f: SpectralField, p: float) -> float:
    """Discrete ``L^p`` norm over the torus of the pointwise magnitude."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    mag = f.magnitude()
    if np.isinf(p):
        return float(np.max(mag))
    weight = f.grid.volume / f.grid.size
    if p == 2:
        return float(np.sqrt(weight * np.sum(mag * mag)))
    return float((weight * np.sum(mag**p)) ** (1.0 / p))


def write_field(f: SpectralField, dest) -> None:
    """Append one binary record (``BPF1`` header plus float64 values)."""
    header = _HEADER.pack(MAGIC, f.grid.dim, f.grid.n, f.components)
    body = np.moveaxis(f.values, 0, -1).astype("<f8", copy=False).tobytes(order="C")
    if isinstance(dest, (str, Path)):
        with open(dest, "wb") as fh:
            fh.write(header + body)
    else:
        dest.write(header + body)


def read_field(src) -> SpectralField:
    """Read one binary record from a path or an open binary stream."""
    if isinstance(src, (str, Path)):
        with open(src, "rb") as fh:
            return read_field(fh)
    raw = src.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise EOFError("truncated field header")
    magic, dim, n, comps = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    grid = GridSpec(dim, n)
    count = comps * grid.size
    data = np.frombuffer(src.read(8 * count), dtype="<f8")
    if data.size != count:
        raise EOFError("truncated field body")
    values = np.moveaxis(data.reshape(*grid.shape, comps), -1, 0)
    return SpectralField(grid, values)


def read_fields(path) -> list[SpectralField]:
    """Read every record of a concatenated snapshot file."""
    data = Path(path).read_bytes()
    stream = io.BytesIO(data)
    out = []
    while stream.tell() < len(data):
        out.append(read_field(stream))
    return out
