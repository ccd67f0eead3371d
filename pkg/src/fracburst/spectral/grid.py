"""Periodic grids, spectral fields and their file formats.

Fourier coefficients are normalised as ``fftn(values) / N`` so that a field
``a * exp(i k.x)`` has coefficient ``a`` at ``k``.  Physical wavevectors are
``2 pi m / L`` for integer ``m``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from ..errors import DomainError, ShapeError

__all__ = [
    "GridSpec",
    "SpectralField",
    "write_field",
    "read_field",
    "write_profile_csv",
    "read_profile_csv",
    "MAX_POINTS",
]

# Memory cap on n**dim; 2**24 points is 128 MiB per real component.
MAX_POINTS = 2**24

_MAGIC = b"FRACBURSTFIELD"  # 14 bytes, followed by a uint16 format version
_VERSION = 1
_HEADER = struct.Struct("<14sH")
_META = struct.Struct("<qqdq")  # dim, n, L, components


@dataclass(frozen=True)
class GridSpec:
    """Periodic box of side ``L`` with ``n`` points per axis in ``dim`` dimensions."""

    dim: int
    n: int
    L: float = 2.0 * math.pi

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {self.dim!r}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 8 and self.n & (self.n - 1) == 0):
            raise DomainError(f"n must be a power of two >= 8, got {self.n!r}")
        if not (math.isfinite(self.L) and self.L > 0):
            raise DomainError(f"box length must be positive, got {self.L!r}")
        if self.n**self.dim > MAX_POINTS:
            raise DomainError(f"n**dim = {self.n ** self.dim} exceeds the cap of {MAX_POINTS} points")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def k_min(self) -> float:
        """Smallest non-zero wavenumber magnitude."""
        return 2.0 * math.pi / self.L

    @property
    def k_max(self) -> float:
        """Largest wavenumber magnitude on the grid (the box corner)."""
        return self.k_min * (self.n // 2) * math.sqrt(self.dim)

    def coords(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.coords()] * self.dim), indexing="ij")

    @cached_property
    def _index(self) -> list[np.ndarray]:
        m = np.fft.fftfreq(self.n, 1.0 / self.n)
        out = []
        for ax in range(self.dim):
            shape = [1] * self.dim
            shape[ax] = self.n
            out.append(m.reshape(shape))
        return out

    @cached_property
    def wavevector(self) -> list[np.ndarray]:
        """Per-axis wavevector components, broadcastable to ``shape``."""
        return [self.k_min * m for m in self._index]

    @cached_property
    def index_sq(self) -> np.ndarray:
        """Integer ``|m|**2`` on the full grid."""
        out = np.zeros(self.shape, dtype=np.int64)
        for m in self._index:
            out = out + (m.astype(np.int64)) ** 2
        return out

    @cached_property
    def kmag(self) -> np.ndarray:
        return self.k_min * np.sqrt(self.index_sq)

    @cached_property
    def unique_kmag(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct ``|k|`` values and the inverse map back onto the grid."""
        vals, inv = np.unique(self.index_sq, return_inverse=True)
        return self.k_min * np.sqrt(vals), inv.reshape(self.shape)

    def radial_multiplier(self, func) -> np.ndarray:
        """Evaluate ``func(|k|)`` once per distinct magnitude and spread over the grid."""
        vals, inv = self.unique_kmag
        return np.asarray(func(vals), dtype=float)[inv]

    def as_dict(self) -> dict:
        return {"dim": self.dim, "n": self.n, "L": self.L}


class SpectralField:
    """Real scalar or vector field on a periodic grid with its Fourier coefficients.

    Values have shape ``(components, *grid.shape)``.  Both arrays are
    read-only; operations return new fields.
    """

    __slots__ = ("grid", "_values", "_coeffs", "solenoidal")

    def __init__(self, grid: GridSpec, values: np.ndarray, coeffs: np.ndarray, solenoidal=False):
        self.grid = grid
        values.setflags(write=False)
        coeffs.setflags(write=False)
        self._values = values
        self._coeffs = coeffs
        self.solenoidal = bool(solenoidal)

    @staticmethod
    def _check_components(grid, arr):
        if arr.ndim == grid.dim:
            arr = arr[None]
        if arr.shape[1:] != grid.shape:
            raise ShapeError(f"field shape {arr.shape[1:]} does not match grid {grid.shape}")
        if arr.shape[0] not in (1, grid.dim):
            raise ShapeError(f"a field has 1 or {grid.dim} components, got {arr.shape[0]}")
        return arr

    @classmethod
    def from_values(cls, grid: GridSpec, values, solenoidal=False) -> "SpectralField":
        v = cls._check_components(grid, np.array(values, dtype=float))
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        axes = tuple(range(1, grid.dim + 1))
        c = np.fft.fftn(v, axes=axes) / grid.n**grid.dim
        return cls(grid, v, c, solenoidal)

    @classmethod
    def from_coeffs(cls, grid: GridSpec, coeffs, solenoidal=False) -> "SpectralField":
        """Build from coefficients; the anti-Hermitian part (if any) is discarded."""
        c = cls._check_components(grid, np.array(coeffs, dtype=complex))
        axes = tuple(range(1, grid.dim + 1))
        v = np.fft.ifftn(c, axes=axes).real * grid.n**grid.dim
        c = np.fft.fftn(v, axes=axes) / grid.n**grid.dim
        return cls(grid, v, c, solenoidal)

    @classmethod
    def zeros(cls, grid: GridSpec, components: int = 1) -> "SpectralField":
        return cls.from_values(grid, np.zeros((components,) + grid.shape))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def components(self) -> int:
        return self._values.shape[0]

    def with_coeffs(self, coeffs, solenoidal=None) -> "SpectralField":
        tag = self.solenoidal if solenoidal is None else solenoidal
        return SpectralField.from_coeffs(self.grid, coeffs, tag)

    def pointwise_norm(self) -> np.ndarray:
        """Euclidean norm over components at every grid point."""
        if self.components == 1:
            return np.abs(self._values[0])
        return np.sqrt(np.sum(self._values**2, axis=0))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self._values**2) * self.grid.cell_volume))

    def coeff_l2_norm(self) -> float:
        """L2 norm from the coefficient side (Parseval)."""
        return float(np.sqrt(np.sum(np.abs(self._coeffs) ** 2) * self.grid.L**self.grid.dim))

    def roundtrip_residual(self) -> float:
        axes = tuple(range(1, self.grid.dim + 1))
        back = np.fft.ifftn(self._coeffs, axes=axes).real * self.grid.n**self.grid.dim
        scale = max(float(np.max(np.abs(self._values))), np.finfo(float).tiny)
        return float(np.max(np.abs(back - self._values)) / scale)

    def hermitian_residual(self) -> float:
        """``max |c(k) - conj(c(-k))|`` relative to ``max |c|``."""
        axes = tuple(range(1, self.grid.dim + 1))
        flipped = np.roll(np.flip(self._coeffs, axis=axes), 1, axis=axes)
        scale = max(float(np.max(np.abs(self._coeffs))), np.finfo(float).tiny)
        return float(np.max(np.abs(self._coeffs - np.conj(flipped))) / scale)

    def divergence_residual(self) -> float:
        """``max_k |k . c(k)|`` relative to ``max_k |k| |c(k)|`` (vector fields)."""
        if self.components != self.grid.dim:
            raise ShapeError("divergence needs a vector field")
        div = sum(k * c for k, c in zip(self.grid.wavevector, self._coeffs))
        scale = float(np.max(self.grid.kmag * np.sqrt(np.sum(np.abs(self._coeffs) ** 2, axis=0))))
        return float(np.max(np.abs(div)) / scale) if scale > 0 else 0.0

    def __repr__(self):
        return f"SpectralField(grid={self.grid}, components={self.components})"


def write_field(path, field: SpectralField) -> None:
    """Write a field in the flat binary format (header, metadata, float64 samples)."""
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION))
        fh.write(_META.pack(g.dim, g.n, float(g.L), field.components))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path) -> SpectralField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + _META.size:
        raise DomainError(f"{path}: file too short for a field header")
    magic, version = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise DomainError(f"{path}: not a field file (bad magic)")
    if version != _VERSION:
        raise DomainError(f"{path}: unsupported field format version {version}")
    dim, n, L, comps = _META.unpack_from(raw, _HEADER.size)
    grid = GridSpec(int(dim), int(n), float(L))
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size + _META.size)
    expected = comps * n**dim
    if data.size != expected:
        raise DomainError(f"{path}: expected {expected} samples, found {data.size}")
    return SpectralField.from_values(grid, data.reshape((comps,) + grid.shape))


def write_profile_csv(path, columns: dict) -> None:
    """Write equal-length 1-D arrays as CSV columns with a header row."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def read_profile_csv(path) -> dict:
    arr = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(arr[name]) for name in arr.dtype.names}
