"""Value types for the transport solvers: grids, densities, fluxes.

Densities live on an n x n grid of finite-volume cells covering the unit
square; cell values are cell masses, so a unit-mass field sums to one
without any dx^2 weight.  Matrix-valued fields store one k x k complex
Hermitian matrix per cell (payload axes last, so per-pixel kernels touch
contiguous memory); skew-Hermitian stacks appear as channel fluxes of
the matrix solver.

Binary I/O uses the OMTF format: magic ``OMTF1``, three little-endian
uint32 header words (kind, n, k), then row-major float64 payload with
complex numbers interleaved re,im.  Plain CSV (n rows of n values) is
accepted for scalar fields.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, ValidationError

MASS_TOL = 1e-12
# PSD slack for matrix densities; absorbs I/O rounding.
PSD_EIG_TOL = -1e-10

OMTF_MAGIC = b"OMTF1"
KIND_SCALAR = 0
KIND_VECTOR = 1
KIND_MATRIX_REAL = 2
KIND_MATRIX_COMPLEX = 3


@dataclass(frozen=True)
class GridSpec:
    """Square n x n discretization of [0,1]^2 with spacing dx = 1/(n-1)."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValidationError(f"grid needs an integer n >= 2, got {self.n!r}")

    @property
    def dx(self) -> float:
        return 1.0 / (self.n - 1)

    def coords(self) -> np.ndarray:
        """Cell-center coordinates along one axis, shape (n,)."""
        return np.arange(self.n) * self.dx


# ---------------------------------------------------------------------------
# Hermitian / skew-Hermitian helpers.
#
# Matrices are stored as full complex arrays; structure is kept *exact* by
# always passing results through the symmetrizers below.  (A+A^H)/2 of an
# already-Hermitian A reproduces it bit-for-bit, so the projections are
# idempotent and safe to apply defensively.
# ---------------------------------------------------------------------------


def hermitian_part(x: np.ndarray) -> np.ndarray:
    """Exact Hermitian projection of the trailing two axes."""
    xt = np.swapaxes(x, -1, -2)
    if np.iscomplexobj(x):
        xt = np.conj(xt)
    return 0.5 * (x + xt)


def skew_part(x: np.ndarray) -> np.ndarray:
    """Exact skew-Hermitian projection of the trailing two axes."""
    xt = np.swapaxes(x, -1, -2)
    if np.iscomplexobj(x):
        xt = np.conj(xt)
    return 0.5 * (x - xt)


def hermitian_defect(x: np.ndarray) -> float:
    """Largest entry of x - x^H over the trailing two axes."""
    return float(np.max(np.abs(x - np.conj(np.swapaxes(x, -1, -2)))))


def skew_defect(x: np.ndarray) -> float:
    return float(np.max(np.abs(x + np.conj(np.swapaxes(x, -1, -2)))))


def hs_inner(x: np.ndarray, y: np.ndarray) -> float:
    """Hilbert-Schmidt inner product Re tr(x y^*).

    Accepts single matrices or stacks (summed over all axes); equals the
    real dot product of the flattened real/imaginary components.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.real(np.sum(x * np.conj(y))))


# ---------------------------------------------------------------------------
# Density fields
# ---------------------------------------------------------------------------


def _check_grid_array(values, ndim_min, name):
    arr = np.asarray(values)
    if arr.ndim < ndim_min or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name}: expected (n, n, ...) array, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValidationError(f"{name}: grid side must be >= 2")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: non-finite entries")
    return arr


@dataclass(frozen=True)
class ScalarDensity:
    """Nonnegative scalar cell masses, shape (n, n)."""

    values: np.ndarray

    def __post_init__(self):
        arr = _check_grid_array(self.values, 2, "ScalarDensity").astype(np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"ScalarDensity: expected 2-d array, got {arr.ndim}-d")
        if arr.min() < 0:
            raise ValidationError("ScalarDensity: negative entries")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n)


@dataclass(frozen=True)
class VectorDensity:
    """Nonnegative k-channel cell masses, shape (n, n, k)."""

    values: np.ndarray

    def __post_init__(self):
        arr = _check_grid_array(self.values, 3, "VectorDensity").astype(np.float64)
        if arr.ndim != 3:
            raise ValidationError(f"VectorDensity: expected 3-d array, got {arr.ndim}-d")
        if arr.min() < 0:
            raise ValidationError("VectorDensity: negative entries")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[2]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n)


@dataclass(frozen=True)
class MatrixDensity:
    """Per-cell k x k Hermitian PSD matrices, shape (n, n, k, k) complex."""

    values: np.ndarray

    def __post_init__(self):
        arr = _check_grid_array(self.values, 4, "MatrixDensity").astype(np.complex128)
        if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
            raise ValidationError(f"MatrixDensity: expected (n, n, k, k), got {arr.shape}")
        scale = max(float(np.max(np.abs(arr))), 1.0)
        if hermitian_defect(arr) > 1e-10 * scale:
            raise ValidationError("MatrixDensity: per-cell matrices not Hermitian")
        arr = hermitian_part(arr)
        eigs = np.linalg.eigvalsh(arr)
        if eigs.min() < PSD_EIG_TOL * scale:
            raise ValidationError(
                f"MatrixDensity: matrix with eigenvalue {eigs.min():g} below PSD tolerance"
            )
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[2]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n)

    def trace_field(self) -> np.ndarray:
        """Per-cell trace (real), shape (n, n)."""
        return np.real(np.trace(self.values, axis1=2, axis2=3))


Density = ScalarDensity | VectorDensity | MatrixDensity


def total_mass(d: Density) -> float:
    """Total mass: plain sum for scalar/vector, trace sum for matrix fields."""
    if isinstance(d, MatrixDensity):
        return float(np.sum(d.trace_field()))
    return float(np.sum(d.values))


def normalize(d: Density) -> Density:
    """Rescale to unit total mass.  Raises on nonpositive mass."""
    m = total_mass(d)
    if m <= 0:
        raise ValidationError(f"cannot normalize field with total mass {m:g}")
    return type(d)(d.values / m)


# ---------------------------------------------------------------------------
# Flux fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxField:
    """Staggered spatial flux (ux, uy) with zero ghost samples.

    ux[i, j] sits on the face between cells (i, j) and (i+1, j); the last
    row of ux and last column of uy are ghost entries pinned to zero,
    which encodes the no-flow boundary.
    """

    ux: np.ndarray
    uy: np.ndarray

    def __post_init__(self):
        ux = np.asarray(self.ux)
        uy = np.asarray(self.uy)
        if ux.shape != uy.shape:
            raise DimensionMismatchError(f"ux/uy shapes differ: {ux.shape} vs {uy.shape}")
        if ux.ndim < 2 or ux.shape[0] != ux.shape[1]:
            raise ValidationError(f"FluxField: expected (n, n, ...) arrays, got {ux.shape}")
        if np.any(ux[-1, :] != 0) or np.any(uy[:, -1] != 0):
            raise ValidationError("FluxField: ghost entries must be exactly zero")
        object.__setattr__(self, "ux", ux)
        object.__setattr__(self, "uy", uy)

    @classmethod
    def zeros(cls, grid: GridSpec, payload_shape: tuple = (), dtype=np.float64):
        shape = (grid.n, grid.n) + tuple(payload_shape)
        return cls(np.zeros(shape, dtype), np.zeros(shape, dtype))

    @property
    def n(self) -> int:
        return self.ux.shape[0]


@dataclass(frozen=True)
class GraphFlux:
    """Per-cell edge fluxes, shape (n, n, ell).  No boundary condition."""

    values: np.ndarray

    def __post_init__(self):
        arr = _check_grid_array(self.values, 3, "GraphFlux").astype(np.float64)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class QuantumFlux:
    """Per-cell stacks of ell skew-Hermitian k x k matrices, shape (n, n, ell, k, k)."""

    values: np.ndarray

    def __post_init__(self):
        arr = _check_grid_array(self.values, 5, "QuantumFlux").astype(np.complex128)
        if arr.ndim != 5 or arr.shape[3] != arr.shape[4]:
            raise ValidationError(f"QuantumFlux: expected (n, n, ell, k, k), got {arr.shape}")
        scale = max(float(np.max(np.abs(arr))), 1.0)
        if skew_defect(arr) > 1e-10 * scale:
            raise ValidationError("QuantumFlux: matrices not skew-Hermitian")
        object.__setattr__(self, "values", skew_part(arr))


# ---------------------------------------------------------------------------
# OMTF binary format and CSV
# ---------------------------------------------------------------------------


def write_omtf(path, field: Density) -> None:
    """Write a density field in the OMTF binary format."""
    path = Path(path)
    if isinstance(field, ScalarDensity):
        kind, k = KIND_SCALAR, 1
        payload = field.values
    elif isinstance(field, VectorDensity):
        kind, k = KIND_VECTOR, field.k
        payload = field.values
    elif isinstance(field, MatrixDensity):
        k = field.k
        if np.all(field.values.imag == 0):
            kind = KIND_MATRIX_REAL
            payload = field.values.real
        else:
            kind = KIND_MATRIX_COMPLEX
            payload = np.stack([field.values.real, field.values.imag], axis=-1)
    else:
        raise ValidationError(f"cannot write object of type {type(field).__name__}")
    with open(path, "wb") as fh:
        fh.write(OMTF_MAGIC)
        fh.write(struct.pack("<III", kind, field.n, k))
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def read_omtf(path) -> Density:
    """Read an OMTF file back into the matching density type."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(OMTF_MAGIC) + 12 or raw[: len(OMTF_MAGIC)] != OMTF_MAGIC:
        raise ValidationError(f"{path}: not an OMTF file")
    kind, n, k = struct.unpack_from("<III", raw, len(OMTF_MAGIC))
    body = np.frombuffer(raw, dtype="<f8", offset=len(OMTF_MAGIC) + 12)
    if kind == KIND_SCALAR:
        expect, shape = n * n, (n, n)
    elif kind == KIND_VECTOR:
        expect, shape = n * n * k, (n, n, k)
    elif kind == KIND_MATRIX_REAL:
        expect, shape = n * n * k * k, (n, n, k, k)
    elif kind == KIND_MATRIX_COMPLEX:
        expect, shape = 2 * n * n * k * k, (n, n, k, k, 2)
    else:
        raise ValidationError(f"{path}: unknown OMTF kind {kind}")
    if body.size != expect:
        raise ValidationError(f"{path}: payload size {body.size} != expected {expect}")
    body = body.reshape(shape)
    if kind == KIND_SCALAR:
        return ScalarDensity(body)
    if kind == KIND_VECTOR:
        return VectorDensity(body)
    if kind == KIND_MATRIX_REAL:
        return MatrixDensity(body.astype(np.complex128))
    return MatrixDensity(body[..., 0] + 1j * body[..., 1])


def read_scalar_csv(path) -> ScalarDensity:
    """Read a scalar field from CSV: n rows of n comma-separated values."""
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    if arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{path}: CSV must be square, got {arr.shape}")
    return ScalarDensity(arr)


def read_density(path) -> Density:
    """Load a density from OMTF, or from CSV when the suffix is .csv."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_scalar_csv(path)
    return read_omtf(path)
