"""Commutator-based gradient and divergence on Hermitian matrices.

A set of Hermitian matrices L_1..L_ell induces the gradient
X -> [L_s, X] (a stack of skew-Hermitian matrices) and the divergence
Z -> sum_s [Z_s, L_s] (Hermitian, trace-free).  The divergence is the
negative adjoint of the gradient under the Hilbert-Schmidt inner
product, mirroring the spatial operators.

The operator -div grad acts on the k^2-dimensional real vector space of
Hermitian matrices; its dense realization in an orthonormal basis gives
the spectral bound needed for solver step sizes and the kernel check.
A set is admissible only when the gradient's null space is exactly
span{I}; otherwise the induced transport cost is degenerate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, NumericalError, ValidationError
from .fields import hermitian_defect, hermitian_part

LINDBLAD_FORMAT_VERSION = 1
KERNEL_EIG_TOL = 1e-10


def _as_matrix_stack(matrices) -> np.ndarray:
    # real symmetric stacks stay float64: the whole transport iteration
    # then runs in real arithmetic (matching the complex path to rounding)
    arr = np.asarray(matrices)
    arr = arr.astype(np.float64 if not np.iscomplexobj(arr) else np.complex128)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValidationError(f"expected (ell, k, k) Hermitian stack, got shape {arr.shape}")
    scale = max(float(np.max(np.abs(arr))), 1.0)
    if hermitian_defect(arr) > 1e-10 * scale:
        raise ValidationError("matrices must be Hermitian")
    return hermitian_part(arr)


@dataclass(frozen=True)
class LindbladSet:
    """ell Hermitian k x k matrices with a nondegenerate induced gradient.

    Construction rejects sets whose gradient kernel is larger than
    span{I} (see check_kernel); such sets cannot metrize transport.
    """

    matrices: np.ndarray

    def __post_init__(self):
        arr = _as_matrix_stack(self.matrices)
        if not check_kernel(arr):
            raise ValidationError(
                "gradient kernel is not span{I}; the matrix set is degenerate"
            )
        object.__setattr__(self, "matrices", arr)

    @property
    def ell(self) -> int:
        return self.matrices.shape[0]

    @property
    def k(self) -> int:
        return self.matrices.shape[1]


def _lmul(L: np.ndarray, x: np.ndarray) -> np.ndarray:
    """L_s @ x over a batch: x (..., k, k) -> (..., ell, k, k)."""
    return np.einsum("sab,...bc->...sac", L, x, optimize=True)


def _rmul(x: np.ndarray, L: np.ndarray) -> np.ndarray:
    return np.einsum("...ab,sbc->...sac", x, L, optimize=True)


def _conj_t(x: np.ndarray) -> np.ndarray:
    xt = np.swapaxes(x, -1, -2)
    return np.conj(xt) if np.iscomplexobj(x) else xt


def grad_L(L, x: np.ndarray) -> np.ndarray:
    """Commutator gradient [L_s, x] per component, exactly skew-Hermitian.

    x must be Hermitian (it always is for the dual potentials this acts
    on), which lets the commutator be formed as P - P^H with P = L_s x:
    one contraction, and the output is skew by construction rather than
    by projection.  Real symmetric inputs stay real (output is then
    antisymmetric).  x has shape (..., k, k); the result has shape
    (..., ell, k, k).
    """
    mats = L.matrices if isinstance(L, LindbladSet) else _as_matrix_stack(L)
    x = np.asarray(x)
    if x.shape[-1] != mats.shape[-1] or x.shape[-2] != mats.shape[-1]:
        raise DimensionMismatchError(
            f"matrix dim {x.shape[-2:]} does not match set dim {mats.shape[-1]}"
        )
    if np.iscomplexobj(x) != np.iscomplexobj(mats):
        x = x.astype(np.complex128)
        mats = mats.astype(np.complex128)
    p = _lmul(mats, x)
    return p - _conj_t(p)


def div_L(L, z: np.ndarray) -> np.ndarray:
    """Divergence sum_s (Z_s L_s - L_s Z_s), exactly Hermitian, trace-free
    up to rounding.

    z must be skew-Hermitian (the channel fluxes are, structurally),
    which reduces the divergence to T + T^H with T = sum_s Z_s L_s.
    Satisfies <grad_L x, z> = -<x, div_L z>.  z has shape
    (..., ell, k, k); the result has shape (..., k, k).
    """
    mats = L.matrices if isinstance(L, LindbladSet) else _as_matrix_stack(L)
    z = np.asarray(z)
    if z.shape[-3] != mats.shape[0] or z.shape[-2:] != mats.shape[-2:]:
        raise DimensionMismatchError(
            f"flux stack {z.shape[-3:]} does not match set shape {mats.shape}"
        )
    if np.iscomplexobj(z) != np.iscomplexobj(mats):
        z = z.astype(np.complex128)
        mats = mats.astype(np.complex128)
    t = np.einsum("...sab,sbc->...ac", z, mats, optimize=True)
    return t + _conj_t(t)


def hermitian_basis(k: int) -> np.ndarray:
    """Orthonormal basis of k x k Hermitian matrices, shape (k^2, k, k).

    Diagonal units E_ii, then (E_ij + E_ji)/sqrt2 and i(E_ij - E_ji)/sqrt2
    for i < j; orthonormal under the Hilbert-Schmidt inner product.
    """
    basis = np.zeros((k * k, k, k), dtype=np.complex128)
    m = 0
    for i in range(k):
        basis[m, i, i] = 1.0
        m += 1
    s = 1.0 / np.sqrt(2.0)
    for i in range(k):
        for j in range(i + 1, k):
            basis[m, i, j] = s
            basis[m, j, i] = s
            m += 1
            basis[m, i, j] = 1j * s
            basis[m, j, i] = -1j * s
            m += 1
    return basis


def operator_matrix(L) -> np.ndarray:
    """Dense k^2 x k^2 realization of -div_L grad_L on Hermitian matrices.

    Entry (a, b) is <grad_L B_a, grad_L B_b> in the hermitian_basis, so
    the matrix is symmetric positive semidefinite by construction.
    """
    mats = L.matrices if isinstance(L, LindbladSet) else _as_matrix_stack(L)
    k = mats.shape[-1]
    basis = hermitian_basis(k)
    grads = _lmul(mats, basis) - _rmul(basis, mats)  # (k^2, ell, k, k)
    M = np.real(np.einsum("aspq,bspq->ab", grads, np.conj(grads)))
    return 0.5 * (M + M.T)


def lambda_max_L(L) -> float:
    """Largest eigenvalue of -div_L grad_L via the dense realization."""
    try:
        return float(np.linalg.eigvalsh(operator_matrix(L)).max())
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"eigensolve failed: {exc}") from exc


def check_kernel(matrices) -> bool:
    """True iff the gradient's null space is exactly span{I}.

    Counts eigenvalues of the dense operator below KERNEL_EIG_TOL times
    the largest one as zero.
    """
    mats = _as_matrix_stack(matrices)
    eigs = np.linalg.eigvalsh(operator_matrix(mats))
    lam_max = float(eigs.max())
    return int(np.sum(eigs <= KERNEL_EIG_TOL * max(lam_max, 0.0))) == 1


def load_lindblad(path) -> LindbladSet:
    """Load a matrix set from JSON {k, ell, matrices: row-major [re, im] pairs}."""
    data = json.loads(Path(path).read_text())
    try:
        k = int(data["k"])
        ell = int(data["ell"])
        mats = np.empty((ell, k, k), dtype=np.complex128)
        for s, flat in enumerate(data["matrices"]):
            if len(flat) != k * k:
                raise ValueError(f"matrix {s} has {len(flat)} entries, expected {k * k}")
            vals = np.array([complex(re, im) for re, im in flat])
            mats[s] = vals.reshape(k, k)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed matrix-set file ({exc})") from exc
    return LindbladSet(mats)


def save_lindblad(path, L: LindbladSet) -> None:
    data = {
        "format_version": LINDBLAD_FORMAT_VERSION,
        "k": L.k,
        "ell": L.ell,
        "matrices": [
            [[float(z.real), float(z.imag)] for z in mat.ravel()] for mat in L.matrices
        ],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def default_lindblad3() -> LindbladSet:
    """Default 3x3 pair used by the demo fixtures and benchmarks."""
    L1 = np.diag([1.0, 2.0, 0.0]).astype(np.complex128)
    L2 = np.array([[1, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=np.complex128)
    return LindbladSet(np.stack([L1, L2]))
