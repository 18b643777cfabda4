"""Closed-form proximal (shrink) operators and the matching dual norms.

Four norm families cover every per-pixel flux payload the solvers use:

* ``l2``    - Euclidean norm of the whole payload; block soft threshold.
* ``l12``   - sum of Euclidean norms over rows (channel rows of a spatial
  flux, or the per-direction matrix blocks); one soft threshold per row.
* ``l1``    - elementwise; complex soft threshold preserving phase.
* ``l1nuc`` - sum of nuclear norms over matrix blocks; eigenvalue soft
  threshold.  Unitary invariance guarantees the prox of a Hermitian
  (skew-Hermitian) input stays Hermitian (skew-Hermitian), so the
  eigendecomposition route is exact and cheaper than a general SVD.

Payload layout is described by PayloadSpec; all operators broadcast over
arbitrary leading (pixel) axes, with the payload in the trailing axes.
Thresholding at exactly the tie point returns 0 (both prox branches
agree there; pinned for bit-reproducibility).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NumericalError, UnsupportedNormError, ValidationError
from .fields import hermitian_part, skew_part

_TINY = np.finfo(np.float64).tiny


class NormFamily(str, Enum):
    L2 = "l2"
    L12 = "l12"
    L1 = "l1"
    L1NUC = "l1nuc"


_PAYLOAD_RANK = {
    ("scalar", "u"): 1,  # (2,)
    ("vector", "u"): 2,  # (2, k)
    ("matrix", "u"): 3,  # (2, k, k)
    ("vector", "w"): 1,  # (ell,)
    ("matrix", "w"): 3,  # (ell, k, k)
}


@dataclass(frozen=True)
class PayloadSpec:
    """Shape role of a per-pixel flux payload.

    kind is the density kind ("scalar", "vector", "matrix"); role is "u"
    for spatial fluxes (leading payload axis = 2 directions) and "w" for
    channel fluxes (leading payload axis = ell edges/components).
    """

    kind: str
    role: str

    def __post_init__(self):
        if (self.kind, self.role) not in _PAYLOAD_RANK:
            raise ValidationError(f"no payload of kind={self.kind!r} role={self.role!r}")

    @property
    def rank(self) -> int:
        return _PAYLOAD_RANK[(self.kind, self.role)]


def validate_norm(family: NormFamily, payload: PayloadSpec) -> None:
    """Raise UnsupportedNormError when the family/payload pairing is invalid."""
    family = NormFamily(family)
    if family == NormFamily.L1NUC and payload.kind != "matrix":
        raise UnsupportedNormError("nuclear norm requires a matrix payload")
    if family == NormFamily.L12 and payload.role != "u":
        raise UnsupportedNormError("row-grouped norm applies only to spatial fluxes")


def _abs2(x: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(x):
        return x.real**2 + x.imag**2
    return x * x


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _sumsq_over(x: np.ndarray, axes: tuple, keepdims: bool = False) -> np.ndarray:
    """Sum of squared moduli over axes, via einsum (no squared temporary;
    markedly faster than .sum() over strided middle axes)."""
    axes = tuple(a % x.ndim for a in axes)
    sub = _LETTERS[: x.ndim]
    out_sub = "".join(c for i, c in enumerate(sub) if i not in axes)
    spec = f"{sub},{sub}->{out_sub}"
    if np.iscomplexobj(x):
        out = np.einsum(spec, x.real, x.real) + np.einsum(spec, x.imag, x.imag)
    else:
        out = np.einsum(spec, x, x)
    if keepdims:
        shape = list(x.shape)
        for a in axes:
            shape[a] = 1
        out = out.reshape(shape)
    return out


def _payload_axes(payload: PayloadSpec, ndim: int) -> tuple:
    return tuple(range(ndim - payload.rank, ndim))


def _group_axes(payload: PayloadSpec, ndim: int) -> tuple:
    """Axes reduced inside one l12 row; rows live on the remaining payload axis."""
    if payload.kind == "vector":
        return (ndim - 2,)  # reduce directions, group per channel
    if payload.kind == "matrix":
        return (ndim - 2, ndim - 1)  # reduce matrix entries, group per direction
    return (ndim - 1,)  # scalar: single row, same as l2


def _block_shrink(x: np.ndarray, mu: float, axes: tuple) -> np.ndarray:
    r = _sumsq_over(x, axes, keepdims=True)
    np.sqrt(r, out=r)
    np.maximum(r, _TINY, out=r)
    np.divide(mu, r, out=r)
    np.subtract(1.0, r, out=r)
    np.maximum(r, 0.0, out=r)
    return x * r


def _soft_threshold(x: np.ndarray, mu: float) -> np.ndarray:
    r = np.abs(x)
    np.maximum(r, _TINY, out=r)
    np.divide(mu, r, out=r)
    np.subtract(1.0, r, out=r)
    np.maximum(r, 0.0, out=r)
    return x * r


# ---------------------------------------------------------------------------
# Primitive shrinks
# ---------------------------------------------------------------------------


def shrink1(x, mu: float):
    """Soft threshold of the modulus, phase preserved; elementwise on arrays."""
    if mu <= 0:
        raise ValidationError("shrink threshold must be positive")
    arr = np.asarray(x)
    out = _soft_threshold(np.atleast_1d(arr), mu)
    return out[0] if arr.ndim == 0 else out


def shrink2(x, mu: float):
    """Block soft threshold: scales the whole vector toward zero by mu."""
    if mu <= 0:
        raise ValidationError("shrink threshold must be positive")
    x = np.asarray(x)
    return _block_shrink(x, mu, tuple(range(x.ndim)))


def _eig_shrink(x: np.ndarray, mu: float) -> np.ndarray:
    """Eigenvalue soft threshold of Hermitian blocks (trailing two axes)."""
    try:
        w, v = np.linalg.eigh(x)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolve failed in nuclear shrink: {exc}") from exc
    wt = np.sign(w) * np.maximum(np.abs(w) - mu, 0.0)
    out = np.einsum("...ab,...b,...cb->...ac", v, wt.astype(np.complex128), np.conj(v))
    return hermitian_part(out)


def shrink_nuc(x, mu: float, structure: str = "hermitian"):
    """Singular-value soft threshold of matrix blocks (trailing two axes).

    structure selects the route: "hermitian" thresholds eigenvalue
    magnitudes keeping signs, "skew" works on -i*x and rotates back, and
    "general" uses a full SVD.  Hermitian/skew outputs keep their
    structure exactly.
    """
    if mu <= 0:
        raise ValidationError("shrink threshold must be positive")
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim < 2 or x.shape[-1] != x.shape[-2]:
        raise ValidationError(f"expected square matrix blocks, got shape {x.shape}")
    if structure == "hermitian":
        return _eig_shrink(x, mu)
    if structure == "skew":
        return skew_part(1j * _eig_shrink(-1j * x, mu))
    if structure == "general":
        try:
            u, s, vh = np.linalg.svd(x)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"SVD failed in nuclear shrink: {exc}") from exc
        st = np.maximum(s - mu, 0.0)
        return np.einsum("...ab,...b,...bc->...ac", u, st.astype(np.complex128), vh)
    raise ValidationError(f"unknown structure {structure!r}")


def _nuc_structure(payload: PayloadSpec) -> str:
    return "hermitian" if payload.role == "u" else "skew"


# ---------------------------------------------------------------------------
# Family dispatch
# ---------------------------------------------------------------------------


def shrink_norm(x: np.ndarray, mu: float, family, payload: PayloadSpec) -> np.ndarray:
    """Proximal operator of mu * ||.|| for the given family and payload."""
    family = NormFamily(family)
    validate_norm(family, payload)
    if mu <= 0:
        raise ValidationError("shrink threshold must be positive")
    x = np.asarray(x)
    if family == NormFamily.L2:
        return _block_shrink(x, mu, _payload_axes(payload, x.ndim))
    if family == NormFamily.L12:
        return _block_shrink(x, mu, _group_axes(payload, x.ndim))
    if family == NormFamily.L1:
        return _soft_threshold(x, mu)
    return shrink_nuc(x, mu, structure=_nuc_structure(payload))


def shrink_regularized(
    x: np.ndarray, mu: float, eps: float, family, payload: PayloadSpec
) -> np.ndarray:
    """Proximal operator of mu * (||.|| + eps ||.||^2), blockwise.

    The quadratic term is taken per shrink block, which makes the prox
    the plain shrink scaled by 1/(1 + 2 mu eps).  No closed form is
    claimed for the nuclear family, so eps > 0 rejects it.
    """
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    family = NormFamily(family)
    if eps == 0:
        return shrink_norm(x, mu, family, payload)
    if family == NormFamily.L1NUC:
        raise UnsupportedNormError("no closed-form regularized prox for the nuclear family")
    return shrink_norm(x, mu, family, payload) / (1.0 + 2.0 * mu * eps)


def norm_value(x: np.ndarray, family, payload: PayloadSpec) -> np.ndarray:
    """Norm of each payload in a batch; shape = leading (pixel) axes."""
    family = NormFamily(family)
    validate_norm(family, payload)
    x = np.asarray(x)
    axes = _payload_axes(payload, x.ndim)
    if family == NormFamily.L2:
        return np.sqrt(_sumsq_over(x, axes))
    if family == NormFamily.L12:
        g = _group_axes(payload, x.ndim)
        row = np.sqrt(_sumsq_over(x, g, keepdims=True))
        return np.sum(row, axis=axes)
    if family == NormFamily.L1:
        return np.sum(np.abs(x), axis=axes)
    h = x if payload.role == "u" else -1j * np.asarray(x, dtype=np.complex128)
    sv = np.abs(np.linalg.eigvalsh(h))  # (..., blocks, k)
    return np.sum(sv, axis=(-2, -1))


def block_dual_norms(x: np.ndarray, family, payload: PayloadSpec) -> np.ndarray:
    """Dual norms of the individual shrink blocks, flattened per payload.

    Returns shape (batch..., num_blocks).  The payload dual norm is the
    max over blocks; the quadratic-regularized dual penalty sums over
    them.
    """
    family = NormFamily(family)
    validate_norm(family, payload)
    x = np.asarray(x)
    batch = x.shape[: x.ndim - payload.rank]
    if family == NormFamily.L2:
        return np.sqrt(_sumsq_over(x, _payload_axes(payload, x.ndim)))[..., None]
    if family == NormFamily.L12:
        g = _group_axes(payload, x.ndim)
        row = np.sqrt(_sumsq_over(x, g))
        return row.reshape(batch + (-1,))
    if family == NormFamily.L1:
        return np.abs(x).reshape(batch + (-1,))
    h = x if payload.role == "u" else -1j * np.asarray(x, dtype=np.complex128)
    spec = np.max(np.abs(np.linalg.eigvalsh(h)), axis=-1)
    return spec.reshape(batch + (-1,))


def dual_norm(x: np.ndarray, family, payload: PayloadSpec):
    """Dual norm of each payload: max over shrink blocks of the block dual."""
    out = np.max(block_dual_norms(x, family, payload), axis=-1)
    return float(out) if out.ndim == 0 else out
