"""Staggered-grid spatial gradient and divergence with ghost cells.

Forward differences with flux samples at cell faces; the ghost row of ux
and ghost column of uy are stored (arrays stay n x n) and pinned to zero
so all kernels are branch-free.  With this convention the discrete
gradient is the exact negative transpose of the divergence, which is the
discrete form of the zero-flux boundary condition.

Operators apply payload-wise: trailing axes of phi/ux/uy (channels or
matrix entries) are carried through untouched.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .fields import FluxField, GridSpec


def _grad(phi: np.ndarray, inv_dx: float):
    """Forward-difference gradient; ghost entries left at zero."""
    gx = np.zeros_like(phi)
    gy = np.zeros_like(phi)
    gx[:-1] = (phi[1:] - phi[:-1]) * inv_dx
    gy[:, :-1] = (phi[:, 1:] - phi[:, :-1]) * inv_dx
    return gx, gy


def _div(ux: np.ndarray, uy: np.ndarray, inv_dx: float) -> np.ndarray:
    """Backward-difference divergence; out-of-range samples are zero."""
    d = ux.copy()
    d[1:] -= ux[:-1]
    d += uy
    d[:, 1:] -= uy[:, :-1]
    d *= inv_dx
    return d


def grad_x(phi: np.ndarray, grid: GridSpec) -> FluxField:
    """Spatial gradient of a cell-centered field, returned as a flux field.

    phi has shape (n, n, *payload); the result carries the same payload.
    """
    phi = np.asarray(phi)
    if phi.shape[0] != grid.n or phi.shape[1] != grid.n:
        raise ValidationError(f"phi shape {phi.shape} does not match grid n={grid.n}")
    gx, gy = _grad(phi, 1.0 / grid.dx)
    return FluxField(gx, gy)


def div_x(u, grid: GridSpec) -> np.ndarray:
    """Divergence of a staggered flux onto cell centers.

    Accepts a FluxField or an (ux, uy) pair.  Raises if the ghost
    entries are not exactly zero (contract violation).
    """
    if isinstance(u, FluxField):
        ux, uy = u.ux, u.uy
    else:
        ux, uy = u
        ux = np.asarray(ux)
        uy = np.asarray(uy)
    if ux.shape[0] != grid.n or ux.shape != uy.shape:
        raise ValidationError(f"flux shapes {ux.shape}/{uy.shape} do not match grid n={grid.n}")
    if np.any(ux[-1, :] != 0) or np.any(uy[:, -1] != 0):
        raise ValidationError("div_x: nonzero ghost entries")
    return _div(ux, uy, 1.0 / grid.dx)


def lambda_max_spatial_bound(grid: GridSpec) -> float:
    """Upper bound 8(n-1)^2 on the largest eigenvalue of -div_x grad_x."""
    return 8.0 * (grid.n - 1) ** 2


# Stacked-direction kernels used by the solver hot loop: u has shape
# (n, n, 2, *payload) with axis 2 = (x, y).  No validation.


def _grad_stack(phi: np.ndarray, inv_dx: float) -> np.ndarray:
    g = np.empty(phi.shape[:2] + (2,) + phi.shape[2:], dtype=phi.dtype)
    g[:-1, :, 0] = (phi[1:] - phi[:-1]) * inv_dx
    g[-1, :, 0] = 0.0
    g[:, :-1, 1] = (phi[:, 1:] - phi[:, :-1]) * inv_dx
    g[:, -1, 1] = 0.0
    return g


def _div_stack(u: np.ndarray, inv_dx: float) -> np.ndarray:
    return _div(u[:, :, 0], u[:, :, 1], inv_dx)
