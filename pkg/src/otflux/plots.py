"""Figure rendering for the CLI report paths.

Every renderer writes a PNG next to the delimited data outputs; all use
the Agg backend so they work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fields import MatrixDensity, VectorDensity


def render_density(path, density, title: str | None = None) -> None:
    """Heatmap of a density: scalar as grayscale, 3-channel as RGB,
    matrix fields as their trace."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if isinstance(density, VectorDensity) and density.k == 3:
        img = density.values / max(density.values.max(), 1e-30)
        # axis 0 is x: transpose so x runs along the figure's horizontal
        ax.imshow(np.transpose(img, (1, 0, 2)), origin="lower", extent=(0, 1, 0, 1))
    else:
        if isinstance(density, MatrixDensity):
            img = density.trace_field()
        elif isinstance(density, VectorDensity):
            img = density.values.sum(axis=2)
        else:
            img = density.values
        im = ax.imshow(img.T, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
        fig.colorbar(im, ax=ax, shrink=0.85)
    if title:
        ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_quiver(path, grid, ux: np.ndarray, uy: np.ndarray, title: str | None = None,
                  max_arrows: int = 32) -> None:
    """Arrow plot of a (possibly multi-channel) spatial flux.

    Channels are summed; matrix payloads enter through their trace.
    Large grids are subsampled to at most max_arrows per side.
    """
    fx, fy = np.asarray(ux), np.asarray(uy)
    while fx.ndim > 2:  # collapse payload axes
        if fx.ndim >= 4 and fx.shape[-1] == fx.shape[-2]:
            fx = np.real(np.trace(fx, axis1=-2, axis2=-1))
            fy = np.real(np.trace(fy, axis1=-2, axis2=-1))
        else:
            fx = np.real(fx).sum(axis=-1)
            fy = np.real(fy).sum(axis=-1)
    n = fx.shape[0]
    step = max(1, n // max_arrows)
    coords = grid.coords()[::step]
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    sx, sy = fx[::step, ::step], fy[::step, ::step]
    amax = float(max(np.abs(sx).max(), np.abs(sy).max(), 1e-30))
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.quiver(X, Y, sx, sy, angles="xy", scale_units="xy",
              scale=amax * max_arrows)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_convergence(path, history, title: str | None = None) -> None:
    """Gap ratio and feasibility residual versus iteration, log scale."""
    its = [h.iteration for h in history]
    gaps = [max(h.gap_ratio, 1e-16) for h in history]
    feas = [max(h.feas_residual, 1e-16) for h in history]
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.semilogy(its, gaps, label="duality gap ratio")
    ax.semilogy(its, feas, label="constraint residual")
    ax.set_xlabel("iteration")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_bench(path, rows, title: str | None = None) -> None:
    """Iteration counts and transport values across grid sizes."""
    sizes = [r["n"] for r in rows]
    iters = [r["iterations"] for r in rows]
    values = [r["transport_value"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.5, 3.6))
    ax1.plot(sizes, iters, "o-")
    ax1.set_xlabel("grid size n")
    ax1.set_ylabel("iterations")
    ax1.grid(True, alpha=0.3)
    ax2.plot(sizes, values, "s-")
    ax2.set_xlabel("grid size n")
    ax2.set_ylabel("transport value")
    ax2.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_alpha_sweep(path, alphas, columns: dict, title: str | None = None) -> None:
    """Distance columns versus the channel-cost weight alpha, log-log."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for label, vals in columns.items():
        ax.loglog(alphas, vals, "o-", label=label)
    ax.set_xlabel("alpha")
    ax.set_ylabel("distance")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
