"""Command-line front end.

Subcommands load problem data, run the solvers, and write metrics JSON,
flux dumps, quiver CSV, and benchmark tables; every tabular output can
also be rendered to PNG figures with --figures.  Exit codes: 0 success,
1 non-convergence, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import sys
import time
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import plots
from .errors import NumericalError, ValidationError
from .fields import (
    KIND_MATRIX_COMPLEX,
    KIND_MATRIX_REAL,
    KIND_SCALAR,
    KIND_VECTOR,
    OMTF_MAGIC,
    GridSpec,
    MatrixDensity,
    ScalarDensity,
    VectorDensity,
    read_density,
    write_omtf,
)
from .graph import lambda_max_graph, laplacian, load_graph, triangle_graph
from .lindblad import default_lindblad3, load_lindblad
from .problems import load_scene, matrix_blob_fixtures, rgb_disk_pair
from .solver import (
    SolverConfig,
    default_tau,
    solve_matrix,
    solve_scalar,
    solve_vector,
)

METRICS_FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _thread_limit(threads):
    """Limit BLAS pools for the duration of a solve; results do not
    depend on the setting (kernels are reduction-free), only timing."""
    if threads is None:
        env = os.environ.get("OMT_THREADS")
        threads = int(env) if env else None
    if threads is None:
        import contextlib

        return None, contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits

        return threads, threadpool_limits(limits=threads)
    except ImportError:  # pragma: no cover
        import contextlib

        return threads, contextlib.nullcontext()


def _write_flux_raw(path, ux: np.ndarray, uy: np.ndarray, kind_hint: str) -> None:
    """Dump staggered flux components in OMTF layout (one file per axis,
    suffixes .ux.omtf/.uy.omtf).  Fluxes are signed, so these files are
    raw arrays in OMTF framing rather than density fields."""
    base = Path(path)
    for suffix, arr in ((".ux.omtf", ux), (".uy.omtf", uy)):
        if kind_hint == "scalar":
            kind, k, payload = KIND_SCALAR, 1, arr
        elif kind_hint == "vector":
            kind, k, payload = KIND_VECTOR, arr.shape[-1], arr
        else:
            k = arr.shape[-1]
            if np.all(np.asarray(arr).imag == 0):
                kind, payload = KIND_MATRIX_REAL, np.asarray(arr).real
            else:
                kind, payload = KIND_MATRIX_COMPLEX, np.stack(
                    [np.asarray(arr).real, np.asarray(arr).imag], axis=-1
                )
        with open(base.with_suffix(base.suffix + suffix) if base.suffix else
                  base.parent / (base.name + suffix), "wb") as fh:
            fh.write(OMTF_MAGIC)
            fh.write(struct.pack("<III", kind, arr.shape[0], k))
            fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def _write_quiver_csv(path, grid: GridSpec, ux: np.ndarray, uy: np.ndarray) -> None:
    """Long-format quiver data: i, j, x, y, channel, ux, uy.

    Vector fluxes get one row per channel; matrix fluxes are reported
    through their per-direction trace (channel = "trace")."""
    coords = grid.coords()
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i", "j", "x", "y", "channel", "ux", "uy"])
        if ux.ndim == 2:
            chans = [("0", ux, uy)]
        elif ux.ndim == 3:
            chans = [(str(c), ux[:, :, c], uy[:, :, c]) for c in range(ux.shape[2])]
        else:
            chans = [(
                "trace",
                np.real(np.trace(ux, axis1=-2, axis2=-1)),
                np.real(np.trace(uy, axis1=-2, axis2=-1)),
            )]
        for name, fx, fy in chans:
            for i in range(grid.n):
                for j in range(grid.n):
                    wr.writerow([i, j, f"{coords[i]:.10g}", f"{coords[j]:.10g}",
                                 name, f"{fx[i, j]:.12g}", f"{fy[i, j]:.12g}"])


def _metrics_payload(kind, report, state, cfg, tau, inputs, threads):
    config = asdict(cfg)
    config["tau"] = tau
    config["norm_u"] = str(cfg.norm_u.value)
    config["norm_w"] = str(cfg.norm_w.value)
    per_iter = report.wall_time / report.iterations if report.iterations else 0.0
    return {
        "format_version": METRICS_FORMAT_VERSION,
        "kind": kind,
        "converged": report.converged,
        "iterations": report.iterations,
        "transport_value": report.transport_value,
        "gap_ratio": state.gap_ratio,
        "feas_residual": state.feas_residual,
        "config": config,
        "inputs": inputs,
        "threads": threads,
        "timing": {"wall_time_s": report.wall_time, "time_per_iter_s": per_iter},
    }


@click.group()
def main():
    """Wasserstein-1 transport between scalar-, vector- and matrix-valued
    densities on 2D grids."""


@main.command()
@click.argument("kind", type=click.Choice(["scalar", "vector", "matrix"]))
@click.option("--lambda0", "lambda0_path", required=True, type=click.Path())
@click.option("--lambda1", "lambda1_path", required=True, type=click.Path())
@click.option("--graph", "graph_path", type=click.Path(), help="channel graph JSON (vector)")
@click.option("--lindblad", "lindblad_path", type=click.Path(), help="matrix-set JSON (matrix)")
@click.option("--alpha", default=1.0, show_default=True)
@click.option("--norm-u", type=click.Choice(["l2", "l12", "l1", "l1nuc"]), default="l2",
              show_default=True)
@click.option("--norm-w", type=click.Choice(["l2", "l1", "l1nuc"]), default="l1",
              show_default=True)
@click.option("--tau", type=float, default=None, help="dual step (default: by grid size)")
@click.option("--tol", default=1e-3, show_default=True, help="duality-gap ratio tolerance")
@click.option("--tol-feas", default=1e-5, show_default=True, help="constraint residual tolerance")
@click.option("--max-iters", default=200_000, show_default=True)
@click.option("--threads", type=int, default=None, help="BLAS thread cap (env OMT_THREADS)")
@click.option("--eps-reg", default=0.0, show_default=True, help="quadratic regularization")
@click.option("--check-every", default=100, show_default=True)
@click.option("--out-metrics", type=click.Path(), help="metrics JSON path")
@click.option("--out-flux", type=click.Path(), help="flux dump path prefix")
@click.option("--out-quiver", type=click.Path(), help="quiver CSV path")
@click.option("--figures", type=click.Path(), help="directory for rendered PNG figures")
def solve(kind, lambda0_path, lambda1_path, graph_path, lindblad_path, alpha, norm_u,
          norm_w, tau, tol, tol_feas, max_iters, threads, eps_reg, check_every,
          out_metrics, out_flux, out_quiver, figures):
    """Solve one transport problem and write the requested artifacts."""
    for p in filter(None, [lambda0_path, lambda1_path, graph_path, lindblad_path]):
        if not Path(p).exists():
            _fail(EXIT_INPUT, f"input file not found: {p}")
    try:
        l0 = read_density(lambda0_path)
        l1 = read_density(lambda1_path)
        graph = load_graph(graph_path) if graph_path else None
        lindblad = load_lindblad(lindblad_path) if lindblad_path else None
        cfg = SolverConfig(tau=tau, tol_gap=tol, tol_feas=tol_feas, max_iters=max_iters,
                           alpha=alpha, norm_u=norm_u, norm_w=norm_w, eps_reg=eps_reg,
                           check_every=check_every)
        threads, limiter = _thread_limit(threads)
        with limiter:
            if kind == "scalar":
                if not isinstance(l0, ScalarDensity):
                    raise ValidationError(f"{lambda0_path} is not a scalar field")
                report, state = solve_scalar(l0, l1, cfg=cfg)
            elif kind == "vector":
                if graph is None:
                    raise ValidationError("vector solves need --graph")
                if not isinstance(l0, VectorDensity):
                    raise ValidationError(f"{lambda0_path} is not a vector field")
                report, state = solve_vector(l0, l1, graph, cfg=cfg)
            else:
                if lindblad is None:
                    raise ValidationError("matrix solves need --lindblad")
                if not isinstance(l0, MatrixDensity):
                    raise ValidationError(f"{lambda0_path} is not a matrix field")
                report, state = solve_matrix(l0, l1, lindblad, cfg=cfg)
    except ValidationError as exc:
        _fail(EXIT_INPUT, str(exc))
    except NumericalError as exc:
        _fail(EXIT_NUMERICAL, str(exc))

    grid = GridSpec(l0.n)
    effective_tau = cfg.tau if cfg.tau is not None else default_tau(grid.n)
    inputs = {"lambda0": str(lambda0_path), "lambda1": str(lambda1_path)}
    if graph_path:
        inputs["graph"] = str(graph_path)
    if lindblad_path:
        inputs["lindblad"] = str(lindblad_path)
    metrics = _metrics_payload(kind, report, state, cfg, effective_tau, inputs, threads)
    if out_metrics:
        Path(out_metrics).write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    if out_flux:
        _write_flux_raw(out_flux, state.u.ux, state.u.uy, kind)
    if out_quiver:
        _write_quiver_csv(out_quiver, grid, state.u.ux, state.u.uy)
    if figures:
        figdir = Path(figures)
        figdir.mkdir(parents=True, exist_ok=True)
        plots.render_density(figdir / "lambda0.png", l0, title="source")
        plots.render_density(figdir / "lambda1.png", l1, title="target")
        plots.render_quiver(figdir / "flux.png", grid, state.u.ux, state.u.uy,
                            title=f"optimal flux (value {report.transport_value:.4g})")
        plots.render_convergence(figdir / "convergence.png", report.history)
    click.echo(
        f"{kind}: value={report.transport_value:.6g} iterations={report.iterations} "
        f"converged={report.converged} gap={state.gap_ratio:.3g} "
        f"feas={state.feas_residual:.3g}"
    )
    if not report.converged:
        sys.exit(EXIT_NOT_CONVERGED)


def _bench_tau(suite: str, n: int) -> float:
    """Per-suite dual steps tuned for the demo instances under the
    combined gap + feasibility termination."""
    if suite == "matrix":
        return 10.0 if n <= 64 else 30.0
    return 6.0


def _table2_tau(n: int) -> float:
    # the translated-blob solves converge fastest with a smaller dual step
    return 3.0 if n <= 64 else 30.0


@main.command()
@click.option("--suite", type=click.Choice(["vector", "matrix"]), required=True)
@click.option("--sizes", default="32,64", show_default=True, help="comma-separated grid sizes")
@click.option("--tau", type=float, default=None, help="dual step (default: tuned per suite)")
@click.option("--tol", default=1e-3, show_default=True)
@click.option("--max-iters", default=200_000, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(), help="CSV table path")
@click.option("--figures", type=click.Path(), help="directory for rendered PNG figures")
def bench(suite, sizes, tau, tol, max_iters, out_path, figures):
    """Run the demo instance across grid sizes; write the cost table."""
    tau_opt = tau
    try:
        size_list = [int(s) for s in sizes.split(",") if s.strip()]
        if not size_list:
            raise ValidationError("no grid sizes given")
        rows = []
        for n in size_list:
            grid = GridSpec(n)
            tau = tau_opt if tau_opt is not None else _bench_tau(suite, n)
            if suite == "vector":
                l0, l1 = rgb_disk_pair(grid)
                cfg = SolverConfig(tau=tau, tol_gap=tol, max_iters=max_iters,
                                   norm_u="l12", norm_w="l1")
                report, _ = solve_vector(l0, l1, triangle_graph(), cfg=cfg)
            else:
                m0, m1, _ = matrix_blob_fixtures(grid)
                cfg = SolverConfig(tau=tau, tol_gap=tol, max_iters=max_iters,
                                   norm_u="l2", norm_w="l1")
                report, _ = solve_matrix(m0, m1, default_lindblad3(), cfg=cfg)
            per_iter = report.wall_time / report.iterations if report.iterations else 0.0
            rows.append({
                "n": n,
                "iterations": report.iterations,
                "time_per_iter_s": per_iter,
                "total_time_s": report.wall_time,
                "tau": tau,
                "transport_value": report.transport_value,
            })
            click.echo(f"n={n}: value={report.transport_value:.6g} "
                       f"iterations={report.iterations} ({report.wall_time:.2f}s)")
    except ValidationError as exc:
        _fail(EXIT_INPUT, str(exc))
    except NumericalError as exc:
        _fail(EXIT_NUMERICAL, str(exc))
    with open(out_path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        wr.writeheader()
        wr.writerows(rows)
    if figures:
        figdir = Path(figures)
        figdir.mkdir(parents=True, exist_ok=True)
        plots.render_bench(figdir / f"bench_{suite}.png", rows,
                           title=f"{suite} suite")


@main.command()
@click.option("--alphas", default="0.1,0.3,1,3,10", show_default=True)
@click.option("--n", "n", default=32, show_default=True)
@click.option("--tau", type=float, default=None, help="dual step (default: tuned)")
@click.option("--tol", default=1e-3, show_default=True)
@click.option("--max-iters", default=200_000, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--figures", type=click.Path())
def table2(alphas, n, tau, tol, max_iters, out_path, figures):
    """Pairwise matrix-transport distances for a sweep of alpha."""
    try:
        alpha_list = [float(a) for a in alphas.split(",") if a.strip()]
        grid = GridSpec(n)
        m0, m1, m2 = matrix_blob_fixtures(grid)
        lind = default_lindblad3()
        rows = []
        for alpha in alpha_list:
            cfg = SolverConfig(tau=tau if tau is not None else _table2_tau(n),
                               tol_gap=tol, max_iters=max_iters, alpha=alpha,
                               norm_u="l2", norm_w="l1")
            vals = {}
            for label, (a, b) in (("M01", (m0, m1)), ("M02", (m0, m2)), ("M12", (m1, m2))):
                report, _ = solve_matrix(a, b, lind, cfg=cfg)
                vals[label] = report.transport_value
            rows.append({"alpha": alpha, **vals})
            click.echo(f"alpha={alpha}: M01={vals['M01']:.4g} "
                       f"M02={vals['M02']:.4g} M12={vals['M12']:.4g}")
    except ValidationError as exc:
        _fail(EXIT_INPUT, str(exc))
    except NumericalError as exc:
        _fail(EXIT_NUMERICAL, str(exc))
    with open(out_path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["alpha", "M01", "M02", "M12"])
        wr.writeheader()
        wr.writerows(rows)
    if figures:
        figdir = Path(figures)
        figdir.mkdir(parents=True, exist_ok=True)
        plots.render_alpha_sweep(
            figdir / "alpha_sweep.png",
            [r["alpha"] for r in rows],
            {c: [r[c] for r in rows] for c in ("M01", "M02", "M12")},
        )


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.option("--n", "n", default=64, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--figure", "figure_path", type=click.Path())
def gen(scene_path, n, out_path, figure_path):
    """Rasterize a JSON scene into an OMTF density file."""
    if not Path(scene_path).exists():
        _fail(EXIT_INPUT, f"input file not found: {scene_path}")
    try:
        density = load_scene(scene_path, GridSpec(n))
    except ValidationError as exc:
        _fail(EXIT_INPUT, str(exc))
    write_omtf(out_path, density)
    if figure_path:
        plots.render_density(figure_path, density)
    click.echo(f"wrote {out_path} (n={n})")


@main.command("graph-info")
@click.option("--graph", "graph_path", required=True, type=click.Path())
def graph_info(graph_path):
    """Print the incidence matrix, Laplacian and spectral bound of a graph."""
    if not Path(graph_path).exists():
        _fail(EXIT_INPUT, f"input file not found: {graph_path}")
    try:
        g = load_graph(graph_path)
    except ValidationError as exc:
        _fail(EXIT_INPUT, str(exc))
    np.set_printoptions(precision=6, suppress=True)
    click.echo(f"nodes: {g.k}, edges: {g.num_edges}")
    click.echo("incidence D:")
    click.echo(str(g.incidence))
    click.echo("laplacian:")
    click.echo(str(laplacian(g)))
    click.echo(f"lambda_max(-laplacian): {lambda_max_graph(g):.10g}")


if __name__ == "__main__":
    main()
