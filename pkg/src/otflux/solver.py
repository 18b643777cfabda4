"""Primal-dual solvers for scalar, vector and matrix mass transport.

All three solvers run the same PDHG (Chambolle-Pock) scheme on the
saddle problem

    min_{u,w} max_phi  sum ||u_ij||_u + alpha ||w_ij||_w
                       + <phi, div_x(u) + div_c(w) - (lambda0 - lambda1)>

where div_c is the channel divergence (graph or commutator based;
absent for scalar transport).  One iteration is a shrink step on u, a
shrink step on w, and a gradient ascent step on phi against the
over-relaxed fluxes 2u' - u and 2w' - w.  Per-pixel updates are
independent whole-array kernels, so the iteration is deterministic for
any BLAS thread count.

Termination requires both a small duality gap ratio and a small
constraint residual: the primal iterate is infeasible mid-run, so the
gap alone certifies nothing.  Dual feasibility is restored by scaling
phi down by the worst dual-norm violation.  With quadratic
regularization (eps_reg > 0) the dual is instead evaluated against the
regularized conjugate, which penalizes dual-norm violations smoothly
and needs no scaling.

The fixed-point residual R^k of the underlying proximal-point mapping
is recorded at every convergence check; it is nonnegative under the
step-size condition and decreases monotonically, which makes it a
useful health signal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedNormError, ValidationError
from .fields import (
    FluxField,
    GraphFlux,
    GridSpec,
    MatrixDensity,
    QuantumFlux,
    ScalarDensity,
    VectorDensity,
    total_mass,
)
from .graph import TransportGraph, div_graph, grad_graph, lambda_max_graph
from .lindblad import LindbladSet, div_L, grad_L, lambda_max_L
from .shrink import (
    NormFamily,
    PayloadSpec,
    _sumsq_over,
    block_dual_norms,
    norm_value,
    shrink_norm,
    shrink_regularized,
    validate_norm,
)
from .spatial import _div_stack, _grad_stack

_TINY = np.finfo(np.float64).tiny
MASS_MISMATCH_TOL = 1e-9


def default_tau(n: int) -> float:
    """Default dual step: 1 on coarse grids, 3 from 128 upward."""
    return 1.0 if n <= 64 else 3.0


def step_sizes_scalar(grid: GridSpec, tau: float):
    """mu = 1/(16 tau (n-1)^2); tau*mu*8(n-1)^2 = 1/2 for any tau."""
    if tau <= 0:
        raise ValidationError("tau must be positive")
    mu = 1.0 / (16.0 * tau * (grid.n - 1) ** 2)
    return mu, tau


def step_sizes_vector(grid: GridSpec, graph: TransportGraph, tau: float):
    """mu = 1/(32 tau (n-1)^2), nu = 1/(4 tau lambda_max); sum of bounds = 1/2."""
    if tau <= 0:
        raise ValidationError("tau must be positive")
    mu = 1.0 / (32.0 * tau * (grid.n - 1) ** 2)
    nu = 1.0 / (4.0 * tau * lambda_max_graph(graph))
    return mu, nu, tau


def step_sizes_matrix(grid: GridSpec, lindblad: LindbladSet, tau: float):
    """Same rule as the vector case with the commutator operator bound."""
    if tau <= 0:
        raise ValidationError("tau must be positive")
    mu = 1.0 / (32.0 * tau * (grid.n - 1) ** 2)
    nu = 1.0 / (4.0 * tau * lambda_max_L(lindblad))
    return mu, nu, tau


@dataclass
class SolverConfig:
    """Step sizes, norms and termination thresholds for one solve.

    tau = None picks default_tau for the grid.  tol_gap bounds the
    duality-gap ratio, tol_feas the constraint residual relative to
    ||lambda0 - lambda1||.  eps_reg > 0 adds the quadratic term
    eps*(||u||^2 + ||w||^2) to the objective (separable norm families
    only).
    """

    tau: float | None = None
    tol_gap: float = 1e-3
    tol_feas: float = 1e-5
    max_iters: int = 200_000
    alpha: float = 1.0
    norm_u: NormFamily = NormFamily.L2
    norm_w: NormFamily = NormFamily.L1
    eps_reg: float = 0.0
    check_every: int = 100

    def __post_init__(self):
        self.norm_u = NormFamily(self.norm_u)
        self.norm_w = NormFamily(self.norm_w)
        if self.tau is not None and self.tau <= 0:
            raise ValidationError("tau must be positive")
        if self.tol_gap <= 0 or self.tol_feas <= 0:
            raise ValidationError("tolerances must be positive")
        if self.max_iters < 1 or self.check_every < 1:
            raise ValidationError("max_iters and check_every must be >= 1")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")
        if self.eps_reg < 0:
            raise ValidationError("eps_reg must be nonnegative")


@dataclass
class HistoryPoint:
    iteration: int
    primal: float
    dual: float
    gap_ratio: float
    feas_residual: float
    residual: float  # NaN for the pre-iteration record


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    transport_value: float
    history: list[HistoryPoint] = field(default_factory=list)
    wall_time: float = 0.0


@dataclass
class SolverState:
    """Final iterate of a solve: fluxes, dual potential, and metrics."""

    u: FluxField
    w: GraphFlux | QuantumFlux | None
    phi: np.ndarray
    iteration: int
    residual: float
    primal_value: float
    dual_value: float
    gap_ratio: float
    feas_residual: float


def _sumsq(x: np.ndarray) -> float:
    return float(_sumsq_over(x, tuple(range(x.ndim))))


def _re_inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.sum(a * np.conj(b))))


class _Engine:
    """Shared iteration core; the three public solvers differ only in
    the channel operators and payload descriptors they plug in."""

    def __init__(self, grid, diff, payload_u, payload_w, cfg,
                 channel_grad=None, channel_div=None, w_shape=None, dtype=np.float64):
        n = grid.n
        self.grid = grid
        self.inv_dx = 1.0 / grid.dx
        self.diff = diff  # lambda0 - lambda1, cell values
        self.diff_norm = float(np.sqrt(_sumsq(diff)))
        self.payload_u = payload_u
        self.payload_w = payload_w
        self.cfg = cfg
        self.alpha = cfg.alpha
        self.eps = cfg.eps_reg
        self.channel_grad = channel_grad
        self.channel_div = channel_div
        pshape = diff.shape[2:]
        self.u = np.zeros((n, n, 2) + pshape, dtype=dtype)
        self.w = None if w_shape is None else np.zeros(w_shape, dtype=dtype)
        self.phi = np.zeros((n, n) + pshape, dtype=dtype)
        tau = cfg.tau if cfg.tau is not None else default_tau(n)
        self.tau = tau
        self.mu = 1.0 / ((16.0 if w_shape is None else 32.0) * tau * (n - 1) ** 2)
        self.nu = None
        self.lambda_max_channel = None

    def set_channel_bound(self, lam: float):
        self.lambda_max_channel = lam
        self.nu = 1.0 / (4.0 * self.tau * lam)

    def _shrink_u(self, x):
        if self.eps > 0:
            return shrink_regularized(x, self.mu, self.eps, self.cfg.norm_u, self.payload_u)
        return shrink_norm(x, self.mu, self.cfg.norm_u, self.payload_u)

    def _shrink_w(self, x):
        thresh = self.alpha * self.nu
        if self.eps > 0:
            return shrink_regularized(
                x, thresh, self.eps / self.alpha, self.cfg.norm_w, self.payload_w
            )
        return shrink_norm(x, thresh, self.cfg.norm_w, self.payload_w)

    def step(self):
        arg = _grad_stack(self.phi, self.inv_dx)
        arg *= self.mu
        arg += self.u
        u_new = self._shrink_u(arg)
        over_u = u_new + u_new
        over_u -= self.u
        self.u = u_new
        rhs = _div_stack(over_u, self.inv_dx)
        rhs -= self.diff
        if self.w is not None:
            warg = self.channel_grad(self.phi)
            warg *= self.nu
            warg += self.w
            w_new = self._shrink_w(warg)
            over_w = w_new + w_new
            over_w -= self.w
            rhs += self.channel_div(over_w)
            self.w = w_new
        rhs *= self.tau
        self.phi = self.phi + rhs

    def constraint_residual(self) -> float:
        con = _div_stack(self.u, self.inv_dx) - self.diff
        if self.w is not None:
            con += self.channel_div(self.w)
        return float(np.sqrt(_sumsq(con)) / max(self.diff_norm, _TINY))

    def primal_value(self) -> float:
        p = float(np.sum(norm_value(self.u, self.cfg.norm_u, self.payload_u)))
        if self.w is not None:
            p += self.alpha * float(np.sum(norm_value(self.w, self.cfg.norm_w, self.payload_w)))
        if self.eps > 0:
            p += self.eps * _sumsq(self.u)
            if self.w is not None:
                p += self.eps * _sumsq(self.w)
        return p

    def dual_value(self) -> float:
        raw = -_re_inner(self.phi, self.diff)  # <phi, lambda1 - lambda0>
        gu = block_dual_norms(
            _grad_stack(self.phi, self.inv_dx), self.cfg.norm_u, self.payload_u
        )
        gw = None
        if self.w is not None:
            gw = block_dual_norms(self.channel_grad(self.phi), self.cfg.norm_w, self.payload_w)
        if self.eps == 0:
            s = max(1.0, float(gu.max(initial=0.0)))
            if gw is not None:
                s = max(s, float(gw.max(initial=0.0)) / self.alpha)
            return raw / s
        pen = float(np.sum(np.maximum(gu - 1.0, 0.0) ** 2)) / (4.0 * self.eps)
        if gw is not None:
            pen += float(np.sum(np.maximum(gw - self.alpha, 0.0) ** 2)) / (4.0 * self.eps)
        return raw - pen

    def evaluate(self):
        primal = self.primal_value()
        dual = self.dual_value()
        gap_ratio = (primal - dual) / max(primal, 1e-30)
        return primal, dual, gap_ratio, self.constraint_residual()

    def residual_from(self, u_old, w_old, phi_old) -> float:
        du = self.u - u_old
        dphi = self.phi - phi_old
        r = _sumsq(du) / self.mu + _sumsq(dphi) / self.tau
        cross = _div_stack(du, self.inv_dx)
        if self.w is not None:
            dw = self.w - w_old
            r += _sumsq(dw) / self.nu
            cross += self.channel_div(dw)
        return r - 2.0 * _re_inner(dphi, cross)


def _run(engine: _Engine) -> tuple[SolveReport, SolverState]:
    cfg = engine.cfg
    t0 = time.perf_counter()
    history: list[HistoryPoint] = []
    primal, dual, gap, feas = engine.evaluate()
    rk = float("nan")
    history.append(HistoryPoint(0, primal, dual, gap, feas, rk))
    converged = gap <= cfg.tol_gap and feas <= cfg.tol_feas
    it = 0
    while not converged and it < cfg.max_iters:
        check = ((it + 1) % cfg.check_every == 0) or (it + 1 == cfg.max_iters)
        if check:
            u_old = engine.u.copy()
            w_old = engine.w.copy() if engine.w is not None else None
            phi_old = engine.phi.copy()
        engine.step()
        it += 1
        if check:
            rk = engine.residual_from(u_old, w_old, phi_old)
            primal, dual, gap, feas = engine.evaluate()
            history.append(HistoryPoint(it, primal, dual, gap, feas, rk))
            converged = gap <= cfg.tol_gap and feas <= cfg.tol_feas
    wall = time.perf_counter() - t0
    report = SolveReport(converged, it, primal, history, wall)
    ux = np.ascontiguousarray(engine.u[:, :, 0])
    uy = np.ascontiguousarray(engine.u[:, :, 1])
    if engine.w is None:
        w_out = None
    elif engine.w.ndim == 3:
        w_out = GraphFlux(engine.w)
    else:
        w_out = QuantumFlux(engine.w)
    state = SolverState(
        u=FluxField(ux, uy),
        w=w_out,
        phi=engine.phi,
        iteration=it,
        residual=rk,
        primal_value=primal,
        dual_value=dual,
        gap_ratio=gap,
        feas_residual=feas,
    )
    return report, state


def _check_pair(l0, l1, grid, kind):
    if type(l0) is not type(l1):
        raise ValidationError(f"marginals must share a type, got {type(l0)}/{type(l1)}")
    if l0.values.shape != l1.values.shape:
        raise ValidationError(
            f"marginal shapes differ: {l0.values.shape} vs {l1.values.shape}"
        )
    if grid is None:
        grid = GridSpec(l0.n)
    elif grid.n != l0.n:
        raise ValidationError(f"grid n={grid.n} does not match fields with n={l0.n}")
    m0, m1 = total_mass(l0), total_mass(l1)
    if abs(m0 - m1) > MASS_MISMATCH_TOL:
        raise ValidationError(
            f"mass mismatch |{m0:.12g} - {m1:.12g}| > {MASS_MISMATCH_TOL:g}: infeasible"
        )
    return grid


def solve_scalar(lambda0: ScalarDensity, lambda1: ScalarDensity,
                 grid: GridSpec | None = None, cfg: SolverConfig | None = None):
    """Transport distance between scalar densities; returns (report, state)."""
    cfg = cfg if cfg is not None else SolverConfig()
    grid = _check_pair(lambda0, lambda1, grid, "scalar")
    payload_u = PayloadSpec("scalar", "u")
    validate_norm(cfg.norm_u, payload_u)
    _reject_regularized_nuclear(cfg, payload_u)
    diff = lambda0.values - lambda1.values
    engine = _Engine(grid, diff, payload_u, None, cfg)
    return _run(engine)


def solve_vector(lambda0: VectorDensity, lambda1: VectorDensity, graph: TransportGraph,
                 grid: GridSpec | None = None, cfg: SolverConfig | None = None):
    """Transport distance between k-channel densities over a channel graph."""
    cfg = cfg if cfg is not None else SolverConfig()
    grid = _check_pair(lambda0, lambda1, grid, "vector")
    if graph.k != lambda0.k:
        raise ValidationError(f"graph has {graph.k} nodes but densities have k={lambda0.k}")
    payload_u = PayloadSpec("vector", "u")
    payload_w = PayloadSpec("vector", "w")
    validate_norm(cfg.norm_u, payload_u)
    validate_norm(cfg.norm_w, payload_w)
    _reject_regularized_nuclear(cfg, payload_u, payload_w)
    diff = lambda0.values - lambda1.values
    n = grid.n
    engine = _Engine(
        grid, diff, payload_u, payload_w, cfg,
        channel_grad=lambda phi: grad_graph(graph, phi),
        channel_div=lambda w: div_graph(graph, w),
        w_shape=(n, n, graph.num_edges),
    )
    engine.set_channel_bound(lambda_max_graph(graph))
    return _run(engine)


def solve_matrix(Lambda0: MatrixDensity, Lambda1: MatrixDensity, lindblad: LindbladSet,
                 grid: GridSpec | None = None, cfg: SolverConfig | None = None):
    """Transport distance between Hermitian-PSD matrix densities."""
    cfg = cfg if cfg is not None else SolverConfig()
    grid = _check_pair(Lambda0, Lambda1, grid, "matrix")
    if lindblad.k != Lambda0.k:
        raise ValidationError(
            f"matrix set has dim {lindblad.k} but densities have k={Lambda0.k}"
        )
    payload_u = PayloadSpec("matrix", "u")
    payload_w = PayloadSpec("matrix", "w")
    validate_norm(cfg.norm_u, payload_u)
    validate_norm(cfg.norm_w, payload_w)
    _reject_regularized_nuclear(cfg, payload_u, payload_w)
    diff = Lambda0.values - Lambda1.values
    n, k = grid.n, lindblad.k
    # real-symmetric data runs in real arithmetic (identical to the complex
    # path up to rounding, about twice as fast); nuclear shrinks go through
    # a complex rotation, so they keep the complex path
    use_real = (
        NormFamily.L1NUC not in (cfg.norm_u, cfg.norm_w)
        and not np.any(diff.imag)
        and not np.any(lindblad.matrices.imag)
    )
    if use_real:
        diff = np.ascontiguousarray(diff.real)
        mats = np.ascontiguousarray(lindblad.matrices.real)
        dtype = np.float64
    else:
        mats = lindblad.matrices
        dtype = np.complex128
    engine = _Engine(
        grid, diff, payload_u, payload_w, cfg,
        channel_grad=lambda phi: grad_L(mats, phi),
        channel_div=lambda w: div_L(mats, w),
        w_shape=(n, n, lindblad.ell, k, k),
        dtype=dtype,
    )
    engine.set_channel_bound(lambda_max_L(lindblad))
    return _run(engine)


def _reject_regularized_nuclear(cfg, *payloads):
    if cfg.eps_reg > 0 and NormFamily.L1NUC in (cfg.norm_u, cfg.norm_w):
        raise UnsupportedNormError(
            "eps_reg > 0 has no closed-form prox for the nuclear family"
        )


# ---------------------------------------------------------------------------
# Standalone metric helpers (the engine uses the same code paths)
# ---------------------------------------------------------------------------


def _engine_for(kind, l0, l1, cfg, grid=None, graph=None, lindblad=None) -> _Engine:
    grid = _check_pair(l0, l1, grid, kind)
    diff = l0.values - l1.values
    if kind == "scalar":
        return _Engine(grid, diff, PayloadSpec("scalar", "u"), None, cfg)
    if kind == "vector":
        n = grid.n
        eng = _Engine(
            grid, diff, PayloadSpec("vector", "u"), PayloadSpec("vector", "w"), cfg,
            channel_grad=lambda phi: grad_graph(graph, phi),
            channel_div=lambda w: div_graph(graph, w),
            w_shape=(n, n, graph.num_edges),
        )
        eng.set_channel_bound(lambda_max_graph(graph))
        return eng
    n, k = grid.n, lindblad.k
    eng = _Engine(
        grid, diff, PayloadSpec("matrix", "u"), PayloadSpec("matrix", "w"), cfg,
        channel_grad=lambda phi: grad_L(lindblad, phi),
        channel_div=lambda w: div_L(lindblad, w),
        w_shape=(n, n, lindblad.ell, k, k),
        dtype=np.complex128,
    )
    eng.set_channel_bound(lambda_max_L(lindblad))
    return eng


def _load_state(engine: _Engine, state: SolverState) -> None:
    engine.u = np.stack([state.u.ux, state.u.uy], axis=2)
    if state.w is not None:
        engine.w = state.w.values
    engine.phi = state.phi


def duality_gap(state: SolverState, lambda0, lambda1, cfg: SolverConfig,
                graph: TransportGraph | None = None,
                lindblad: LindbladSet | None = None):
    """(primal, dual, gap_ratio, feas_residual) for an arbitrary state.

    The dual value uses the feasibility-rescaled potential (or the
    regularized conjugate when eps_reg > 0), so it is a true lower bound
    on the optimum.
    """
    kind = {ScalarDensity: "scalar", VectorDensity: "vector", MatrixDensity: "matrix"}[
        type(lambda0)
    ]
    engine = _engine_for(kind, lambda0, lambda1, cfg, graph=graph, lindblad=lindblad)
    _load_state(engine, state)
    return engine.evaluate()


def residual_Rk(state_prev: SolverState, state_next: SolverState,
                mu: float, nu: float | None, tau: float,
                grid: GridSpec | None = None,
                graph: TransportGraph | None = None,
                lindblad: LindbladSet | None = None) -> float:
    """Fixed-point residual between consecutive iterates.

    R = ||du||^2/mu + ||dw||^2/nu + ||dphi||^2/tau
        - 2 <dphi, div_x(du) + div_c(dw)>;
    nonnegative whenever the step sizes satisfy the convergence bound.
    """
    if grid is None:
        grid = GridSpec(state_next.u.n)
    inv_dx = 1.0 / grid.dx
    du = np.stack([state_next.u.ux - state_prev.u.ux,
                   state_next.u.uy - state_prev.u.uy], axis=2)
    dphi = state_next.phi - state_prev.phi
    r = _sumsq(du) / mu + _sumsq(dphi) / tau
    cross = _div_stack(du, inv_dx)
    if state_next.w is not None:
        if nu is None:
            raise ValidationError("nu is required when a channel flux is present")
        dw = state_next.w.values - state_prev.w.values
        r += _sumsq(dw) / nu
        cross += div_graph(graph, dw) if graph is not None else div_L(lindblad, dw)
    return r - 2.0 * _re_inner(dphi, cross)
