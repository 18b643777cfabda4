"""Exact linear-programming oracle for elementwise-l1 transport problems.

For the l1 norm family the discrete primal is a plain LP: split every
flux variable into positive and negative parts, minimize their sum
(weighted by alpha for channel fluxes), subject to the per-cell, per-
channel balance div_x(u) + div_G(w) = lambda0 - lambda1.  This gives an
independent reference value for the iterative solvers on small grids.

Only interior face fluxes enter as variables; ghost samples are zero by
construction, which bakes in the no-flow boundary.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import NumericalError, UnsupportedNormError, ValidationError
from .fields import GridSpec, ScalarDensity, VectorDensity, total_mass
from .graph import TransportGraph
from .shrink import NormFamily

MAX_GRID = 12
MAX_CHANNELS = 3


def lp_oracle(lambda0, lambda1, grid: GridSpec | None = None,
              graph: TransportGraph | None = None, alpha: float = 1.0,
              norm_u=NormFamily.L1, norm_w=NormFamily.L1) -> float:
    """Optimal transport value by exact LP; l1 norms, small grids only."""
    if NormFamily(norm_u) != NormFamily.L1 or NormFamily(norm_w) != NormFamily.L1:
        raise UnsupportedNormError("the LP oracle supports only elementwise-l1 norms")
    if isinstance(lambda0, ScalarDensity):
        k = 1
        dens0 = lambda0.values[:, :, None]
        dens1 = lambda1.values[:, :, None]
        if graph is not None:
            raise ValidationError("scalar problems take no channel graph")
    elif isinstance(lambda0, VectorDensity):
        if graph is None:
            raise ValidationError("vector problems need a channel graph")
        k = lambda0.k
        if graph.k != k:
            raise ValidationError(f"graph has {graph.k} nodes, densities have k={k}")
        dens0 = lambda0.values
        dens1 = lambda1.values
    else:
        raise ValidationError(f"unsupported marginal type {type(lambda0).__name__}")
    n = lambda0.n
    if grid is None:
        grid = GridSpec(n)
    if n > MAX_GRID or k > MAX_CHANNELS:
        raise ValidationError(f"LP oracle limited to n <= {MAX_GRID}, k <= {MAX_CHANNELS}")
    if abs(total_mass(lambda0) - total_mass(lambda1)) > 1e-9:
        raise ValidationError("mass mismatch: infeasible")

    inv_dx = 1.0 / grid.dx
    nux = (n - 1) * n * k  # x-faces per channel, channel-major
    nuy = n * (n - 1) * k
    ell = graph.num_edges if graph is not None else 0
    nw = n * n * ell
    nvar = nux + nuy + nw

    def row_of(c, i, j):
        return (c * n + i) * n + j

    rows, cols, vals = [], [], []

    # ux[c, i, j], i in 0..n-2: +1/dx into cell (i, j), -1/dx into (i+1, j)
    v = 0
    for c in range(k):
        for i in range(n - 1):
            for j in range(n):
                rows += [row_of(c, i, j), row_of(c, i + 1, j)]
                cols += [v, v]
                vals += [inv_dx, -inv_dx]
                v += 1
    # uy[c, i, j], j in 0..n-2
    for c in range(k):
        for i in range(n):
            for j in range(n - 1):
                rows += [row_of(c, i, j), row_of(c, i, j + 1)]
                cols += [v, v]
                vals += [inv_dx, -inv_dx]
                v += 1
    # w[i, j, e]: div_G contributes -D[c, e]/cost[e] to channel c at the cell
    if graph is not None:
        D = graph.incidence
        for i in range(n):
            for j in range(n):
                for e in range(ell):
                    for c in (graph.edges[e][0], graph.edges[e][1]):
                        rows.append(row_of(c, i, j))
                        cols.append(v)
                        vals.append(-D[c, e] / graph.costs[e])
                    v += 1
    assert v == nvar

    A = sp.coo_matrix((vals, (rows, cols)), shape=(n * n * k, nvar)).tocsc()
    b = np.transpose(dens0 - dens1, (2, 0, 1)).ravel()

    cost = np.ones(nvar)
    cost[nux + nuy:] = alpha
    # sign-split: x = p - q with p, q >= 0
    A_eq = sp.hstack([A, -A], format="csc")
    c_obj = np.concatenate([cost, cost])
    res = linprog(c_obj, A_eq=A_eq, b_eq=b, bounds=(0, None), method="highs")
    if not res.success:
        raise NumericalError(f"LP solve failed: {res.message}")
    return float(res.fun)
