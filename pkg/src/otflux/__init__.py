"""Wasserstein-1 mass transport for scalar-, vector- and matrix-valued
densities on 2D grids, solved with primal-dual (PDHG) iterations."""

from .errors import (
    DimensionMismatchError,
    NumericalError,
    OTFluxError,
    UnsupportedNormError,
    ValidationError,
)
from .fields import (
    FluxField,
    GraphFlux,
    GridSpec,
    MatrixDensity,
    QuantumFlux,
    ScalarDensity,
    VectorDensity,
    hermitian_part,
    hs_inner,
    normalize,
    read_density,
    read_omtf,
    skew_part,
    total_mass,
    write_omtf,
)
from .graph import (
    TransportGraph,
    build_incidence,
    div_graph,
    grad_graph,
    lambda_max_graph,
    laplacian,
    load_graph,
    save_graph,
    triangle_graph,
)
from .lindblad import (
    LindbladSet,
    check_kernel,
    default_lindblad3,
    div_L,
    grad_L,
    hermitian_basis,
    lambda_max_L,
    load_lindblad,
    operator_matrix,
    save_lindblad,
)
from .lp import lp_oracle
from .problems import (
    BlobSpec,
    BumpSpec,
    DiskSpec,
    dirac_pair,
    gen_matrix_blobs,
    gen_rgb_disks,
    gen_scalar_gaussians,
    load_scene,
    matrix_blob_fixtures,
    rgb_disk_pair,
)
from .shrink import (
    NormFamily,
    PayloadSpec,
    dual_norm,
    norm_value,
    shrink1,
    shrink2,
    shrink_norm,
    shrink_nuc,
    shrink_regularized,
)
from .solver import (
    SolveReport,
    SolverConfig,
    SolverState,
    duality_gap,
    residual_Rk,
    solve_matrix,
    solve_scalar,
    solve_vector,
    step_sizes_matrix,
    step_sizes_scalar,
    step_sizes_vector,
)
from .spatial import div_x, grad_x, lambda_max_spatial_bound

__version__ = "0.1.0"
