"""Finite-dimensional solver for divergence-form inclusions A^T a(A u) in f
with strongly monotone, possibly multi-valued coefficient relations."""

from .errors import (
    CapabilityError,
    ConfigError,
    ConstructionError,
    ConvergenceError,
    DomainError,
    InputError,
    OracleFailure,
)
from .hilbert_core import (
    LinearMap,
    RestrictedOperator,
    SobolevNormKind,
    Subspace,
    b_inverse,
    b_star_inverse,
    embedding_constant,
    kernel_basis,
    load_matrix_market,
    range_basis,
    restrict_operator,
    save_basis_columns,
    sobolev_norm,
)
from .operators import (
    BuiltOperator,
    OperatorSpec,
    build_operator,
    free_gradient_3d,
    negative_adjoint,
    operator_pair,
)
from .relations import (
    Clamp,
    GraphPoint,
    Linear,
    MonotonicityReport,
    Power,
    Relation,
    Relay,
    Sign,
    make_diagonal,
    make_linear,
    monotonicity_probe,
    projected_inverse,
)
from .solver import (
    EstimateReport,
    Problem,
    Solution,
    lipschitz_probe,
    solve,
    solve_dirichlet,
    solve_homogeneous,
    solve_neumann,
    verify_dirichlet_estimate,
    verify_neumann_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "BuiltOperator",
    "CapabilityError",
    "Clamp",
    "ConfigError",
    "ConstructionError",
    "ConvergenceError",
    "DomainError",
    "EstimateReport",
    "GraphPoint",
    "InputError",
    "Linear",
    "LinearMap",
    "MonotonicityReport",
    "OperatorSpec",
    "OracleFailure",
    "Power",
    "Problem",
    "Relation",
    "Relay",
    "RestrictedOperator",
    "Sign",
    "SobolevNormKind",
    "Solution",
    "Subspace",
    "b_inverse",
    "b_star_inverse",
    "build_operator",
    "embedding_constant",
    "free_gradient_3d",
    "kernel_basis",
    "lipschitz_probe",
    "load_matrix_market",
    "make_diagonal",
    "make_linear",
    "monotonicity_probe",
    "negative_adjoint",
    "operator_pair",
    "projected_inverse",
    "range_basis",
    "restrict_operator",
    "save_basis_columns",
    "sobolev_norm",
    "solve",
    "solve_dirichlet",
    "solve_homogeneous",
    "solve_neumann",
    "verify_dirichlet_estimate",
    "verify_neumann_estimate",
]
