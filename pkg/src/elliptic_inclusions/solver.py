"""Solution pipelines for divergence-form inclusions A^T a(A u) in f.

The homogeneous pipeline factorizes the solution operator: pull the
right-hand side back through the invertible restriction's adjoint, invert
the relation on the range (directly, or composed with the range projection
through Douglas-Rachford), and push the result back through the
restriction.  Boundary-data problems reduce to the homogeneous one by
translating the relation; flux-data problems additionally rebuild the
right-hand side as a Riesz vector on the admissible test space.  Every
solve returns a certificate pair living on the relation's graph, plus the
residuals that certify it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, ConvergenceError, DomainError, InputError
from .hilbert_core import (
    LinearMap,
    RestrictedOperator,
    SobolevNormKind,
    Subspace,
    as_linear_map,
    b_inverse,
    b_star_inverse,
    embedding_constant,
    kernel_basis,
    restrict_operator,
    sobolev_norm,
)
from .relations import GraphPoint, LinearDescriptor, Relation, projected_inverse

HOMOGENEOUS = "homogeneous"
DIRICHLET = "dirichlet"
NEUMANN = "neumann"

_KINDS = (HOMOGENEOUS, DIRICHLET, NEUMANN)


def _as_operator(value) -> LinearMap:
    # accept BuiltOperator without importing it (duck-typed on .matrix)
    if hasattr(value, "matrix") and not isinstance(value, LinearMap):
        value = value.matrix
    return as_linear_map(value)


@dataclass
class Problem:
    """One inclusion to solve.

    ``A`` is the operator whose restriction drives the solve.  Boundary-data
    problems also carry the extension ``C`` and the ``inclusion`` subspace
    embedding A's domain into C's; flux-data problems carry the restriction
    the other way around (``C`` optional there, used for validation only).
    """

    kind: str
    A: LinearMap
    relation: Relation
    f: np.ndarray
    C: LinearMap | None = None
    inclusion: Subspace | None = None
    u0: np.ndarray | None = None
    tol: float = 1e-10
    lam: float | None = None
    max_iter: int = 100000

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InputError(f"unknown problem kind {self.kind!r}")
        self.A = _as_operator(self.A)
        if self.C is not None:
            self.C = _as_operator(self.C)
        self.f = np.asarray(self.f, dtype=float)
        if not np.all(np.isfinite(self.f)):
            raise InputError("right-hand side must be finite")
        if self.u0 is not None:
            self.u0 = np.asarray(self.u0, dtype=float)
        if not (self.tol > 0.0):
            raise InputError("tol must be positive")
        if self.f.shape != (self.A.cols,):
            raise InputError(
                f"f has shape {self.f.shape}, expected ({self.A.cols},)"
            )
        if self.kind == DIRICHLET:
            if self.C is None or self.inclusion is None:
                raise InputError("boundary-data problems need C and the inclusion")
            if self.inclusion.ambient_dim != self.C.cols:
                raise InputError("inclusion must live in the domain of C")
            if self.inclusion.dim != self.A.cols:
                raise InputError("inclusion dimension must match the domain of A")
            if self.relation.dim != self.C.rows:
                raise InputError("relation must live on the codomain of C")
        if self.kind == NEUMANN:
            if self.inclusion is None:
                raise InputError("flux-data problems need the inclusion subspace")
            if self.inclusion.ambient_dim != self.A.cols:
                raise InputError("inclusion must live in the domain of A")
            if self.relation.dim != self.A.rows:
                raise InputError("relation must live on the codomain of A")
            if self.u0 is not None and self.u0.shape != (self.A.rows,):
                raise InputError("u0 must live in the codomain of A")


@dataclass
class Solution:
    """Solution vector, graph certificate, and named diagnostics.

    ``w`` is the adjoint preimage of the right-hand side for homogeneous and
    boundary-data problems, and the flux vector for flux-data problems.
    Keys starting with ``residual_`` certify the solve (all bounded by
    10*tol on success); ``norm_`` entries are plain norms; ``report_``
    entries are informational and can be legitimately large.
    """

    u: np.ndarray
    certificate: GraphPoint
    w: np.ndarray
    diagnostics: dict = field(default_factory=dict)


@dataclass
class EstimateReport:
    """Two sides of a continuity bound plus the constants that built it."""

    lhs: float
    rhs: float
    constants: dict
    passed: bool


def _check_rhs(restricted: RestrictedOperator, f, tol):
    resid = restricted.ran_adj.membership_residual(f)
    if resid > tol * max(1.0, float(np.linalg.norm(f))):
        raise DomainError(
            f"right-hand side has a kernel component ({resid:.3e}); "
            "it does not define an admissible functional",
            code="rhs_not_in_H_minus_1",
        )


def _invert_on_range(restricted, relation, w, tol, lam, max_iter, dr_start):
    """Relation inversion composed with the range projection.

    Returns (g, v, point, iterations) with g in the range, (.,.) in the
    relation's own coordinates inside ``point``, and v the full-space
    certificate with range projection w.
    """
    m = restricted.full_map.rows
    if relation.dim == m:
        if restricted.ran.dim == m:
            g = relation.inverse(w)
            point = GraphPoint(g, w.copy(), relation.graph_residual(g, w), iterations=0)
            return g, w, point, 0
        point = projected_inverse(
            relation, restricted.ran, w,
            lam=lam, tol=tol, max_iter=max_iter, s0=dr_start,
        )
        return point.x, point.y, point, point.iterations
    if relation.dim == restricted.ran.dim:
        # relation declared directly in range coordinates
        omega = restricted.ran.basis.T @ w
        xc = relation.inverse(omega)
        point = GraphPoint(xc, omega, relation.graph_residual(xc, omega), iterations=0)
        return restricted.ran.basis @ xc, w, point, 0
    raise InputError(
        f"relation dimension {relation.dim} matches neither the codomain "
        f"({m}) nor the range ({restricted.ran.dim}) of A"
    )


def _homogeneous_core(a_map, relation, f, tol, lam, max_iter, dr_start=None):
    restricted = restrict_operator(a_map)
    _check_rhs(restricted, f, tol)
    w = b_star_inverse(restricted, f)
    g, v, point, iters = _invert_on_range(
        restricted, relation, w, tol, lam, max_iter, dr_start
    )
    u = b_inverse(restricted, g)
    return restricted, w, g, v, point, iters, u


def _certify(diagnostics, tol):
    bad = {k: v for k, v in diagnostics.items()
           if k.startswith("residual_") and v > 10.0 * tol}
    if bad:
        worst = max(bad.values())
        raise ConvergenceError(
            f"certificate residuals exceed 10*tol: {sorted(bad)} (max {worst:.3e})",
            residual=worst,
        )


def solve_homogeneous(problem: Problem, dr_start=None) -> Solution:
    """Solve A^T a(A u) in f for f orthogonal to the kernel of A.

    The relation may live on the full codomain (it is then composed with
    the range projection and inverted by Douglas-Rachford) or directly on
    range coordinates (dimension equal to the rank; inverted in one
    resolvent evaluation).
    """
    if problem.kind != HOMOGENEOUS:
        raise InputError(f"expected a homogeneous problem, got {problem.kind!r}")
    restricted, w, g, v, point, iters, u = _homogeneous_core(
        problem.A, problem.relation, problem.f,
        problem.tol, problem.lam, problem.max_iter, dr_start,
    )
    amat = problem.A.matrix
    diagnostics = {
        "residual_graph": point.residual,
        "residual_adjoint": float(np.linalg.norm(amat.T @ v - problem.f)),
        "residual_range": float(np.linalg.norm(restricted.ran.project(v) - w)),
        "residual_kernel": restricted.ran_adj.membership_residual(u),
        "norm_u_h0": float(np.linalg.norm(u)),
        "norm_u_h1_b": float(np.linalg.norm(amat @ u)),
        "norm_f_hm1_b": sobolev_norm(restricted, SobolevNormKind.HM1_B, problem.f),
        "n_iterations": iters,
    }
    _certify(diagnostics, problem.tol)
    return Solution(u=u, certificate=point, w=w, diagnostics=diagnostics)


def _effective_restriction(problem: Problem) -> LinearMap:
    """C composed with the domain embedding; must agree with A in norm.

    The zero-boundary builder enumerates only the codomain rows its own
    stencil touches, so the user-facing A and C * embedding can differ by a
    row permutation plus zero rows; norms agree exactly.
    """
    eff = LinearMap(problem.C.matrix @ problem.inclusion.basis)
    k = eff.cols
    probes = [np.ones(k), np.cos(np.arange(k)), np.arange(1.0, k + 1) / k]
    for v in probes:
        na = float(np.linalg.norm(problem.A.matrix @ v))
        ne = float(np.linalg.norm(eff.matrix @ v))
        if abs(na - ne) > 1e-9 * max(1.0, na, ne):
            raise InputError(
                "A is not the restriction of C to the inclusion subspace "
                f"(|A v| = {na:.6e} vs |C E v| = {ne:.6e})"
            )
    return eff


def solve_dirichlet(problem: Problem, dr_start=None) -> Solution:
    """Solve A^T a(C u) in f with u - u0 constrained to the zero-boundary space.

    Translates the relation by (C u0, 0), solves the homogeneous problem for
    u - u0 through the restriction of C to the inclusion subspace, and adds
    u0 back.  The certificate pair is (C u, v) with A^T v = f.
    """
    if problem.kind != DIRICHLET:
        raise InputError(f"expected a boundary-data problem, got {problem.kind!r}")
    if problem.u0 is None:
        raise InputError("boundary-data problems need u0")
    u0 = np.asarray(problem.u0, dtype=float)
    if u0.shape != (problem.C.cols,):
        raise InputError("u0 must live in the domain of C")
    eff = _effective_restriction(problem)
    cu0 = problem.C.matrix @ u0
    shifted = problem.relation.shift(cu0, np.zeros_like(cu0))
    restricted, w, g, v, point, iters, u_red = _homogeneous_core(
        eff, shifted, problem.f, problem.tol, problem.lam, problem.max_iter, dr_start,
    )
    embed = problem.inclusion.basis
    u = u0 + embed @ u_red
    cu = problem.C.matrix @ u
    cert = GraphPoint(cu, v, problem.relation.graph_residual(cu, v),
                      iterations=point.iterations)
    diagnostics = {
        "residual_graph": cert.residual,
        "residual_adjoint": float(np.linalg.norm(eff.matrix.T @ v - problem.f)),
        "residual_range": float(np.linalg.norm(restricted.ran.project(v) - w)),
        "residual_membership": float(
            np.linalg.norm((u - u0) - embed @ (embed.T @ (u - u0)))
        ),
        "residual_kernel": restricted.ran_adj.membership_residual(u_red),
        "norm_u_h0": float(np.linalg.norm(u)),
        "norm_u_h1_c_plus_i": sobolev_norm(
            None, SobolevNormKind.H1_C_PLUS_I, u, cmap=problem.C
        ),
        "norm_correction_h1_b": float(np.linalg.norm(eff.matrix @ u_red)),
        "norm_f_hm1_b": sobolev_norm(restricted, SobolevNormKind.HM1_B, problem.f),
        "n_iterations": iters,
    }
    _certify(diagnostics, problem.tol)
    return Solution(u=u, certificate=cert, w=w, diagnostics=diagnostics)


def _admissible_test_space(restricted: RestrictedOperator, inclusion: Subspace):
    """W = kernel complement of A intersected with the inclusion subspace."""
    return restricted.ran_adj.intersect(inclusion)


def _graph_inner_complement(restricted, w_space: Subspace) -> np.ndarray:
    """Basis (plain-orthonormal) of the complement of W inside the kernel
    complement, orthogonal in the graph inner product <A., A.>."""
    q1 = restricted.ran_adj.basis
    r = q1.shape[1]
    if w_space.dim == 0:
        return q1
    aw = restricted.full_map.matrix @ w_space.basis
    cross = aw.T @ (restricted.full_map.matrix @ q1)  # dim(W) x r
    coeff = kernel_basis(LinearMap(cross)).basis
    return q1 @ coeff


def solve_neumann(problem: Problem, dr_start=None) -> Solution:
    """Solve C^T a(A u) in f with flux data u0, in the weak sense.

    The functional f - C^* u0 is restricted to the admissible test space
    W (kernel complement intersected with the inclusion subspace), extended
    by zero on the graph-orthogonal complement of W, and represented by a
    Riesz vector; the homogeneous solve then runs against the relation
    translated by (0, u0).  The reported flux v satisfies
    <v, A w> = <f, w> on W and <v - u0, A w> = 0 on the complement.
    """
    if problem.kind != NEUMANN:
        raise InputError(f"expected a flux-data problem, got {problem.kind!r}")
    amat = problem.A.matrix
    if problem.C is not None:
        eff = amat @ problem.inclusion.basis
        k = eff.shape[1]
        for v in (np.ones(k), np.cos(np.arange(k))):
            na = float(np.linalg.norm(problem.C.matrix @ v))
            ne = float(np.linalg.norm(eff @ v))
            if abs(na - ne) > 1e-9 * max(1.0, na, ne):
                raise InputError(
                    "C is not the restriction of A to the inclusion subspace"
                )
    u0 = (np.zeros(problem.A.rows) if problem.u0 is None
          else np.asarray(problem.u0, dtype=float))
    restricted = restrict_operator(problem.A)
    w_space = _admissible_test_space(restricted, problem.inclusion)
    q1 = restricted.ran_adj.basis

    if w_space.dim:
        aw = amat @ w_space.basis
        gram = aw.T @ aw
        # coordinates of the graph-orthogonal projection of each q1 column
        proj = np.linalg.solve(gram, aw.T @ (amat @ q1))  # dim(W) x r
        gamma = proj.T @ (w_space.basis.T @ problem.f - aw.T @ u0)
    else:
        gamma = np.zeros(q1.shape[1])
    g = q1 @ gamma

    shifted = problem.relation.shift(np.zeros(problem.A.rows), u0)
    _, w_vec, gg, y, point, iters, u = _homogeneous_core(
        problem.A, shifted, g, problem.tol, problem.lam, problem.max_iter, dr_start,
    )
    v = y + u0
    au = amat @ u
    cert = GraphPoint(au, v, problem.relation.graph_residual(au, v),
                      iterations=point.iterations)

    def _normalized_max(vectors, values):
        worst = 0.0
        for col, val in zip(vectors.T, values):
            scale = float(np.linalg.norm(amat @ col))
            worst = max(worst, abs(val) / scale if scale > 0 else abs(val))
        return worst

    if w_space.dim:
        wb = w_space.basis
        weak = wb.T @ problem.f - (amat @ wb).T @ v
        residual_weak = _normalized_max(wb, weak)
    else:
        residual_weak = 0.0
    comp = _graph_inner_complement(restricted, w_space)
    if comp.shape[1]:
        bdy = (amat @ comp).T @ (v - u0)
        residual_bdy = _normalized_max(comp, bdy)
        report_wperp = _normalized_max(comp, comp.T @ problem.f)
    else:
        residual_bdy = 0.0
        report_wperp = 0.0
    kerb = restricted.ker.basis
    compat = kerb.T @ (problem.f - amat.T @ u0) if kerb.shape[1] else np.zeros(0)

    diagnostics = {
        "residual_graph": cert.residual,
        "residual_weak_equation": residual_weak,
        "residual_boundary_condition": residual_bdy,
        "residual_range": float(np.linalg.norm(restricted.ran.project(y) - w_vec)),
        "residual_kernel": restricted.ran_adj.membership_residual(u),
        "norm_u_h0": float(np.linalg.norm(u)),
        "norm_u_h1_b": float(np.linalg.norm(au)),
        "norm_xi_hm1_b": sobolev_norm(restricted, SobolevNormKind.HM1_B, g),
        "report_compat_kernel_max": float(np.max(np.abs(compat))) if compat.size else 0.0,
        "report_wperp_discrepancy_max": report_wperp,
        "n_iterations": iters,
    }
    _certify(diagnostics, problem.tol)
    return Solution(u=u, certificate=cert, w=v, diagnostics=diagnostics)


def solve(problem: Problem, dr_start=None) -> Solution:
    """Dispatch on the problem kind."""
    if problem.kind == HOMOGENEOUS:
        return solve_homogeneous(problem, dr_start)
    if problem.kind == DIRICHLET:
        return solve_dirichlet(problem, dr_start)
    return solve_neumann(problem, dr_start)


def _require_same_setting(p1: Problem, p2: Problem, kind):
    if p1.kind != kind or p2.kind != kind:
        raise InputError(f"both problems must be of kind {kind!r}")
    if p1.A.shape != p2.A.shape or not np.array_equal(p1.A.matrix, p2.A.matrix):
        raise InputError("the two problems must share the operator A")
    if (p1.C is None) != (p2.C is None):
        raise InputError("the two problems must share the operator C")
    if p1.C is not None and not np.array_equal(p1.C.matrix, p2.C.matrix):
        raise InputError("the two problems must share the operator C")
    if p1.relation is not p2.relation:
        raise InputError("the two problems must share the relation object")


def verify_dirichlet_estimate(p1: Problem, p2: Problem,
                              s1: Solution, s2: Solution) -> EstimateReport:
    """Check the explicit continuity bound for boundary-data problems.

    For a linear relation the adjoint-relation element is the transpose
    applied to C(u0 - v0); otherwise the boundary data must coincide (the
    element is then zero).  The bound chains the graph-norm embedding
    constant with the strong-monotonicity estimate, Young's inequality
    applied with epsilon = c.
    """
    _require_same_setting(p1, p2, DIRICHLET)
    relation = p1.relation
    c = relation.c
    eff = _effective_restriction(p1)
    restricted = restrict_operator(eff)
    du0 = p1.u0 - p2.u0
    cdu0 = p1.C.matrix @ du0
    if isinstance(relation.descriptor, LinearDescriptor):
        w0 = relation.descriptor.matrix.matrix.T @ cdu0
        w0_norm = float(np.linalg.norm(w0))
    elif float(np.linalg.norm(cdu0)) <= 1e-14 * max(1.0, float(np.linalg.norm(p1.u0))):
        w0_norm = 0.0
    else:
        raise CapabilityError(
            "the adjoint relation is only materialized for linear relations; "
            "use equal boundary data otherwise"
        )
    df_norm = sobolev_norm(restricted, SobolevNormKind.HM1_B, p1.f - p2.f)
    cdu0_norm = float(np.linalg.norm(cdu0))
    l1 = embedding_constant(restricted, eff)
    cucv_sq = (2.0 / c) * df_norm * cdu0_norm + (df_norm + w0_norm) ** 2 / c**2
    cucv_bound = float(np.sqrt(max(cucv_sq, 0.0)))
    rhs = (
        l1 * cucv_bound
        + l1 * cdu0_norm
        + sobolev_norm(None, SobolevNormKind.H1_C_PLUS_I, du0, cmap=p1.C)
    )
    lhs = sobolev_norm(None, SobolevNormKind.H1_C_PLUS_I, s1.u - s2.u, cmap=p1.C)
    return EstimateReport(
        lhs=lhs,
        rhs=rhs,
        constants={"L1": l1, "c": c, "w0_norm": w0_norm,
                   "df_hm1_b": df_norm, "cu0_gap": cdu0_norm},
        passed=lhs <= rhs + 1e-9,
    )


def verify_neumann_estimate(p1: Problem, p2: Problem,
                            s1: Solution, s2: Solution) -> EstimateReport:
    """Check the continuity bound for flux-data problems.

    The functional difference is measured through its Riesz representative
    on the admissible test space W in the graph inner product; the data
    difference through the range projection.  Both terms carry 1/c.
    """
    _require_same_setting(p1, p2, NEUMANN)
    c = p1.relation.c
    amat = p1.A.matrix
    restricted = restrict_operator(p1.A)
    w_space = _admissible_test_space(restricted, p1.inclusion)
    u0_1 = np.zeros(p1.A.rows) if p1.u0 is None else p1.u0
    u0_2 = np.zeros(p2.A.rows) if p2.u0 is None else p2.u0
    if w_space.dim:
        wb = w_space.basis
        aw = amat @ wb
        delta = wb.T @ (p1.f - p2.f) - aw.T @ (u0_1 - u0_2)
        gram = aw.T @ aw
        dual = float(np.sqrt(max(float(delta @ np.linalg.solve(gram, delta)), 0.0)))
    else:
        dual = 0.0
    data_gap = float(np.linalg.norm(restricted.ran.project(u0_1 - u0_2)))
    rhs = (dual + data_gap) / c
    lhs = float(np.linalg.norm(amat @ (s1.u - s2.u)))
    return EstimateReport(
        lhs=lhs,
        rhs=rhs,
        constants={"c": c, "dual_gap": dual, "data_gap": data_gap},
        passed=lhs <= rhs + 1e-9,
    )


def lipschitz_probe(template: Problem, pairs=100, rng_seed=0) -> float:
    """Largest sampled ratio |u1 - u2|_{H1(B)} / |f1 - f2|_{H-1(B)}.

    Samples admissible right-hand-side pairs for the homogeneous template
    and solves both; the ratio never exceeds the Lipschitz constant of the
    relation's inverse (1/c in general, 1/lambda_min for symmetric linear
    relations along range directions).
    """
    if template.kind != HOMOGENEOUS:
        raise InputError("the probe needs a homogeneous template")
    if pairs < 1:
        raise InputError("pairs must be >= 1")
    rng = np.random.default_rng(rng_seed)
    restricted = restrict_operator(template.A)
    q1 = restricted.ran_adj.basis
    r = q1.shape[1]
    if r == 0:
        return 0.0
    amat = template.A.matrix
    worst = 0.0
    for _ in range(pairs):
        f1 = q1 @ rng.standard_normal(r)
        f2 = q1 @ rng.standard_normal(r)
        den = sobolev_norm(restricted, SobolevNormKind.HM1_B, f1 - f2)
        if den < 1e-12:
            continue
        u1 = _homogeneous_core(template.A, template.relation, f1,
                               template.tol, template.lam, template.max_iter)[6]
        u2 = _homogeneous_core(template.A, template.relation, f2,
                               template.tol, template.lam, template.max_iter)[6]
        ratio = float(np.linalg.norm(amat @ (u1 - u2))) / den
        worst = max(worst, ratio)
    return worst
