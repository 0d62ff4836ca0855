"""Subspaces, restricted operators, and the norm scale they generate.

The central object is the restriction of a matrix to the orthogonal
complement of its kernel, mapped onto its range.  That restriction is
invertible, and it powers a three-level norm scale: the graph norm |Ax|
above, the plain Euclidean norm in the middle, and a dual norm below.
Dual-norm quantities are always computed through solves with the
restricted matrix, never by assembling an explicit inverse.

Everything is real and dense internally; sparse input is accepted and
converted (problems here are desk scale, direct factorizations are fine).
"""

from __future__ import annotations

import enum
import os

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse

from .errors import DomainError, InputError

DEFAULT_TOL = 1e-10


def _as_array_1d(x, dim=None, name="vector"):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise InputError(f"{name} has length {v.shape[0]}, expected {dim}")
    return v


class LinearMap:
    """Real matrix with explicit domain (cols) and codomain (rows) dimensions.

    Accepts dense array-likes or scipy sparse matrices; entries must be
    finite and real.  Instances are immutable.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        if scipy.sparse.issparse(entries):
            entries = entries.toarray()
        entries = np.asarray(entries)
        if np.iscomplexobj(entries):
            raise InputError("complex entries are not supported; the scalar field is real")
        a = np.asarray(entries, dtype=float)
        if a.ndim != 2:
            raise InputError(f"expected a matrix, got an array of shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InputError("matrix entries must be finite")
        a = a.copy()
        a.flags.writeable = False
        self._a = a

    @property
    def matrix(self) -> np.ndarray:
        return self._a

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self):
        return self._a.shape

    @property
    def T(self) -> "LinearMap":
        return LinearMap(self._a.T)

    def __call__(self, x) -> np.ndarray:
        x = _as_array_1d(x, self.cols, "input vector")
        return self._a @ x

    def __repr__(self):
        return f"LinearMap({self.rows}x{self.cols})"


def as_linear_map(value) -> LinearMap:
    """Coerce a LinearMap, dense array, or sparse matrix into a LinearMap."""
    if isinstance(value, LinearMap):
        return value
    return LinearMap(value)


class Subspace:
    """Subspace of R^n stored as an (n, k) matrix with orthonormal columns."""

    __slots__ = ("_basis", "_tol")

    def __init__(self, ambient_dim, basis, tol=DEFAULT_TOL):
        if tol < 0:
            raise InputError("tol must be nonnegative")
        b = np.asarray(basis, dtype=float)
        if b.size == 0:
            b = b.reshape(ambient_dim, 0)
        if b.ndim != 2 or b.shape[0] != ambient_dim:
            raise InputError(
                f"basis must be an ({ambient_dim}, k) array, got shape {b.shape}"
            )
        if b.shape[1] > ambient_dim:
            raise InputError("more basis vectors than ambient dimensions")
        if b.shape[1]:
            gram = b.T @ b
            if np.max(np.abs(gram - np.eye(b.shape[1]))) > 1e-12:
                raise InputError("basis columns must be orthonormal (to 1e-12)")
        b = b.copy()
        b.flags.writeable = False
        self._basis = b
        self._tol = float(tol)

    @classmethod
    def full(cls, n) -> "Subspace":
        return cls(n, np.eye(n))

    @classmethod
    def zero(cls, n) -> "Subspace":
        return cls(n, np.zeros((n, 0)))

    @classmethod
    def from_spanning(cls, vectors, tol=DEFAULT_TOL) -> "Subspace":
        """Orthonormalize a spanning set (rows or columns stacked as columns)."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        q = scipy.linalg.orth(v, rcond=tol)
        return cls(v.shape[0], q, tol)

    @property
    def basis(self) -> np.ndarray:
        return self._basis

    @property
    def ambient_dim(self) -> int:
        return self._basis.shape[0]

    @property
    def dim(self) -> int:
        return self._basis.shape[1]

    @property
    def tol(self) -> float:
        return self._tol

    def project(self, x) -> np.ndarray:
        """Orthogonal projection of ``x`` onto the subspace."""
        x = _as_array_1d(x, self.ambient_dim, "x")
        if self.dim == 0:
            return np.zeros_like(x)
        return self._basis @ (self._basis.T @ x)

    def membership_residual(self, x) -> float:
        x = _as_array_1d(x, self.ambient_dim, "x")
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol=None) -> bool:
        x = _as_array_1d(x, self.ambient_dim, "x")
        tol = self._tol if tol is None else tol
        return self.membership_residual(x) <= tol * max(1.0, float(np.linalg.norm(x)))

    def complement(self) -> "Subspace":
        """Orthogonal complement within the ambient space."""
        if self.dim == 0:
            return Subspace.full(self.ambient_dim)
        return kernel_basis(LinearMap(self._basis.T), self._tol)

    def intersect(self, other: "Subspace", tol=None) -> "Subspace":
        """Intersection with another subspace of the same ambient space."""
        if other.ambient_dim != self.ambient_dim:
            raise InputError("subspaces live in different ambient spaces")
        tol = self._tol if tol is None else tol
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(self.ambient_dim)
        n = self.ambient_dim
        eye = np.eye(n)
        off_self = eye - self._basis @ self._basis.T
        off_other = eye - other.basis @ other.basis.T
        stacked = np.vstack([off_self, off_other])
        return kernel_basis(LinearMap(stacked), tol)

    def __repr__(self):
        return f"Subspace(dim={self.dim} of R^{self.ambient_dim})"


class SobolevNormKind(enum.Enum):
    """Norms of the scale attached to a restricted operator (or a square map)."""

    H1_B = "h1_b"
    H0 = "h0"
    HM1_B = "hm1_b"
    H1_C_PLUS_I = "h1_c_plus_i"
    HM1_C_PLUS_I = "hm1_c_plus_i"


def kernel_basis(m, tol=DEFAULT_TOL) -> Subspace:
    """Orthonormal basis of the null space of ``m``.

    Rank decisions use a relative rule: singular values below
    ``tol * sigma_max`` count as zero.
    """
    if tol < 0:
        raise InputError("tol must be nonnegative")
    a = as_linear_map(m).matrix
    if a.shape[0] == 0:
        return Subspace.full(a.shape[1])
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s.size else 0
    return Subspace(a.shape[1], vh[rank:].T, tol)


def range_basis(m, tol=DEFAULT_TOL) -> Subspace:
    """Orthonormal basis of the column space of ``m``; same rank rule."""
    if tol < 0:
        raise InputError("tol must be nonnegative")
    a = as_linear_map(m).matrix
    if a.shape[1] == 0 or a.shape[0] == 0:
        return Subspace.zero(a.shape[0])
    u, s, _ = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s.size else 0
    return Subspace(a.shape[0], u[:, :rank], tol)


class RestrictedOperator:
    """A matrix restricted to its kernel complement, onto its range.

    Holds orthonormal bases of the four fundamental subspaces and the
    square, invertible coordinate matrix of the restriction (domain
    coordinates in ``ran_adj``, codomain coordinates in ``ran``).  The
    smallest singular value of that matrix is the discrete constant in the
    bound |x| <= const * |Ax| on the kernel complement.
    """

    __slots__ = ("full_map", "ker", "coker", "ran", "ran_adj", "b_matrix", "tol")

    def __init__(self, full_map, ker, coker, ran, ran_adj, b_matrix, tol=DEFAULT_TOL):
        self.full_map = as_linear_map(full_map)
        self.ker = ker
        self.coker = coker
        self.ran = ran
        self.ran_adj = ran_adj
        self.b_matrix = as_linear_map(b_matrix)
        self.tol = float(tol)
        b = self.b_matrix.matrix
        if b.shape[0] != b.shape[1] or b.shape[0] != ran.dim or b.shape[0] != ran_adj.dim:
            raise InputError("restriction matrix must be square in the reduced bases")
        if b.shape[0]:
            sv = np.linalg.svd(b, compute_uv=False)
            if sv[-1] <= 0.0:
                raise InputError("restriction matrix is singular")

    @property
    def rank(self) -> int:
        return self.b_matrix.rows

    def __repr__(self):
        return f"RestrictedOperator(rank={self.rank}, shape={self.full_map.shape})"


def restrict_operator(m, tol=DEFAULT_TOL) -> RestrictedOperator:
    """Build the invertible restriction of ``m`` from a single SVD.

    The zero map yields a 0-dimensional restriction, which is vacuously
    invertible; every derived solve then returns the zero vector.
    """
    lm = as_linear_map(m)
    a = lm.matrix
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s.size else 0
    ran = Subspace(a.shape[0], u[:, :rank], tol)
    coker = Subspace(a.shape[0], u[:, rank:], tol)
    ran_adj = Subspace(a.shape[1], vh[:rank].T, tol)
    ker = Subspace(a.shape[1], vh[rank:].T, tol)
    b = ran.basis.T @ (a @ ran_adj.basis)
    return RestrictedOperator(lm, ker, coker, ran, ran_adj, b, tol)


def _require_in(space: Subspace, x, tol, what, code=None):
    resid = space.membership_residual(x)
    if resid > tol * max(1.0, float(np.linalg.norm(x))):
        raise DomainError(
            f"{what} (off-subspace component {resid:.3e})", code=code
        )
    return resid


def sobolev_norm(ctx, kind, x, cmap=None) -> float:
    """Evaluate one norm of the scale.

    Parameters
    ----------
    ctx : RestrictedOperator or None
        Required for the B-based kinds; ignored by the C-based ones.
    kind : SobolevNormKind or str
        Which level of the scale to evaluate.
    x : array_like
        For the B-based kinds, ``x`` must lie in the kernel complement of
        the restricted operator (checked against ``ctx.tol``).
    cmap : LinearMap, optional
        The square-or-rectangular map defining the C-based kinds.
    """
    kind = SobolevNormKind(kind)
    x = np.asarray(x, dtype=float)
    if kind is SobolevNormKind.H0:
        return float(np.linalg.norm(x))
    if kind in (SobolevNormKind.H1_C_PLUS_I, SobolevNormKind.HM1_C_PLUS_I):
        if cmap is None:
            raise InputError(f"{kind.value} needs the map C")
        cmap = as_linear_map(cmap)
        x = _as_array_1d(x, cmap.cols, "x")
        if kind is SobolevNormKind.H1_C_PLUS_I:
            return float(np.hypot(np.linalg.norm(cmap.matrix @ x), np.linalg.norm(x)))
        # dual norm: sqrt(<x, (C^T C + I)^{-1} x>) through a Cholesky solve
        g = cmap.matrix.T @ cmap.matrix + np.eye(cmap.cols)
        y = scipy.linalg.cho_solve(scipy.linalg.cho_factor(g), x)
        return float(np.sqrt(max(float(x @ y), 0.0)))
    if ctx is None:
        raise InputError(f"{kind.value} needs a RestrictedOperator context")
    x = _as_array_1d(x, ctx.full_map.cols, "x")
    _require_in(ctx.ran_adj, x, ctx.tol, "x must lie in the kernel complement")
    if kind is SobolevNormKind.H1_B:
        return float(np.linalg.norm(ctx.full_map.matrix @ x))
    # HM1_B: sqrt(<x, (B^T B)^{-1} x>) = |B^{-T} xi| in reduced coordinates
    if ctx.rank == 0:
        return 0.0
    xi = ctx.ran_adj.basis.T @ x
    return float(np.linalg.norm(np.linalg.solve(ctx.b_matrix.matrix.T, xi)))


def b_star_inverse(ctx: RestrictedOperator, f) -> np.ndarray:
    """Unique w in the range of A with A^T w = f, for f in the kernel complement."""
    f = _as_array_1d(f, ctx.full_map.cols, "f")
    _require_in(
        ctx.ran_adj, f, ctx.tol,
        "f has a component in the kernel of A",
        code="rhs_not_in_H_minus_1",
    )
    if ctx.rank == 0:
        return np.zeros(ctx.full_map.rows)
    phi = ctx.ran_adj.basis.T @ f
    omega = np.linalg.solve(ctx.b_matrix.matrix.T, phi)
    return ctx.ran.basis @ omega


def b_inverse(ctx: RestrictedOperator, v) -> np.ndarray:
    """Unique u in the kernel complement with A u = v, for v in the range of A."""
    v = _as_array_1d(v, ctx.full_map.rows, "v")
    _require_in(ctx.ran, v, ctx.tol, "v has a component outside the range of A")
    if ctx.rank == 0:
        return np.zeros(ctx.full_map.cols)
    eta = ctx.ran.basis.T @ v
    return ctx.ran_adj.basis @ np.linalg.solve(ctx.b_matrix.matrix, eta)


def embedding_constant(ctx: RestrictedOperator, cmap) -> float:
    """Smallest L with sqrt(|Cx|^2 + |x|^2) <= L * |Ax| on the kernel complement.

    Solves the generalized eigenproblem (C^T C + I) x = lam A^T A x restricted
    to the kernel complement; the caller guarantees that C agrees with A
    there (C composed with the domain embedding, where one applies).
    """
    cmap = as_linear_map(cmap)
    r = ctx.rank
    if r == 0:
        return 0.0
    q1 = ctx.ran_adj.basis
    cq = cmap.matrix @ q1
    aq = ctx.full_map.matrix @ q1
    g_top = cq.T @ cq + np.eye(r)
    g_bot = aq.T @ aq
    vals = scipy.linalg.eigh(g_top, g_bot, eigvals_only=True)
    return float(np.sqrt(max(float(vals[-1]), 0.0)))


def load_matrix_market(path) -> LinearMap:
    """Read a real general matrix in Matrix Market coordinate format."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such Matrix Market file: {path}")
    try:
        m = scipy.io.mmread(path)
    except Exception as exc:  # scipy raises bare ValueError/TypeError on bad files
        raise InputError(f"cannot parse Matrix Market file {path}: {exc}") from exc
    if np.iscomplexobj(m):
        raise InputError(f"{path}: complex matrices are not supported")
    return LinearMap(m)


def save_basis_columns(subspace: Subspace, path) -> None:
    """Write a subspace basis as a dense whitespace-separated column file."""
    np.savetxt(path, subspace.basis)
