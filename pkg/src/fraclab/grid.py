"""Meshes and P1 finite element assembly of -div(A(x) grad) with Dirichlet data.

Boundary degrees of freedom are eliminated: all assembled matrices act on the
interior nodes only, ordered as in ``Grid.interior``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp

from .errors import CoefficientViolationError, InvalidArgumentError

__all__ = [
    "Grid",
    "MatrixCoefficient",
    "ScalarCoefficient",
    "AssembledOperator",
    "build_interval_grid",
    "build_rectangle_grid",
    "assemble",
    "assemble_stiffness",
    "weighted_mass",
    "as_matrix_coefficient",
    "as_scalar_coefficient",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Simplicial mesh of an interval or a rectangle.

    Attributes
    ----------
    dim : int
        Spatial dimension (1 or 2).
    nodes : ndarray, shape (N, dim)
    elements : ndarray, shape (E, dim + 1)
        Node indices of each simplex.
    boundary : ndarray of bool, shape (N,)
    shape : tuple of int
        Node counts per axis of the underlying tensor lattice; node ``k`` sits at
        lattice position ``np.unravel_index(k, shape, order="F")``.
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary: np.ndarray
    shape: tuple
    interior: np.ndarray = field(init=False)
    interior_index: np.ndarray = field(init=False)

    def __post_init__(self):
        interior = np.flatnonzero(~self.boundary)
        index = np.full(len(self.nodes), -1, dtype=np.intp)
        index[interior] = np.arange(len(interior))
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "interior_index", index)
        for arr in (self.nodes, self.elements, self.boundary, interior, index):
            arr.setflags(write=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def interior_nodes(self):
        return self.nodes[self.interior]

    def element_measures(self):
        p = self.nodes[self.elements]
        if self.dim == 1:
            return p[:, 1, 0] - p[:, 0, 0]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self):
        return self.nodes[self.elements].mean(axis=1)

    def edges(self):
        """Unique mesh edges as a sorted (n_edges, 2) index array."""
        el = self.elements
        if self.dim == 1:
            pairs = el
        else:
            pairs = np.concatenate([el[:, [0, 1]], el[:, [1, 2]], el[:, [0, 2]]])
        pairs = np.sort(pairs, axis=1)
        return np.unique(pairs, axis=0)

    def full_vector(self, u):
        """Nodal vector over all nodes with zero boundary trace."""
        out = np.zeros(self.n_nodes)
        out[self.interior] = u
        return out

    def lattice_axes(self):
        """Coordinates along each lattice axis."""
        grid = self.nodes.reshape(*self.shape, self.dim, order="F")
        if self.dim == 1:
            return (grid[:, 0],)
        return (grid[:, 0, 0], grid[0, :, 1])

    def to_lattice(self, values):
        """Reshape an all-node vector (or (N, ...) array) onto the tensor lattice."""
        values = np.asarray(values)
        return values.reshape(*self.shape, *values.shape[1:], order="F")


def _check_bounds(a, b, n, axis=""):
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidArgumentError(f"non-finite bounds{axis}: ({a}, {b})")
    if not b > a:
        raise InvalidArgumentError(f"empty domain{axis}: need b > a, got ({a}, {b})")
    if int(n) != n or n < 3:
        raise InvalidArgumentError(f"need at least 3 cells{axis}, got {n}")


def build_interval_grid(a, b, n):
    """Uniform mesh of [a, b] with ``n`` cells (``n + 1`` nodes)."""
    _check_bounds(a, b, n)
    n = int(n)
    x = np.linspace(a, b, n + 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    boundary = np.zeros(n + 1, dtype=bool)
    boundary[[0, -1]] = True
    return Grid(1, x[:, None], elements, boundary, (n + 1,))


def build_rectangle_grid(ax, bx, ay, by, nx, ny):
    """Uniform right-triangle mesh of [ax, bx] x [ay, by], two triangles per cell."""
    _check_bounds(ax, bx, nx, " in x")
    _check_bounds(ay, by, ny, " in y")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(ax, bx, nx + 1)
    ys = np.linspace(ay, by, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(order="F"), Y.ravel(order="F")])

    def idx(i, j):
        return i + j * (nx + 1)

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(order="F"), j.ravel(order="F")
    n00, n10, n01, n11 = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    elements = np.stack([lower, upper], axis=1).reshape(-1, 3)

    on_edge = (X == xs[0]) | (X == xs[-1]) | (Y == ys[0]) | (Y == ys[-1])
    boundary = on_edge.ravel(order="F")
    return Grid(2, nodes, elements, boundary, (nx + 1, ny + 1))


class MatrixCoefficient:
    """Symmetric matrix field x -> A(x).

    ``func`` takes a point of shape (dim,) and returns a (dim, dim) matrix or a
    scalar (meaning ``scalar * I``). With ``vectorized=True`` it is instead
    called once with all points, shape (P, dim), and must return (P, dim, dim)
    or (P,).
    """

    def __init__(self, func, dim, vectorized=False, label=None):
        self.func = func
        self.dim = dim
        self.vectorized = vectorized
        self.label = label

    @classmethod
    def constant(cls, value, dim):
        mat = np.asarray(value, dtype=float)
        if mat.ndim == 0:
            mat = mat * np.eye(dim)
        if mat.shape != (dim, dim):
            raise InvalidArgumentError(f"constant coefficient must be {dim}x{dim}")
        mat = mat.copy()
        mat.setflags(write=False)

        def func(points):
            return np.broadcast_to(mat, (len(points), dim, dim))

        return cls(func, dim, vectorized=True, label=repr(mat.tolist()))

    def _coerce(self, values, count):
        values = np.asarray(values, dtype=float)
        if values.shape == (count,) or values.shape == ():
            values = np.broadcast_to(values, (count,))
            return values[:, None, None] * np.eye(self.dim)
        return np.broadcast_to(values, (count, self.dim, self.dim)).astype(float)

    def sample(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.vectorized:
            return self._coerce(self.func(points), len(points))
        vals = []
        for p in points:
            v = np.asarray(self.func(p), dtype=float)
            vals.append(v * np.eye(self.dim) if v.ndim == 0 else v)
        return np.asarray(vals).reshape(len(points), self.dim, self.dim)

    def __call__(self, x):
        return self.sample(np.reshape(x, (1, self.dim)))[0]

    def __sub__(self, other):
        return MatrixCoefficient(
            lambda pts: self.sample(pts) - other.sample(pts), self.dim, vectorized=True
        )

    def __add__(self, other):
        return MatrixCoefficient(
            lambda pts: self.sample(pts) + other.sample(pts), self.dim, vectorized=True
        )


class ScalarCoefficient:
    """Scalar field x -> C(x); same calling convention as MatrixCoefficient."""

    def __init__(self, func, vectorized=False, label=None):
        self.func = func
        self.vectorized = vectorized
        self.label = label

    @classmethod
    def constant(cls, value):
        value = float(value)
        return cls(lambda pts: np.full(len(pts), value), vectorized=True, label=repr(value))

    def sample(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.vectorized:
            vals = np.asarray(self.func(points), dtype=float)
            return np.broadcast_to(vals, (len(points),)).copy()
        return np.array([float(self.func(p)) for p in points])

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.sample(x[None, :])[0])

    def __add__(self, other):
        if isinstance(other, ScalarCoefficient):
            return ScalarCoefficient(
                lambda pts: self.sample(pts) + other.sample(pts), vectorized=True
            )
        shift = float(other)
        return ScalarCoefficient(lambda pts: self.sample(pts) + shift, vectorized=True)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarCoefficient):
            return ScalarCoefficient(
                lambda pts: self.sample(pts) - other.sample(pts), vectorized=True
            )
        return self + (-float(other))


def as_matrix_coefficient(A, dim):
    if isinstance(A, MatrixCoefficient):
        if A.dim != dim:
            raise InvalidArgumentError(f"coefficient is {A.dim}D, grid is {dim}D")
        return A
    if A is None:
        return MatrixCoefficient.constant(1.0, dim)
    if callable(A):
        return MatrixCoefficient(A, dim)
    return MatrixCoefficient.constant(A, dim)


def as_scalar_coefficient(C):
    if isinstance(C, ScalarCoefficient):
        return C
    if callable(C):
        return ScalarCoefficient(C)
    return ScalarCoefficient.constant(C)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    """Stiffness ``K`` and consistent mass ``M`` on interior degrees of freedom."""

    K: np.ndarray
    M: np.ndarray
    grid: Grid
    coefficient: MatrixCoefficient

    @property
    def n(self):
        return self.K.shape[0]


def _check_spd(samples, points):
    scale = np.abs(samples).max(axis=(1, 2))
    asym = np.abs(samples - samples.transpose(0, 2, 1)).max(axis=(1, 2))
    bad = np.flatnonzero(~(asym <= 1e-12 * np.maximum(scale, 1e-300)))
    if bad.size:
        k = bad[0]
        raise CoefficientViolationError(
            f"coefficient not symmetric at x={points[k].tolist()}",
            point=points[k].tolist(),
        )
    low = np.linalg.eigvalsh(samples)[:, 0]
    bad = np.flatnonzero(~(low > 0))
    if bad.size:
        k = bad[0]
        raise CoefficientViolationError(
            f"coefficient not positive definite at x={points[k].tolist()} "
            f"(smallest eigenvalue {low[k]:.3e})",
            point=points[k].tolist(),
            eigenvalue=float(low[k]),
        )


def _scatter(grid, local):
    """Sum element matrices (E, k, k) into a dense interior-by-interior matrix."""
    el = grid.elements
    k = el.shape[1]
    rows = np.repeat(el, k, axis=1).ravel()
    cols = np.tile(el, (1, k)).ravel()
    full = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(grid.n_nodes, grid.n_nodes)
    ).tocsr()
    inner = grid.interior
    return full[inner][:, inner].toarray()


def _barycentric_gradients(grid):
    p = grid.nodes[grid.elements]
    if grid.dim == 1:
        h = p[:, 1, 0] - p[:, 0, 0]
        return np.stack([-1.0 / h, 1.0 / h], axis=1)[:, :, None]
    # gradients of the hat functions on each triangle, shape (E, 3, 2)
    T = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    Tinv = np.linalg.inv(T)
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return np.einsum("ar,erd->ead", ref, Tinv)


def assemble_stiffness(grid, A, check=True):
    """Stiffness matrix of -div(A grad) with one-point centroid quadrature.

    ``check=False`` skips the positive-definiteness test; this is used for
    coefficient differences such as ``A2 - A1``.
    """
    A = as_matrix_coefficient(A, grid.dim)
    cents = grid.centroids()
    samples = A.sample(cents)
    if check:
        _check_spd(samples, cents)
    samples = 0.5 * (samples + samples.transpose(0, 2, 1))
    G = _barycentric_gradients(grid)
    vol = grid.element_measures()
    local = vol[:, None, None] * np.einsum("ead,edf,ebf->eab", G, samples, G)
    local = 0.5 * (local + local.transpose(0, 2, 1))
    return _scatter(grid, local)


def _mass_local(grid):
    vol = grid.element_measures()
    k = grid.dim + 1
    ref = (np.ones((k, k)) + np.eye(k)) / ((k) * (k + 1))
    return vol[:, None, None] * ref


def weighted_mass(grid, C):
    """Mass matrix weighted by the piecewise-linear interpolant of ``C``.

    Exact for linear ``C``; equals ``c * M`` for a constant ``c``.
    """
    C = as_scalar_coefficient(C)
    vals = C.sample(grid.nodes)
    if not np.all(np.isfinite(vals)):
        raise InvalidArgumentError("scalar coefficient is not finite at every node")
    k = grid.dim + 1
    vol = grid.element_measures()
    # integral of lambda_a * lambda_b * lambda_c over a simplex:
    # |T| * dim! * (multiplicity factorials) / (dim + 3)!
    fac = math.factorial(grid.dim) / math.factorial(grid.dim + 3)
    cvals = vals[grid.elements]
    local = np.empty((len(vol), k, k))
    for a in range(k):
        for b in range(k):
            acc = 0.0
            for c in range(k):
                mult = np.bincount([a, b, c], minlength=k)
                weight = np.prod([math.factorial(m) for m in mult])
                acc = acc + weight * cvals[:, c]
            local[:, a, b] = fac * vol * acc
    return _scatter(grid, local)


def assemble(grid, A=None):
    """Assemble the Dirichlet stiffness and mass matrices for ``-div(A grad)``.

    Raises
    ------
    CoefficientViolationError
        If ``A`` is not symmetric positive definite at some element centroid.
    """
    A = as_matrix_coefficient(A, grid.dim)
    K = assemble_stiffness(grid, A, check=True)
    M = _scatter(grid, _mass_local(grid))
    for arr in (K, M):
        arr.setflags(write=False)
    return AssembledOperator(K, M, grid, A)
