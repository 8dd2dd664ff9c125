"""Quadratic functionals on extension fields and the Picone identity check."""

from dataclasses import dataclass

import numpy as np
import sympy

from .errors import DivisionHazardError, InvalidArgumentError
from .extension import ExtensionField, cell_energies, trace_constant, weighted_energy
from .fractional import frac_schroedinger_spectrum
from .grid import (
    as_matrix_coefficient,
    as_scalar_coefficient,
    assemble,
    assemble_stiffness,
    weighted_mass,
)

__all__ = [
    "CylinderCoefficient",
    "FunctionalReport",
    "ManufacturedField",
    "functional_M",
    "functional_V",
    "variation_direct",
    "picone_residual",
    "picone_sides",
    "rayleigh_min",
]


class CylinderCoefficient:
    """Block matrix B(x) = [[A(x), 0], [0, 1]] on Omega x (0, inf)."""

    def __init__(self, A, dim):
        self.A = as_matrix_coefficient(A, dim)
        self.dim = dim

    def sample(self, points):
        a = self.A.sample(points)
        out = np.zeros((len(a), self.dim + 1, self.dim + 1))
        out[:, : self.dim, : self.dim] = a
        out[:, self.dim, self.dim] = 1.0
        return out

    def __call__(self, x):
        return self.sample(np.reshape(x, (1, self.dim)))[0]


def _as_cylinder(B, dim):
    if isinstance(B, CylinderCoefficient):
        if B.dim != dim:
            raise InvalidArgumentError(f"cylinder coefficient is {B.dim}D, grid is {dim}D")
        return B
    return CylinderCoefficient(B, dim)


@dataclass(frozen=True)
class FunctionalReport:
    energy: float
    trace_term: float
    total: float
    error_estimate: float

    def to_dict(self):
        return {
            "energy": self.energy,
            "trace_term": self.trace_term,
            "total": self.total,
            "error_estimate": self.error_estimate,
        }


def _check_field(U, s):
    if not isinstance(U, ExtensionField):
        raise InvalidArgumentError("expected an ExtensionField")
    if abs(U.s - float(s)) > 1e-15:
        raise InvalidArgumentError(f"field was built for s={U.s}, functional asked for s={s}")


def _averaged_weight_energy(U, K, M):
    """Energy with the exact cell-averaged weight instead of the midpoint value."""
    lad = U.ladder
    a = 1.0 - 2.0 * U.s
    y0, y1 = lad.nodes[:-1], lad.nodes[1:]
    mean_w = (y1 ** (a + 1) - y0 ** (a + 1)) / ((a + 1) * lad.widths)
    per_cell = cell_energies(U.values, lad, K, M, U.s)
    return float(np.sum(per_cell * mean_w / lad.midpoints**a))


def functional_M(U, B, C, s):
    """M(U) = int int y^a B grad U . grad U - 2 s c_s int C U(x, 0)^2.

    The y-weight is frozen at ladder cell midpoints, the x-integrals use the
    finite element matrices. ``error_estimate`` is the change in the energy
    when the midpoint weight is replaced by its exact cell average.
    """
    _check_field(U, s)
    grid = U.grid
    B = _as_cylinder(B, grid.dim)
    op = assemble(grid, B.A)
    energy = weighted_energy(U.values, U.ladder, op.K, op.M, s)
    MC = weighted_mass(grid, as_scalar_coefficient(C))
    u0 = U.values[:, 0]
    trace = 2.0 * s * trace_constant(s) * float(u0 @ MC @ u0)
    averaged = _averaged_weight_energy(U, op.K, op.M)
    return FunctionalReport(energy, trace, energy - trace, abs(averaged - energy))


def functional_V(U, pair1, pair2, s):
    """Variation V(U) = M_2(U) - M_1(U); each pair is (A_i, C_i) or (B_i, C_i)."""
    (B1, C1), (B2, C2) = pair1, pair2
    m1 = functional_M(U, B1, C1, s)
    m2 = functional_M(U, B2, C2, s)
    return m2.total - m1.total


def variation_direct(U, pair1, pair2, s):
    """V(U) from the difference integrand: (B2 - B1) energy + 2 s c_s int (C1 - C2) U0^2."""
    _check_field(U, s)
    (B1, C1), (B2, C2) = pair1, pair2
    grid = U.grid
    A1 = _as_cylinder(B1, grid.dim).A
    A2 = _as_cylinder(B2, grid.dim).A
    K_diff = assemble_stiffness(grid, A2 - A1, check=False)
    zero_mass = np.zeros_like(K_diff)
    # the y-block of B2 - B1 vanishes, so only the x-gradient part remains
    energy = weighted_energy(U.values, U.ladder, K_diff, zero_mass, s)
    C_diff = as_scalar_coefficient(C1) - as_scalar_coefficient(C2)
    MC = weighted_mass(grid, C_diff)
    u0 = U.values[:, 0]
    return energy + 2.0 * s * trace_constant(s) * float(u0 @ MC @ u0)


class ManufacturedField:
    """Closed-form field on Omega x [0, Y] given as a sympy expression.

    Variables are ``x`` (1D) or ``x1, x2`` (2D) and ``y``. Derivatives are
    obtained symbolically.
    """

    def __init__(self, expr, dim=1):
        self.dim = dim
        self.xs = sympy.symbols("x") if dim == 1 else sympy.symbols("x1 x2")
        self.xs = (self.xs,) if dim == 1 else tuple(self.xs)
        self.y = sympy.Symbol("y")
        syms = self.xs + (self.y,)
        if isinstance(expr, str):
            expr = sympy.sympify(expr, locals={str(v): v for v in syms})
        self.expr = expr
        grad = [sympy.diff(expr, v) for v in syms]
        hess = [[sympy.diff(g, v) for v in syms] for g in grad]
        self._f = sympy.lambdify(syms, expr, "numpy")
        self._grad = [sympy.lambdify(syms, g, "numpy") for g in grad]
        self._hess = [[sympy.lambdify(syms, h, "numpy") for h in row] for row in hess]

    @staticmethod
    def _eval(fn, coords):
        return np.broadcast_to(fn(*coords), np.broadcast(*coords).shape).astype(float)

    def value(self, *coords):
        return self._eval(self._f, coords)

    def gradient(self, *coords):
        return [self._eval(g, coords) for g in self._grad]

    def hessian(self, *coords):
        return [[self._eval(h, coords) for h in row] for row in self._hess]


def _lattice(axes):
    return np.meshgrid(*axes, indexing="ij")


def _b_on_lattice(B, axes):
    """A(x) sampled on the x-lattice, shape (*x_shape, dim, dim)."""
    xs = _lattice(axes[:-1])
    pts = np.column_stack([c.ravel() for c in xs])
    A = B.A.sample(pts)
    return A.reshape(*xs[0].shape, B.dim, B.dim)


def _div_A(B, axes, step=1e-3):
    """Row divergence sum_i d_i A_ij on the x-lattice, by 4th-order differences."""
    xs = _lattice(axes[:-1])
    pts = np.column_stack([c.ravel() for c in xs])
    out = np.zeros((len(pts), B.dim))
    for i in range(B.dim):
        e = np.zeros(B.dim)
        e[i] = step
        d = (
            -B.A.sample(pts + 2 * e)
            + 8 * B.A.sample(pts + e)
            - 8 * B.A.sample(pts - e)
            + B.A.sample(pts - 2 * e)
        ) / (12 * step)
        out += d[:, i, :]
    return out.reshape(*xs[0].shape, B.dim)


def _diff(f, x, axis, order=4):
    """First derivative along ``axis``.

    Uniform axes with at least five nodes get 4th-order stencils (one-sided
    near the ends); otherwise second-order ``np.gradient`` is used.
    """
    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(x)
    h = (x[-1] - x[0]) / (n - 1) if n > 1 else 0.0
    uniform = n >= 5 and np.allclose(np.diff(x), h, rtol=1e-10, atol=0.0)
    if order == 2 or not uniform:
        return np.gradient(f, x, axis=axis, edge_order=2)
    g = np.moveaxis(f, axis, 0)
    d = np.empty_like(g)
    d[2:-2] = (g[:-4] - 8 * g[1:-3] + 8 * g[3:-1] - g[4:]) / (12 * h)
    d[0] = (-25 * g[0] + 48 * g[1] - 36 * g[2] + 16 * g[3] - 3 * g[4]) / (12 * h)
    d[1] = (-3 * g[0] - 10 * g[1] + 18 * g[2] - 6 * g[3] + g[4]) / (12 * h)
    d[-1] = (25 * g[-1] - 48 * g[-2] + 36 * g[-3] - 16 * g[-4] + 3 * g[-5]) / (12 * h)
    d[-2] = (3 * g[-1] + 10 * g[-2] - 18 * g[-3] + 6 * g[-4] - g[-5]) / (12 * h)
    return np.moveaxis(d, 0, axis)


def _grad(f, axes, order):
    return [_diff(f, axes[i], i, order) for i in range(len(axes))]


def _expand(arr, ny):
    return np.repeat(arr[..., None], ny, axis=-1)


def _weight(y, a):
    with np.errstate(divide="ignore"):
        return np.where(y > 0, y**a, 0.0 if a > 0 else (1.0 if a == 0 else np.inf))


def picone_sides(
    U, v, B, s, axes, derivatives="fd", floor=1e-8, return_terms=False, fd_order=4
):
    """Both sides of the Picone identity on a tensor lattice.

    Returns (G, R) with

        G = sum y^a B_ij X^i X^j + sum_i D_i(U^2 Y^i),
        R = sum y^a B_ij D_i U D_j U + (U^2 / v) div(y^a B grad v),

    where X^i = v D_i(U / v) and Y^i = y^a (B grad v)_i / v. ``U`` and ``v``
    are arrays on the lattice spanned by ``axes`` (x axes first, y last) when
    ``derivatives="fd"``, or :class:`ManufacturedField` objects when
    ``derivatives="analytic"``. ``fd_order`` (2 or 4) selects the difference
    stencils on uniform axes. With ``return_terms=True`` the sum of the
    absolute values of the four terms is returned as a third item.
    """
    a = 1.0 - 2.0 * float(s)
    dim = len(axes) - 1
    B = _as_cylinder(B, dim)
    coords = _lattice(axes)
    y = coords[-1]
    w = _weight(y, a)
    ny = len(axes[-1])
    A = _expand(_b_on_lattice(B, axes), ny)  # (*x, ny, d, d) after moveaxis
    A = np.moveaxis(A, -1, dim)
    n1 = dim + 1

    if derivatives == "analytic":
        Uv = U.value(*coords)
        vv = v.value(*coords)
        dU = U.gradient(*coords)
        dv = v.gradient(*coords)
        Hv = v.hessian(*coords)
    elif derivatives == "fd":
        Uv = np.asarray(U, dtype=float)
        vv = np.asarray(v, dtype=float)
        dU = _grad(Uv, axes, fd_order)
        dv = _grad(vv, axes, fd_order)
    else:
        raise InvalidArgumentError(f"unknown derivative mode {derivatives!r}")

    if np.min(np.abs(vv)) < floor:
        raise DivisionHazardError(
            f"|v| drops to {np.min(np.abs(vv)):.3e}, below the floor {floor}",
            floor=floor,
        )

    def Bmul(vec):
        """(B vec) component-wise; vec is a list of n+1 lattice arrays."""
        out = []
        for i in range(dim):
            out.append(sum(A[..., i, j] * vec[j] for j in range(dim)))
        out.append(vec[dim])
        return out

    def quad(p, q):
        Bq = Bmul(q)
        return w * sum(p[i] * Bq[i] for i in range(n1))

    ratio = Uv / vv
    if derivatives == "fd":
        dratio = _grad(ratio, axes, fd_order)
        X = [vv * dratio[i] for i in range(n1)]
        Bdv = Bmul(dv)
        Yf = [w * Bdv[i] / vv for i in range(n1)]
        flux_div = sum(
            _diff(Uv**2 * Yf[i], axes[i], i, fd_order) for i in range(n1)
        )
        Lv = sum(
            _diff(w * Bdv[i], axes[i], i, fd_order) for i in range(n1)
        )
    else:
        X = [dU[i] - ratio * dv[i] for i in range(n1)]
        Bdv = Bmul(dv)
        Yf = [w * Bdv[i] / vv for i in range(n1)]
        divA = np.moveaxis(_expand(_div_A(B, axes), ny), -1, dim)
        div_x = sum(
            A[..., i, j] * Hv[i][j] for i in range(dim) for j in range(dim)
        ) + sum(divA[..., j] * dv[j] for j in range(dim))
        with np.errstate(divide="ignore", invalid="ignore"):
            dw = np.where(y > 0, a * y ** (a - 1), 0.0)
        Lv = w * div_x + dw * dv[dim] + w * Hv[dim][dim]
        # D_i(U^2 Y^i) = 2 U D_iU Y^i + U^2 (Lv / v - y^a grad v.B grad v / v^2)
        flux_div = 2 * Uv * sum(dU[i] * Yf[i] for i in range(n1)) + Uv**2 * (
            Lv / vv - quad(dv, dv) / vv**2
        )

    terms = (quad(X, X), flux_div, quad(dU, dU), Uv**2 / vv * Lv)
    G = terms[0] + terms[1]
    R = terms[2] + terms[3]
    if return_terms:
        return G, R, sum(np.abs(t) for t in terms)
    return G, R


def picone_residual(
    U, v, B, s, axes=None, derivatives="fd", floor=1e-8, scale="sides", fd_order=4
):
    """Max over interior lattice nodes of the normalized mismatch |G - R| / scale.

    ``scale="sides"`` divides by |G| + |R| + 1e-30; ``scale="terms"`` by the
    summed magnitudes of the four terms of the identity. Where both sides
    vanish while their terms do not, the "sides" ratio only converges under
    refinement with the 4th-order stencils (``fd_order=4``, the default).

    ``U`` and ``v`` may be lattice arrays, :class:`ManufacturedField` objects
    (analytic derivatives, or sampled when ``derivatives="fd"``), or
    :class:`ExtensionField` objects on a structured grid. Extension fields are
    padded with their zero lateral boundary values.

    Raises
    ------
    DivisionHazardError
        If |v| falls below ``floor`` anywhere on the lattice.
    """
    if isinstance(U, ExtensionField) or isinstance(v, ExtensionField):
        field = U if isinstance(U, ExtensionField) else v
        axes = tuple(field.grid.lattice_axes()) + (field.ladder.nodes,)
        U = _field_to_lattice(U) if isinstance(U, ExtensionField) else U
        v = _field_to_lattice(v) if isinstance(v, ExtensionField) else v
    if axes is None:
        raise InvalidArgumentError("lattice axes are required for array or manufactured input")
    axes = tuple(np.asarray(ax, dtype=float) for ax in axes)
    a = 1.0 - 2.0 * float(s)
    trim_y0 = a < 0 and axes[-1][0] == 0.0
    if trim_y0:
        # the weight is infinite at y = 0; work on y > 0 only
        axes = axes[:-1] + (axes[-1][1:],)
        if not isinstance(U, ManufacturedField):
            U = np.asarray(U)[..., 1:]
        if not isinstance(v, ManufacturedField):
            v = np.asarray(v)[..., 1:]
    if derivatives == "fd":
        coords = _lattice(axes)
        if isinstance(U, ManufacturedField):
            U = U.value(*coords)
        if isinstance(v, ManufacturedField):
            v = v.value(*coords)
    G, R, mag = picone_sides(
        U, v, B, s, axes, derivatives=derivatives, floor=floor, return_terms=True,
        fd_order=fd_order,
    )
    inner = tuple(slice(1, -1) for _ in axes)
    G, R, mag = G[inner], R[inner], mag[inner]
    if scale == "terms":
        denom = mag + 1e-30
    elif scale == "sides":
        denom = np.abs(G) + np.abs(R) + 1e-30
    else:
        raise InvalidArgumentError(f"unknown residual scale {scale!r}")
    return float(np.max(np.abs(G - R) / denom))


def _field_to_lattice(U):
    grid = U.grid
    full = np.zeros((grid.n_nodes, U.ladder.size))
    full[grid.interior] = U.values
    return grid.to_lattice(full)


def rayleigh_min(fp, pot):
    """Smallest eigenvalue of Lambda^s - C~ and its grid-function eigenvector.

    mu_1 <= 0 exactly when some admissible trace makes M(U) <= 0 for its
    spectral extension, since M = 2 s c_s u^T (Lambda^s - C~) u in modal terms.
    """
    spec = frac_schroedinger_spectrum(fp, pot)
    return float(spec.mu[0]), spec.vectors[:, 0].copy()
