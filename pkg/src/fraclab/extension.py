"""Extension U(x, y) of trace data to the cylinder and its weighted Neumann trace.

The extension solves div(y^a B grad U) = 0 on Omega x (0, Y] with U(., 0) = u,
U = 0 on the lateral boundary and a homogeneous Neumann condition at y = Y.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AccuracyError, AccuracyWarning, InvalidArgumentError
from .fractional import gamma, validate_order
from .spectral import project, reconstruct

__all__ = [
    "YLadder",
    "ExtensionField",
    "make_ladder",
    "trace_constant",
    "kernel_profile",
    "extend_spectral",
    "extend_direct",
    "neumann_trace",
    "weighted_energy",
    "cell_energies",
]


def trace_constant(s):
    """c_s = Gamma(1 - s) / (4^s Gamma(1 + s)); equals 1 at s = 1/2."""
    s = validate_order(s)
    return gamma(1.0 - s) / (4.0**s * gamma(1.0 + s))


@dataclass(frozen=True, eq=False)
class YLadder:
    """Graded nodes 0 = y_0 < ... < y_Ny = Y in the extension variable."""

    nodes: np.ndarray
    Y: float
    gamma: float
    s: float

    def __post_init__(self):
        y = np.asarray(self.nodes, dtype=float)
        if y[0] != 0.0 or not np.all(np.diff(y) > 0):
            raise InvalidArgumentError("ladder must start at 0 and increase strictly")
        y.setflags(write=False)
        object.__setattr__(self, "nodes", y)

    @property
    def size(self):
        return len(self.nodes)

    @property
    def midpoints(self):
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @property
    def widths(self):
        return np.diff(self.nodes)


def make_ladder(s, lambda1, Y_factor=14.0, Ny=64, gamma=3.0, first_node_power=1e-3):
    """Ladder y_j = Y (j / Ny)^gamma with Y = Y_factor / sqrt(lambda1).

    When y_1^(2s) exceeds ``first_node_power`` the first cell is split
    geometrically (ratio 4) until it does not.
    """
    s = validate_order(s)
    if Ny < 4 or gamma < 1 or not (Y_factor > 0 and lambda1 > 0):
        raise InvalidArgumentError(
            f"invalid ladder parameters Y_factor={Y_factor}, Ny={Ny}, gamma={gamma}"
        )
    Y = Y_factor / math.sqrt(lambda1)
    y = Y * (np.arange(Ny + 1) / Ny) ** gamma
    extra = []
    first = y[1]
    y_max = first_node_power ** (1.0 / (2.0 * s))
    while first ** (2 * s) > first_node_power and first > y_max:
        first /= 4.0
        extra.append(first)
    if extra:
        y = np.concatenate([[0.0], np.sort(extra), y[1:]])
    return YLadder(y, Y, float(gamma), s)


@dataclass(frozen=True, eq=False)
class ExtensionField:
    """Values U(x_i, y_j) on interior nodes (rows) by ladder nodes (columns)."""

    values: np.ndarray
    s: float
    ladder: YLadder
    grid: object
    method: str = "spectral"
    operator: object = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_interior, self.ladder.size):
            raise InvalidArgumentError(
                f"field shape {v.shape} does not match grid/ladder "
                f"({self.grid.n_interior}, {self.ladder.size})"
            )
        if not np.all(np.isfinite(v)):
            raise AccuracyError("extension field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def trace(self):
        return self.values[:, 0].copy()


def _profile_logs(s, lam, y):
    """Peak location and log-prefactor for the tau = log t form of the profile."""
    lam = np.asarray(lam, dtype=float)
    q = 0.25 * y * y
    # stationary point of -q/t - lam t - s log t, written to avoid cancellation
    z = 2.0 * q / (s + np.sqrt(s * s + 4.0 * lam * q))
    tau_star = np.log(z)

    def f(tau):
        return -q * np.exp(-tau) - lam * np.exp(tau) - s * tau

    return f, tau_star


def kernel_profile(s, lam, y, rtol=1e-14, window=46.0, max_nodes=1 << 14):
    """Per-mode Poisson profile

        rho_s(lambda, y) = y^(2s) / (4^s Gamma(s)) * int_0^inf exp(-y^2/(4t) - lambda t) t^(-1-s) dt,

    evaluated by trapezoid sums in tau = log t over the window where the
    integrand exceeds exp(-window) times its peak, doubling the node count
    until successive sums agree to ``rtol``. ``lam`` may be an array.
    rho_s(lambda, 0) = 1 is returned exactly.
    """
    s = validate_order(s)
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    if not np.all(lam_arr > 0):
        raise InvalidArgumentError("profile needs lambda > 0")
    y = float(y)
    if not y >= 0:
        raise InvalidArgumentError(f"profile needs y >= 0, got {y}")
    if y == 0.0:
        out = np.ones_like(lam_arr)
        return out if np.ndim(lam) else float(out[0])

    f, tau_star = _profile_logs(s, lam_arr, y)
    f_star = f(tau_star)
    # bracket the window by outward doubling
    lo = np.full_like(lam_arr, 1.0)
    hi = np.full_like(lam_arr, 1.0)
    for _ in range(60):
        need = f(tau_star - lo) - f_star > -window
        if not need.any():
            break
        lo[need] *= 2.0
    for _ in range(60):
        need = f(tau_star + hi) - f_star > -window
        if not need.any():
            break
        hi[need] *= 2.0
    a, b = tau_star - lo, tau_star + hi

    log_pref = 2 * s * math.log(y) - s * math.log(4.0) - math.log(gamma(s))
    n = 32
    prev = None
    while True:
        frac = np.linspace(0.0, 1.0, n + 1)
        tau = a[:, None] + (b - a)[:, None] * frac[None, :]
        vals = np.exp(f(tau.T).T - f_star[:, None])
        h = (b - a) / n
        integral = h * (vals.sum(axis=1) - 0.5 * (vals[:, 0] + vals[:, -1]))
        est = np.exp(log_pref + f_star) * integral
        if prev is not None:
            scale = np.maximum(np.abs(est), np.finfo(float).tiny)
            err = np.max(np.abs(est - prev) / scale)
            if err <= rtol:
                break
            if 2 * n > max_nodes:
                raise AccuracyError(
                    f"profile quadrature stalled at {n} nodes (estimate {err:.3e})",
                    error_estimate=float(err),
                )
        prev = est
        n *= 2
    return est if np.ndim(lam) else float(est[0])


def extend_spectral(fp, u, ladder):
    """U(., y) = sum_k u_k rho_s(lambda_k, y) phi_k, with U(., 0) = u exactly."""
    if abs(ladder.s - fp.s) > 1e-15:
        raise InvalidArgumentError("ladder was configured for a different s")
    dec = fp.decomposition
    u = np.asarray(u, dtype=float)
    coeffs = project(dec, u)
    values = np.empty((dec.n, ladder.size))
    values[:, 0] = u
    for j, y in enumerate(ladder.nodes[1:], start=1):
        values[:, j] = reconstruct(dec, kernel_profile(fp.s, dec.eigenvalues, y) * coeffs)
    return ExtensionField(values, fp.s, ladder, dec.grid, "spectral", dec.operator)


def _ladder_matrices(ladder, a):
    """1D P1 mass and stiffness in y with weight y^a frozen at cell midpoints."""
    h = ladder.widths
    w = ladder.midpoints**a
    n = ladder.size
    diag_m = np.zeros(n)
    diag_k = np.zeros(n)
    diag_m[:-1] += w * h / 3.0
    diag_m[1:] += w * h / 3.0
    diag_k[:-1] += w / h
    diag_k[1:] += w / h
    My = sp.diags([w * h / 6.0, diag_m, w * h / 6.0], [-1, 0, 1], format="csr")
    Ky = sp.diags([-w / h, diag_k, -w / h], [-1, 0, 1], format="csr")
    return My, Ky


def extend_direct(fp, op, u, ladder):
    """Finite element solution of the weighted extension problem.

    Tensor-product P1 elements: the assembled x-operator ``op`` times 1D
    elements on the ladder, solved with a sparse direct factorization.
    """
    if abs(ladder.s - fp.s) > 1e-15:
        raise InvalidArgumentError("ladder was configured for a different s")
    if op.grid is not fp.grid:
        raise InvalidArgumentError("operator and fractional power live on different grids")
    u = np.asarray(u, dtype=float)
    n = op.n
    if u.shape != (n,):
        raise InvalidArgumentError(f"trace has shape {u.shape}, expected ({n},)")
    My, Ky = _ladder_matrices(ladder, fp.a)
    K = sp.csr_matrix(np.asarray(op.K))
    M = sp.csr_matrix(np.asarray(op.M))
    # unknown ordering: block j holds U(., y_j)
    system = (sp.kron(My, K) + sp.kron(Ky, M)).tocsc()
    free = np.arange(n, n * ladder.size)
    A_ff = system[free][:, free]
    A_fb = system[free][:, :n]
    rhs = -(A_fb @ u)
    try:
        lu = spla.splu(A_ff.tocsc())
        sol = lu.solve(rhs)
    except RuntimeError as exc:
        raise AccuracyError(f"extension linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise AccuracyError("extension linear solve produced non-finite values")
    values = np.empty((n, ladder.size))
    values[:, 0] = u
    values[:, 1:] = sol.reshape(ladder.size - 1, n).T
    return ExtensionField(values, fp.s, ladder, op.grid, "direct", op)


def cell_energies(values, ladder, K, M, s):
    """Per-cell contributions to int int y^a (A grad_x U . grad_x U + U_y^2).

    ``values`` is (n_interior, n_ladder) and U is linear in y on each cell.
    The weight is frozen at cell midpoints; the polynomial part is exact.
    """
    a = 1.0 - 2.0 * s
    U = np.asarray(values, dtype=float)
    h = ladder.widths
    w = ladder.midpoints**a
    KU = np.asarray(K) @ U
    MU = np.asarray(M) @ U
    kdiag = np.einsum("ij,ij->j", U, KU)
    koff = np.einsum("ij,ij->j", U[:, :-1], KU[:, 1:])
    mdiag = np.einsum("ij,ij->j", U, MU)
    moff = np.einsum("ij,ij->j", U[:, :-1], MU[:, 1:])
    grad_x = w * h / 6.0 * (2 * kdiag[:-1] + 2 * kdiag[1:] + 2 * koff)
    grad_y = w / h * (mdiag[:-1] + mdiag[1:] - 2 * moff)
    return grad_x + grad_y


def weighted_energy(values, ladder, K, M, s):
    """Weighted Dirichlet energy of a field; see :func:`cell_energies`."""
    return float(np.sum(cell_energies(values, ladder, K, M, s)))


# exponents of the small-y expansion of -(rho - 1) / y^(2s) beyond the constant
def _trace_exponents(s, count):
    exps = []
    k = 1
    while len(exps) < count:
        exps.extend([2.0 * k - 2.0 * s, 2.0 * k])
        k += 1
    return exps[:count]


def _richardson(ys, D, s, terms):
    """Constant term of the fit; ``D`` is (rows, len(ys))."""
    exps = _trace_exponents(s, terms)
    V = np.column_stack([np.ones_like(ys)] + [ys**p for p in exps])
    return np.linalg.solve(V, D.T)[0]


def _flux_trace(fp, U):
    """Weak flux at y = 0 of a direct field: M^{-1} R_0 / (2s).

    R_0 is the y = 0 row of the tensor system applied to the discrete field,
    i.e. the discrete weighted conormal derivative -lim y^a U_y.
    """
    op = U.operator
    My, Ky = _ladder_matrices(U.ladder, fp.a)
    my0 = My.getrow(0).toarray().ravel()
    ky0 = Ky.getrow(0).toarray().ravel()
    R0 = np.asarray(op.K) @ (U.values @ my0) + np.asarray(op.M) @ (U.values @ ky0)
    return np.linalg.solve(np.asarray(op.M), R0) / (2.0 * fp.s)


def neumann_trace(fp, U, nodes=4, full_output=False, method="auto"):
    """Weighted Neumann trace -lim (U(., y) - U(., 0)) / y^(2s), i.e. c_s L^s u.

    ``method="richardson"`` fits the difference quotients at the ``nodes``
    smallest positive ladder nodes to c + sum_m a_m y^(p_m) with the
    exponents of the profile's small-y expansion (2 - 2s, 2, 4 - 2s, ...);
    the same fit on the next window gives the error estimate, and an
    :class:`AccuracyWarning` is issued above 1e-3 relative.

    ``method="flux"`` (direct fields only) uses the discrete weak flux at
    y = 0 divided by 2s, since -y^a U_y -> 2s c_s L^s u; it has no cheap
    a-posteriori estimate and reports nan. ``"auto"`` picks flux for direct
    fields and Richardson otherwise.
    """
    if method == "auto":
        method = "flux" if U.method == "direct" and U.operator is not None else "richardson"
    if method == "flux":
        if U.operator is None:
            raise InvalidArgumentError("flux trace needs the field's assembled operator")
        best = _flux_trace(fp, U)
        estimate = float("nan")
        if full_output:
            return best, estimate
        return best
    if method != "richardson":
        raise InvalidArgumentError(f"unknown trace method {method!r}")
    if nodes < 4:
        raise InvalidArgumentError("extrapolation needs at least 4 ladder nodes")
    if U.ladder.size < nodes + 2:
        raise InvalidArgumentError("ladder too short for the extrapolation window")
    s = fp.s
    ys = U.ladder.nodes
    base = U.values[:, :1]

    def window(start):
        idx = np.arange(start, start + nodes)
        D = -(U.values[:, idx] - base) / ys[idx] ** (2 * s)
        return _richardson(ys[idx], D, s, nodes - 1)

    best = window(1)
    check = window(2)
    scale = max(float(np.linalg.norm(best)), np.finfo(float).tiny)
    estimate = float(np.linalg.norm(best - check)) / scale
    if estimate > 1e-3:
        warnings.warn(
            f"Neumann trace extrapolation is unsteady (relative change {estimate:.2e})",
            AccuracyWarning,
            stacklevel=2,
        )
    if full_output:
        return best, estimate
    return best
