"""Generalized eigendecomposition K phi = lambda M phi and the heat semigroup."""

from dataclasses import dataclass
import math

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    InvalidArgumentError,
    SingularMassError,
)

__all__ = [
    "SpectralDecomposition",
    "eigendecompose",
    "jacobi_eigh",
    "project",
    "reconstruct",
    "heat_apply",
    "heat_kernel",
    "heat_kernel_matrix",
    "normalize_signs",
]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues and M-orthonormal eigenvectors (as columns)."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    operator: object

    @property
    def n(self):
        return len(self.eigenvalues)

    @property
    def grid(self):
        return self.operator.grid

    @property
    def M(self):
        return self.operator.M

    @property
    def K(self):
        return self.operator.K

    def mode(self, k):
        """Eigenvector ``k`` using 1-based numbering as in lambda_1 <= lambda_2 ..."""
        return self.vectors[:, k - 1].copy()


def normalize_signs(vectors, rtol=1e-8):
    """Flip columns so the first entry of (near-)maximal magnitude is positive.

    Entries within ``rtol`` of the column maximum count as ties; the lowest
    index wins, which keeps the choice stable under rounding.
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    mag = np.abs(vectors)
    peak = mag.max(axis=0)
    for k in range(vectors.shape[1]):
        if peak[k] == 0:
            continue
        first = np.flatnonzero(mag[:, k] >= (1 - rtol) * peak[k])[0]
        if vectors[first, k] < 0:
            vectors[:, k] *= -1
    return vectors


def jacobi_eigh(S, tol=1e-12, max_sweeps=50):
    """Cyclic Jacobi eigensolver for a dense symmetric matrix.

    Iterates until the off-diagonal Frobenius norm is at most ``tol`` times
    the Frobenius norm of ``S``. Returns ascending eigenvalues and the
    orthogonal eigenvector matrix.
    """
    A = np.array(S, dtype=float, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0 or n == 1:
        return np.diag(A).copy(), V

    def off_norm():
        return float(np.linalg.norm(A - np.diag(np.diag(A))))

    for _ in range(max_sweeps):
        if off_norm() <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                diff = A[q, q] - A[p, p]
                if apq == 0.0:
                    continue
                if abs(apq) < 1e-18 * abs(diff):
                    # rotation angle below rounding; annihilating directly is exact to eps
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    else:
        achieved = off_norm() / scale
        if achieved > tol:
            raise ConvergenceError(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps "
                f"(relative off-diagonal norm {achieved:.3e})",
                residual=achieved,
            )
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def eigendecompose(op, method="lapack", tol=1e-12, max_sweeps=50):
    """All eigenpairs of K phi = lambda M phi for an assembled operator.

    The pencil is reduced to a standard symmetric problem through the
    Cholesky factor of M. ``method="lapack"`` diagonalizes the reduced matrix
    with LAPACK's symmetric driver, ``method="jacobi"`` with cyclic Jacobi
    rotations (only sensible for small problems).

    Raises
    ------
    SingularMassError
        If M is not positive definite.
    ConvergenceError
        If Jacobi exceeds ``max_sweeps``.
    """
    K, M = np.asarray(op.K), np.asarray(op.M)
    try:
        L = sla.cholesky(M, lower=True)
    except sla.LinAlgError as exc:
        raise SingularMassError(f"mass matrix factorization failed: {exc}") from exc
    # S = L^{-1} K L^{-T}
    tmp = sla.solve_triangular(L, K, lower=True)
    S = sla.solve_triangular(L, tmp.T, lower=True)
    S = 0.5 * (S + S.T)
    if method == "lapack":
        w, Z = sla.eigh(S)
    elif method == "jacobi":
        w, Z = jacobi_eigh(S, tol=tol, max_sweeps=max_sweeps)
    else:
        raise InvalidArgumentError(f"unknown eigen method {method!r}")
    Phi = sla.solve_triangular(L.T, Z, lower=False)
    Phi = normalize_signs(Phi)
    w.setflags(write=False)
    Phi.setflags(write=False)
    return SpectralDecomposition(w, Phi, op)


def _check_vector(dec, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (dec.n,):
        raise DimensionMismatchError(
            f"grid function has shape {u.shape}, expected ({dec.n},)"
        )
    return u


def project(dec, u):
    """Modal coefficients u_k = phi_k^T M u."""
    u = _check_vector(dec, u)
    return dec.vectors.T @ (dec.M @ u)


def reconstruct(dec, coeffs):
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (dec.n,):
        raise DimensionMismatchError(
            f"coefficient vector has shape {coeffs.shape}, expected ({dec.n},)"
        )
    return dec.vectors @ coeffs


def heat_apply(dec, t, u):
    """exp(-t L) u = sum_k exp(-lambda_k t) u_k phi_k."""
    if not t >= 0:
        raise InvalidArgumentError(f"heat semigroup needs t >= 0, got {t}")
    coeffs = project(dec, u)
    return reconstruct(dec, np.exp(-dec.eigenvalues * t) * coeffs)


def heat_kernel(dec, t, i, j):
    """W_t(x_i, x_j) = sum_k exp(-t lambda_k) phi_k(x_i) phi_k(x_j).

    ``i`` and ``j`` index interior nodes. The product phi_k(x_i) phi_k(x_j)
    is formed first, so the result is bitwise symmetric in (i, j).
    """
    if not t > 0:
        raise InvalidArgumentError(f"heat kernel needs t > 0, got {t}")
    pair = dec.vectors[i] * dec.vectors[j]
    return float(np.dot(np.exp(-t * dec.eigenvalues), pair))


def heat_kernel_matrix(dec, t):
    """All interior node pairs at once; returns the kernel and a rounding bound.

    The bound is ``n * eps * sum_k exp(-t lambda_k) |phi_k(x_i) phi_k(x_j)|``,
    a standard a-priori estimate for the floating-point error of each sum.
    """
    if not t > 0:
        raise InvalidArgumentError(f"heat kernel needs t > 0, got {t}")
    w = np.exp(-t * dec.eigenvalues)
    Phi = dec.vectors
    W = (Phi * w) @ Phi.T
    W = 0.5 * (W + W.T)
    bound = dec.n * np.finfo(float).eps * ((np.abs(Phi) * w) @ np.abs(Phi).T)
    return W, bound
