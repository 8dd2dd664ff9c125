"""Desk-scale checks of the comparison results on calibrated coefficient pairs.

A "solution" of (L^s - C) u = 0 is a kernel vector of the discrete matrix
Lambda^s - C~, accepted when its eigenvalue is within ``gate * lambda_1^s``
of zero. Generic coefficients have an empty kernel, so scenarios are built
by shifting a potential with an eigenvalue (see :func:`calibrate`).
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InvalidArgumentError
from .extension import extend_spectral, make_ladder
from .fractional import (
    FracPower,
    frac_schroedinger_spectrum,
    modal_potential,
    validate_order,
)
from .grid import (
    MatrixCoefficient,
    ScalarCoefficient,
    as_matrix_coefficient,
    as_scalar_coefficient,
    assemble,
)
from .picone import functional_M, functional_V, variation_direct
from .spectral import eigendecompose

__all__ = [
    "ProblemPair",
    "HypothesisFlags",
    "NodalReport",
    "ComparisonReport",
    "LeightonReport",
    "check_hypotheses",
    "calibrate",
    "kernel_indices",
    "nodal_report",
    "run_comparison",
    "run_leighton",
    "random_pair",
]

CONSISTENT = "consistent"
VACUOUS = "vacuous"
VIOLATION = "violation"

KERNEL_GATE = 1e-6
V_SLACK = 0.02


@dataclass(frozen=True, eq=False)
class ProblemPair:
    """Equations (L_1^s - C_1) u = 0 and (L_2^s - C_2) w = 0 on one grid."""

    grid: object
    A1: object
    C1: object
    A2: object
    C2: object
    s: float
    label: str = ""

    def __post_init__(self):
        dim = self.grid.dim
        object.__setattr__(self, "s", validate_order(self.s))
        object.__setattr__(self, "A1", as_matrix_coefficient(self.A1, dim))
        object.__setattr__(self, "A2", as_matrix_coefficient(self.A2, dim))
        object.__setattr__(self, "C1", as_scalar_coefficient(self.C1))
        object.__setattr__(self, "C2", as_scalar_coefficient(self.C2))


@dataclass(frozen=True)
class HypothesisFlags:
    psd: bool
    ordering: bool
    c1_positive: bool
    min_psd_eigenvalue: float
    min_c_gap: float
    min_c1: float

    @property
    def hold(self):
        return self.psd and self.ordering

    def to_dict(self):
        return {
            "psd": self.psd,
            "ordering": self.ordering,
            "c1_positive": self.c1_positive,
            "min_psd_eigenvalue": self.min_psd_eigenvalue,
            "min_c_gap": self.min_c_gap,
            "min_c1": self.min_c1,
        }


def check_hypotheses(pair, tol=1e-12):
    """Pointwise ordering flags.

    B_2 - B_1 has a zero y-block, so it is PSD exactly when A_2 - A_1 is;
    that is tested at the element centroids (the assembly quadrature points)
    with eigenvalue floor ``-tol * scale``. C_1 - C_2 >= -tol and C_1 > 0 are
    tested at every node, boundary included.
    """
    grid = pair.grid
    pts = grid.centroids()
    A1 = pair.A1.sample(pts)
    A2 = pair.A2.sample(pts)
    diff = A2 - A1
    diff = 0.5 * (diff + diff.transpose(0, 2, 1))
    eig = np.linalg.eigvalsh(diff)
    scale = max(float(np.abs(A1).max()), float(np.abs(A2).max()), 1.0)
    min_eig = float(eig.min())
    c1 = pair.C1.sample(grid.nodes)
    c2 = pair.C2.sample(grid.nodes)
    gap = float(np.min(c1 - c2))
    return HypothesisFlags(
        psd=min_eig >= -tol * scale,
        ordering=gap >= -tol,
        c1_positive=bool(np.all(c1 > 0)),
        min_psd_eigenvalue=min_eig,
        min_c_gap=gap,
        min_c1=float(c1.min()),
    )


def calibrate(fp, C0, k):
    """C_0 + sigma_k, with sigma_k the k-th eigenvalue (1-based) of Lambda^s - C~_0.

    The returned coefficient makes 0 the k-th eigenvalue of Lambda^s - C~.
    """
    k = int(k)
    if not 1 <= k <= fp.decomposition.n:
        raise InvalidArgumentError(
            f"mode index {k} outside 1..{fp.decomposition.n}", code="mode_out_of_range"
        )
    C0 = as_scalar_coefficient(C0)
    spec = frac_schroedinger_spectrum(fp, modal_potential(fp.decomposition, C0))
    sigma = float(spec.mu[k - 1])
    out = C0 + sigma
    out.label = f"{C0.label or 'C0'} + {sigma!r}"
    out.shift = sigma
    return out


def kernel_indices(mu, lambda1_s, gate=KERNEL_GATE):
    """Indices of eigenvalues with |mu| <= gate * lambda_1^s."""
    return [int(i) for i in np.flatnonzero(np.abs(mu) <= gate * lambda1_s)]


@dataclass
class NodalReport:
    interior_zero: bool
    sign_changes: int
    locations: list
    near_zeros: list = field(default_factory=list)

    def to_dict(self):
        return {
            "interior_zero": self.interior_zero,
            "sign_changes": self.sign_changes,
            "locations": [[float(c) for c in np.atleast_1d(p)] for p in self.locations],
            "near_zeros": [[float(c) for c in np.atleast_1d(p)] for p in self.near_zeros],
        }


def nodal_report(grid, u, tol=1e-6):
    """Sign changes over mesh edges between interior nodes, plus near-zero nodes.

    A sign change is an edge whose end values have a negative product; its
    location is the linear interpolation of the crossing along the edge.
    Interior nodes with |u_i| <= tol * max|u| are reported as near-zeros.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_interior,):
        raise InvalidArgumentError(
            f"grid function has shape {u.shape}, expected ({grid.n_interior},)",
            code="dimension_mismatch",
        )
    peak = float(np.max(np.abs(u)))
    if peak == 0.0:
        raise InvalidArgumentError("nodal report of the zero function is undefined")
    full = grid.full_vector(u)
    edges = grid.edges()
    keep = ~grid.boundary[edges[:, 0]] & ~grid.boundary[edges[:, 1]]
    edges = edges[keep]
    ua, ub = full[edges[:, 0]], full[edges[:, 1]]
    crossing = ua * ub < 0
    locations = []
    for (i, j), a, b in zip(edges[crossing], ua[crossing], ub[crossing]):
        t = a / (a - b)
        locations.append((1 - t) * grid.nodes[i] + t * grid.nodes[j])
    if grid.dim == 1:
        locations = sorted(float(p[0]) for p in locations)
    near = grid.interior_nodes[np.abs(u) <= tol * peak]
    near = [float(p[0]) for p in near] if grid.dim == 1 else [p.copy() for p in near]
    count = int(np.count_nonzero(crossing))
    return NodalReport(count > 0 or len(near) > 0, count, locations, near)


def _m_cosine(M, a, b):
    return abs(float(a @ M @ b)) / math.sqrt(float(a @ M @ a) * float(b @ M @ b))


def _setup(grid, A, C, s, method):
    op = assemble(grid, A)
    dec = eigendecompose(op, method=method)
    fp = FracPower(s, dec)
    pot = modal_potential(dec, C)
    return op, fp, frac_schroedinger_spectrum(fp, pot)


@dataclass
class ComparisonReport:
    label: str
    mode: str
    hypotheses: HypothesisFlags
    eq2_kernel: list
    eq2_residual: float
    V: float
    V_direct: float
    V_scale: float
    eq1_kernel: list
    eq1_reports: list
    equality_case: bool
    verdict: str
    reason: str
    mu1_eq1: float = float("nan")
    mu1_eq2: float = float("nan")

    def to_dict(self):
        return {
            "label": self.label,
            "mode": self.mode,
            "hypotheses": self.hypotheses.to_dict(),
            "eq2": {
                "solution_found": bool(self.eq2_kernel),
                "kernel_modes": [k + 1 for k in self.eq2_kernel],
                "residual": self.eq2_residual,
                "mu1": self.mu1_eq2,
            },
            "V": self.V,
            "V_direct": self.V_direct,
            "V_scale": self.V_scale,
            "eq1": {
                "solutions_found": len(self.eq1_kernel),
                "kernel_modes": [k + 1 for k in self.eq1_kernel],
                "mu1": self.mu1_eq1,
                "nodal": [r.to_dict() for r in self.eq1_reports],
            },
            "equality_case": self.equality_case,
            "verdict": self.verdict,
            "reason": self.reason,
        }


def run_comparison(pair, mode="ordering", gate=KERNEL_GATE, ladder=None, method="lapack",
                   zero_tol=1e-6):
    """Gather evidence for the comparison theorem on one coefficient pair.

    Steps: kernel of equation 2 (else vacuous); V(U) on the spectral
    extension of that solution; kernel of equation 1 (else vacuous); nodal
    reports for every eq.-1 solution. ``mode="ordering"`` gates on the pointwise
    hypotheses and cross-checks V(U) >= 0; ``mode="variation"`` gates on V(U)
    itself. A solution without an interior zero is the equality case when it
    is a multiple of the eq.-2 solution; otherwise, with C_1 > 0 and the gate
    passed, the verdict is violation.

    ``ladder`` holds keyword arguments for :func:`make_ladder`.
    """
    if mode not in ("ordering", "variation"):
        raise InvalidArgumentError(f"unknown comparison mode {mode!r}")
    grid, s = pair.grid, pair.s
    flags = check_hypotheses(pair)
    _, fp2, spec2 = _setup(grid, pair.A2, pair.C2, s, method)
    op1, fp1, spec1 = _setup(grid, pair.A1, pair.C1, s, method)
    scale2 = float(fp2.powers[0])
    scale1 = float(fp1.powers[0])
    k2 = kernel_indices(spec2.mu, scale2, gate)
    k1 = kernel_indices(spec1.mu, scale1, gate)
    nan = float("nan")
    base = dict(
        label=pair.label, mode=mode, hypotheses=flags, eq2_kernel=k2,
        mu1_eq1=float(spec1.mu[0]), mu1_eq2=float(spec2.mu[0]),
    )
    if not k2:
        return ComparisonReport(
            **base, eq2_residual=nan, V=nan, V_direct=nan, V_scale=nan, eq1_kernel=k1,
            eq1_reports=[], equality_case=False, verdict=VACUOUS,
            reason="equation 2 has only the trivial solution",
        )
    u2 = spec2.vectors[:, k2[0]]
    residual = abs(float(spec2.mu[k2[0]])) / scale2
    lad = make_ladder(s, float(fp2.decomposition.eigenvalues[0]), **(ladder or {}))
    U = extend_spectral(fp2, u2, lad)
    pair1, pair2 = (pair.A1, pair.C1), (pair.A2, pair.C2)
    V = functional_V(U, pair1, pair2, s)
    V_direct = variation_direct(U, pair1, pair2, s)
    V_scale = max(
        functional_M(U, pair.A1, pair.C1, s).energy,
        functional_M(U, pair.A2, pair.C2, s).energy,
    )
    reports = [nodal_report(grid, spec1.vectors[:, k], zero_tol) for k in k1]
    equality = any(
        not r.interior_zero and _m_cosine(op1.M, spec1.vectors[:, k], u2) >= 1 - 1e-6
        for k, r in zip(k1, reports)
    )
    rest = dict(eq2_residual=residual, V=V, V_direct=V_direct, V_scale=V_scale,
                eq1_kernel=k1, eq1_reports=reports, equality_case=equality)

    gate_ok = flags.hold if mode == "ordering" else V >= -V_SLACK * V_scale
    if not gate_ok:
        why = "pointwise hypotheses fail" if mode == "ordering" else "V(U) < 0"
        return ComparisonReport(**base, **rest, verdict=VACUOUS, reason=why)
    if not k1:
        return ComparisonReport(
            **base, **rest, verdict=VACUOUS,
            reason="equation 1 has only the trivial solution",
        )
    missing = [
        k + 1 for k, r in zip(k1, reports)
        if not r.interior_zero and _m_cosine(op1.M, spec1.vectors[:, k], u2) < 1 - 1e-6
    ]
    if missing and flags.c1_positive:
        return ComparisonReport(
            **base, **rest, verdict=VIOLATION,
            reason=f"eq.-1 solution(s) at mode {missing} have no interior zero",
        )
    if missing:
        why = "zeros on the boundary only; C1 > 0 fails so only closure zeros are claimed"
    elif equality:
        why = "equality case: eq.-1 solution is a multiple of the eq.-2 solution"
    else:
        why = "every eq.-1 solution has an interior zero"
    return ComparisonReport(**base, **rest, verdict=CONSISTENT, reason=why)


@dataclass
class LeightonReport:
    mu1: float
    triggered: bool
    kernel: list
    M_total: float
    M_energy: float
    reports: list
    verdict: str

    def to_dict(self):
        return {
            "mu1": self.mu1,
            "triggered": self.triggered,
            "kernel_modes": [k + 1 for k in self.kernel],
            "M_total": self.M_total,
            "M_energy": self.M_energy,
            "nodal": [r.to_dict() for r in self.reports],
            "verdict": self.verdict,
        }


def run_leighton(grid, A, C, s, gate=KERNEL_GATE, ladder=None, method="lapack",
                 zero_tol=1e-6):
    """Variational-lemma check: if min M <= 0, every solution must vanish.

    The trigger is mu_1 <= gate * lambda_1^s (M is 2 s c_s times the modal
    quadratic form, so its sign over traces is that of mu_1). M is also
    evaluated on the extension of the first kernel solution.
    """
    op, fp, spec = _setup(grid, A, C, s, method)
    scale = float(fp.powers[0])
    kern = kernel_indices(spec.mu, scale, gate)
    mu1 = float(spec.mu[0])
    triggered = mu1 <= gate * scale
    reports = [nodal_report(grid, spec.vectors[:, k], zero_tol) for k in kern]
    M_total = M_energy = float("nan")
    if kern:
        lad = make_ladder(s, float(fp.decomposition.eigenvalues[0]), **(ladder or {}))
        U = extend_spectral(fp, spec.vectors[:, kern[0]], lad)
        rep = functional_M(U, A, C, s)
        M_total, M_energy = rep.total, rep.energy
    if not triggered or not kern:
        verdict = VACUOUS
    elif all(r.interior_zero for r in reports) or kern == [0]:
        # a principal-mode kernel means mu_1 = 0: the boundary zero is the only one claimed
        verdict = CONSISTENT
    else:
        verdict = VIOLATION
    return LeightonReport(mu1, triggered, kern, M_total, M_energy, reports, verdict)


def _wave(rng, amplitude, lift=0.0):
    """lift + a cos(k x + phase) with random k in {1, 2, 3} and a <= amplitude."""
    k = int(rng.integers(1, 4))
    phase = rng.uniform(0, 2 * np.pi)
    amp = amplitude * rng.uniform(0.2, 1.0)
    return lambda x: lift + amp * np.cos(k * x + phase)


def _raised_wave(rng, level):
    """Nonnegative level * (1 + cos(k x + phase)) / 2."""
    k = int(rng.integers(1, 4))
    phase = rng.uniform(0, 2 * np.pi)
    return lambda x: level * 0.5 * (1.0 + np.cos(k * x + phase))


def random_pair(grid, rng, s=None, label=""):
    """Random calibrated pair with diagonal A_1 <= A_2 and C_1 >= C_2.

    C_2 is calibrated at a mode k in {1, 2, 3}. C_1 = C_2 + bump + sigma_j with
    a nonnegative Gaussian bump and j >= 2 the first index keeping the shift
    nonnegative, so the hypotheses hold and eq. 1 has a kernel at mode j.
    """
    dim = grid.dim
    if s is None:
        s = float(rng.choice([0.25, 0.5, 0.75]))
    base = [_wave(rng, 0.4, 1.0) for _ in range(dim)]
    extra = [_raised_wave(rng, rng.uniform(0.0, 0.8)) for _ in range(dim)]

    def diag1(pts):
        vals = np.stack([base[i](pts[:, i]) for i in range(dim)], axis=1)
        return vals[:, :, None] * np.eye(dim)

    def diag2(pts):
        vals = np.stack([base[i](pts[:, i]) + extra[i](pts[:, i]) for i in range(dim)], axis=1)
        return vals[:, :, None] * np.eye(dim)

    A1 = MatrixCoefficient(diag1, dim, vectorized=True, label="random diag A1")
    A2 = MatrixCoefficient(diag2, dim, vectorized=True, label="random diag A2")
    waves = [_wave(rng, 1.0) for _ in range(dim)]
    C0 = ScalarCoefficient(
        lambda pts: sum(waves[i](pts[:, i]) for i in range(dim)), vectorized=True
    )
    k = int(rng.integers(1, 4))
    _, fp2, _ = _setup(grid, A2, 0.0, s, "lapack")
    C2 = calibrate(fp2, C0, k)

    lo = grid.nodes.min(axis=0)
    hi = grid.nodes.max(axis=0)
    centre = rng.uniform(lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo))
    width = 0.2 * float(np.min(hi - lo))
    height = rng.uniform(0.2, 2.0)

    def bump(pts):
        r2 = np.sum((pts - centre) ** 2, axis=1)
        return height * np.exp(-r2 / width**2)

    Cb = C2 + ScalarCoefficient(bump, vectorized=True)
    _, fp1, spec = _setup(grid, A1, Cb, s, "lapack")
    floor = float(np.min(bump(grid.nodes)))
    j = next(i for i in range(1, len(spec.mu)) if spec.mu[i] + floor >= 0)
    C1 = Cb + float(spec.mu[j])
    return ProblemPair(grid, A1, C1, A2, C2, s, label=label or f"random k={k} j={j + 1}")
