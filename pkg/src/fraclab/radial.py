"""Radial reductions, the Liouville transformation and Pruefer zero counting.

Radial profiles satisfy u'' + d u'/r + c u = 0 with d = n + 1 - 2s. For
n = 1 the substitution u = y r^(s-1) removes the first-order term and leaves
y'' + q(r) y = 0 with q = (c r^2 - s^2 + s) / r^2, whose zeros are counted
through the Pruefer phase.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import IntegrationError, InvalidArgumentError

__all__ = [
    "RadialODE",
    "TransformedODE",
    "OscillationEvidence",
    "SturmVerdict",
    "radial_reduce",
    "liouville_transform",
    "initial_phase",
    "integrate_prufer",
    "solve_linear",
    "radial_zeros",
    "oscillation_classify",
    "sturm_compare",
]

OSCILLATORY = "oscillatory-evidence"
NON_OSCILLATORY = "non-oscillatory-evidence"
UNDECIDED = "undecided"

_RTOL = 1e-12
_ATOL = 1e-12
_XTOL = 1e-10


@dataclass(frozen=True)
class RadialODE:
    """u'' + d u'/r + c u = 0."""

    d: float
    c: float
    n: int
    s: float


@dataclass(frozen=True, eq=False)
class TransformedODE:
    """y'' + q(r) y = 0 on (r_min, inf); u = y r^(s - 1) recovers the radial profile."""

    q: object
    s: float
    c: float
    r_min: float = 0.0

    def to_radial(self, r, y, dy):
        """(u, u') from (y, y') at radius r."""
        r = np.asarray(r, dtype=float)
        f = r ** (self.s - 1.0)
        return y * f, dy * f + (self.s - 1.0) * y * f / r

    def from_radial(self, r, u, du):
        """(y, y') from (u, u') at radius r."""
        r = np.asarray(r, dtype=float)
        g = r ** (1.0 - self.s)
        return u * g, du * g + (1.0 - self.s) * u * g / r


@dataclass
class OscillationEvidence:
    """Zeros of a solution on ``interval`` and the windowed classification."""

    interval: tuple
    zeros: np.ndarray
    theta_end: float = float("nan")
    windows: list = field(default_factory=list)
    window_counts: list = field(default_factory=list)
    classification: str = UNDECIDED

    @property
    def count(self):
        return len(self.zeros)

    @property
    def spacings(self):
        return np.diff(self.zeros)

    def spacing_stats(self, tail=5):
        """Mean, min and max spacing, plus the mean of the last ``tail`` spacings."""
        sp = self.spacings
        if len(sp) == 0:
            nan = float("nan")
            return {"mean": nan, "min": nan, "max": nan, "asymptotic": nan}
        return {
            "mean": float(np.mean(sp)),
            "min": float(np.min(sp)),
            "max": float(np.max(sp)),
            "asymptotic": float(np.mean(sp[-tail:])),
        }

    def to_dict(self):
        return {
            "interval": [float(self.interval[0]), float(self.interval[1])],
            "zero_count": self.count,
            "zeros": [float(z) for z in self.zeros],
            "spacing": self.spacing_stats(),
            "windows": [[float(a), float(b)] for a, b in self.windows],
            "window_counts": [int(k) for k in self.window_counts],
            "classification": self.classification,
        }


def radial_reduce(n, s, c):
    """Radial form u'' + (n + 1 - 2s) u'/r + c u = 0.

    ``s = 1`` is accepted as the classical limit (d = n - 1).
    """
    s = float(s)
    if not (0.0 < s <= 1.0):
        raise InvalidArgumentError(
            f"fractional order must lie in (0, 1], got {s}", code="s_out_of_range"
        )
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"dimension must be positive, got {n}")
    return RadialODE(d=n + 1.0 - 2.0 * s, c=float(c), n=n, s=s)


def liouville_transform(ode):
    """Potential q(r) = (c r^2 - s^2 + s) / r^2 of the transformed equation (n = 1 only)."""
    if ode.n != 1 or abs(ode.d - 2.0 * (1.0 - ode.s)) > 1e-14:
        raise InvalidArgumentError(
            f"transformation implemented for n = 1 only (got n={ode.n}, d={ode.d})",
            code="unsupported_damping",
        )
    c, s = ode.c, ode.s
    shift = s - s * s

    def q(r):
        r = np.asarray(r, dtype=float)
        return c + shift / (r * r)

    q.__doc__ = f"({c:g} r^2 + {shift:g}) / r^2"
    return TransformedODE(q=q, s=s, c=c, r_min=0.0)


def initial_phase(y0, dy0, p=1.0):
    """Pruefer angle with y = rho sin(theta), p y' = rho cos(theta), in [0, pi)."""
    if y0 == 0 and dy0 == 0:
        raise InvalidArgumentError("trivial initial data has no phase")
    theta = math.atan2(y0, p * dy0)
    return theta % math.pi if theta != math.pi else 0.0


def _check_interval(q, r0, R):
    r0, R = float(r0), float(R)
    if not (math.isfinite(r0) and math.isfinite(R) and R > r0 >= 0.0):
        raise InvalidArgumentError(f"need 0 <= r0 < R, got [{r0}, {R}]")
    probe = np.linspace(r0, R, 257)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.broadcast_to(np.asarray(q(probe), dtype=float), probe.shape)
    if not np.all(np.isfinite(vals)):
        bad = float(probe[np.flatnonzero(~np.isfinite(vals))[0]])
        raise InvalidArgumentError(f"potential is not finite at r = {bad}", location=bad)
    return r0, R


def integrate_prufer(q, r0, R, theta0=0.0, p=None, include_start=False, rtol=_RTOL):
    """Zeros of y'' + q y = 0 on (r0, R] from the Pruefer phase.

    Integrates theta' = cos^2(theta) / p + q sin^2(theta) with an adaptive
    Runge-Kutta 4(5) pair and dense output. theta only crosses multiples of
    pi upwards, so every crossing theta = k pi is one zero; each is located
    by root bracketing on the dense output to 1e-10 in r. With
    ``include_start`` a zero at r0 itself (theta0 a multiple of pi) is listed.

    Raises
    ------
    IntegrationError
        If the integrator fails (step underflow); carries the failing radius.
    """
    r0, R = _check_interval(q, r0, R)
    theta0 = float(theta0)

    if p is None:
        def rhs(r, th):
            c = math.cos(th[0])
            sn = math.sin(th[0])
            return [c * c + float(q(r)) * sn * sn]
    else:
        def rhs(r, th):
            c = math.cos(th[0])
            sn = math.sin(th[0])
            return [c * c / float(p(r)) + float(q(r)) * sn * sn]

    sol = solve_ivp(rhs, (r0, R), [theta0], method="RK45", rtol=rtol, atol=_ATOL,
                    dense_output=True)
    if sol.status != 0:
        where = float(sol.t[-1])
        raise IntegrationError(
            f"phase integration failed at r = {where:.6g}: {sol.message}", location=where
        )
    theta_end = float(sol.y[0, -1])
    # slack absorbs integration error when a zero sits exactly at R
    slack = 1e-7
    k_first = math.floor(theta0 / math.pi + 1e-12) + 1
    k_last = math.floor((theta_end + slack) / math.pi)
    zeros = []
    if include_start and abs(theta0 - math.pi * round(theta0 / math.pi)) < 1e-12:
        zeros.append(r0)

    def phase(r):
        return float(sol.sol(r)[0])

    for k in range(k_first, k_last + 1):
        target = k * math.pi
        if phase(R) <= target:
            zeros.append(R)
            continue
        # dense output is monotone only up to rounding, so bracket on the steps
        idx = int(np.searchsorted(sol.y[0], target))
        lo = float(sol.t[max(idx - 1, 0)])
        hi = float(sol.t[min(idx, len(sol.t) - 1)])
        if phase(lo) > target:
            lo = r0
        if phase(hi) < target:
            hi = R
        zeros.append(brentq(lambda r: phase(r) - target, lo, hi, xtol=_XTOL))
    ev = OscillationEvidence(interval=(r0, R), zeros=np.asarray(zeros, dtype=float))
    ev.theta_end = theta_end
    return ev


def solve_linear(q, r0, R, y0=0.0, dy0=1.0, r_eval=None, rtol=_RTOL):
    """Direct solution of y'' + q y = 0; returns the scipy solution with dense output."""
    r0, R = _check_interval(q, r0, R)
    sol = solve_ivp(
        lambda r, z: [z[1], -float(q(r)) * z[0]],
        (r0, R), [float(y0), float(dy0)], method="RK45", rtol=rtol, atol=1e-13,
        dense_output=True, t_eval=r_eval,
    )
    if sol.status != 0:
        where = float(sol.t[-1])
        raise IntegrationError(f"integration failed at r = {where:.6g}", location=where)
    return sol


def radial_zeros(ode, r0, R, u0=0.0, du0=1.0, samples=4096):
    """Zeros in (r0, R] of the radial profile, integrated without transformation.

    Used to check that the Liouville substitution preserves zeros.
    """
    r0, R = float(r0), float(R)
    if not r0 > 0:
        raise InvalidArgumentError("radial equation is singular at r = 0; need r0 > 0")
    d, c = ode.d, ode.c
    sol = solve_ivp(
        lambda r, z: [z[1], -d * z[1] / r - c * z[0]],
        (r0, R), [float(u0), float(du0)], method="RK45", rtol=_RTOL, atol=1e-14,
        dense_output=True,
    )
    if sol.status != 0:
        where = float(sol.t[-1])
        raise IntegrationError(f"integration failed at r = {where:.6g}", location=where)
    grid = np.linspace(r0, R, samples + 1)
    vals = sol.sol(grid)[0]
    zeros = []
    for i in range(samples):
        a, b = vals[i], vals[i + 1]
        if i == 0 and a == 0.0:
            continue
        if b == 0.0:
            zeros.append(grid[i + 1])
        elif a * b < 0:
            zeros.append(brentq(lambda r: sol.sol(r)[0], grid[i], grid[i + 1], xtol=_XTOL))
    return np.asarray(zeros)


def _dyadic_edges(r0, R_max, windows):
    if windows is None:
        windows = int(round(math.log2(R_max / r0)))
    windows = int(windows)
    if windows < 4:
        raise InvalidArgumentError(f"need at least 4 windows, got {windows}")
    edges = r0 * (R_max / r0) ** (np.arange(windows + 1) / windows)
    edges[-1] = R_max
    return edges


def oscillation_classify(q, r0=1.0, R_max=256.0, windows=None, y0=0.0, dy0=1.0):
    """Windowed zero counts and an oscillation verdict (evidence only).

    Windows are the geometric intervals [r0 g^j, r0 g^(j+1)] with
    g = (R_max / r0)^(1 / windows); ``windows=None`` uses dyadic windows.
    Zeros at r0 count towards the first window. The verdict is
    oscillatory-evidence when every window holds a zero, and
    non-oscillatory-evidence when the last 75% of the windows hold none.
    """
    r0, R_max = float(r0), float(R_max)
    if not (r0 > 0 and R_max > r0):
        raise InvalidArgumentError(f"need 0 < r0 < R_max, got [{r0}, {R_max}]")
    edges = _dyadic_edges(r0, R_max, windows)
    ev = integrate_prufer(q, r0, R_max, theta0=initial_phase(y0, dy0), include_start=True)
    counts = []
    for j in range(len(edges) - 1):
        lo, hi = edges[j], edges[j + 1]
        inside = (ev.zeros >= lo) & (ev.zeros <= hi) if j == 0 else (ev.zeros > lo) & (
            ev.zeros <= hi
        )
        counts.append(int(np.count_nonzero(inside)))
    nw = len(counts)
    tail = counts[nw - int(math.ceil(0.75 * nw)):]
    if all(k >= 1 for k in counts):
        verdict = OSCILLATORY
    elif all(k == 0 for k in tail):
        verdict = NON_OSCILLATORY
    else:
        verdict = UNDECIDED
    ev.windows = [(float(edges[j]), float(edges[j + 1])) for j in range(nw)]
    ev.window_counts = counts
    ev.classification = verdict
    return ev


@dataclass
class SturmVerdict:
    """Outcome of the classical comparison check."""

    verdict: str
    reason: str = ""
    zeros: tuple = ()
    witnesses: list = field(default_factory=list)

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "reason": self.reason,
            "zeros": [float(z) for z in self.zeros],
            "witnesses": [dict(w) for w in self.witnesses],
        }


def sturm_compare(q1, q2, interval, trials=5, seed=0, samples=2001):
    """Check that solutions of y'' + q1 y = 0 vanish between zeros of a q2 solution.

    Requires q1 > q2 on the sampled interval. The q2 solution with
    y(a) = 0, y'(a) = 1 supplies consecutive zeros t1 < t2; ``trials``
    solutions of the q1 equation with random initial phases in (0, pi) at t1
    must each vanish in (t1, t2).

    Returns
    -------
    SturmVerdict
        "holds", "fails", or "inconclusive" (precondition violated or fewer
        than two zeros of the q2 solution).
    """
    a, b = float(interval[0]), float(interval[1])
    _check_interval(q1, a, b)
    _check_interval(q2, a, b)
    rs = np.linspace(a, b, samples)
    diff = np.broadcast_to(np.asarray(q1(rs), float) - np.asarray(q2(rs), float), rs.shape)
    if not np.all(diff > 0):
        where = float(rs[np.argmin(diff)])
        return SturmVerdict("inconclusive", f"q1 > q2 fails near r = {where:.6g}")
    ev = integrate_prufer(q2, a, b, theta0=0.0, include_start=True)
    if ev.count < 2:
        return SturmVerdict("inconclusive", "q2 solution has fewer than two zeros")
    t1, t2 = float(ev.zeros[0]), float(ev.zeros[1])
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, math.pi, size=trials)
    witnesses = []
    ok = True
    for th in phases:
        ev1 = integrate_prufer(q1, t1, t2, theta0=float(th))
        inside = ev1.zeros[ev1.zeros < t2]
        hit = float(inside[0]) if len(inside) else None
        ok = ok and hit is not None
        witnesses.append({"theta0": float(th), "first_zero": hit})
    return SturmVerdict(
        "holds" if ok else "fails",
        "every q1 solution vanishes in (t1, t2)" if ok else "a q1 solution has no zero",
        (t1, t2),
        witnesses,
    )
