import math
import warnings

import mpmath
import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab import (
    AccuracyWarning,
    FracPower,
    InvalidArgumentError,
    extend_direct,
    extend_spectral,
    frac_apply,
    gamma,
    kernel_profile,
    make_ladder,
    neumann_trace,
    trace_constant,
    weighted_energy,
)


def profile_oracle(s, lam, y):
    """Per-mode Poisson profile by mpmath in the variable t = y^2 / (4 w)."""
    s, lam, y = mpmath.mpf(s), mpmath.mpf(lam), mpmath.mpf(y)
    with mpmath.workdps(30):
        f = lambda w: mpmath.exp(-w - lam * y**2 / (4 * w)) * w ** (s - 1)
        return float(mpmath.quad(f, [0, 1, 10, mpmath.inf]) / mpmath.gamma(s))


def profile_bessel(s, lam, y):
    z = math.sqrt(lam) * y
    return 2 ** (1 - s) / scipy.special.gamma(s) * z**s * scipy.special.kv(s, z)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_trace_constant(s):
    ref = scipy.special.gamma(1 - s) / (4**s * scipy.special.gamma(1 + s))
    assert trace_constant(s) == pytest.approx(ref, rel=1e-13)


def test_trace_constant_half_is_one():
    assert trace_constant(0.5) == pytest.approx(1.0, abs=1e-14)


def test_profile_closed_form_half():
    assert kernel_profile(0.5, 4.0, 1.0) == pytest.approx(math.exp(-2.0), abs=1e-8)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.5, 0.9])
@pytest.mark.parametrize("lam", [0.5, 1.0, 400.0])
def test_profile_at_zero(s, lam):
    assert kernel_profile(s, lam, 0.0) == 1.0


def test_profile_vs_independent_quadrature():
    val = kernel_profile(0.25, 1.0, 2.0)
    assert val == pytest.approx(profile_oracle(0.25, 1.0, 2.0), abs=1e-8)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("y", [1e-3, 0.1, 1.0, 5.0])
def test_profile_vs_bessel(s, y):
    lam = np.array([0.7, 3.0, 50.0])
    got = kernel_profile(s, lam, y)
    ref = np.array([profile_bessel(s, v, y) for v in lam])
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(0.05, 0.95), y1=st.floats(1e-4, 5.0), dy=st.floats(1e-3, 3.0))
def test_profile_monotone(s, y1, dy):
    lam = np.array([0.5, 1.0, 2.0, 8.0])
    a = kernel_profile(s, lam, y1)
    b = kernel_profile(s, lam, y1 + dy)
    assert np.all((a > 0) & (a <= 1))
    assert np.all(b <= a)
    assert np.all(np.diff(a) <= 0)


def test_ladder_properties():
    for s in (0.1, 0.25, 0.5, 0.75):
        lad = make_ladder(s, 1.0)
        assert lad.nodes[0] == 0.0
        assert np.all(np.diff(lad.nodes) > 0)
        assert lad.nodes[1] ** (2 * s) <= 1e-3
        assert lad.Y == pytest.approx(14.0)


@pytest.mark.parametrize("kwargs", [{"Ny": 2}, {"gamma": 0.5}, {"Y_factor": -1.0}])
def test_ladder_rejects(kwargs):
    with pytest.raises(InvalidArgumentError):
        make_ladder(0.5, 1.0, **kwargs)


def test_spectral_single_mode(frac_powers):
    fp = frac_powers[0.5]
    dec = fp.decomposition
    lad = make_ladder(0.5, dec.eigenvalues[0])
    phi = dec.mode(1)
    U = extend_spectral(fp, phi, lad)
    ref = np.outer(phi, np.exp(-math.sqrt(dec.eigenvalues[0]) * lad.nodes))
    np.testing.assert_allclose(U.values, ref, atol=1e-12)
    np.testing.assert_array_equal(U.trace, phi)
    assert np.abs(U.values[:, -1]).max() <= 1e-6 * np.abs(phi).max()
    # maximum principle surrogate
    assert np.all(U.values[:, :-1] > 0)


@pytest.mark.parametrize("method", ["spectral", "direct"])
def test_zero_data(frac_powers, method):
    fp = frac_powers[0.25]
    dec = fp.decomposition
    lad = make_ladder(0.25, dec.eigenvalues[0], Ny=16)
    z = np.zeros(dec.n)
    if method == "spectral":
        U = extend_spectral(fp, z, lad)
    else:
        U = extend_direct(fp, dec.operator, z, lad)
    assert np.all(U.values == 0)
    assert np.all(neumann_trace(fp, U) == 0)


def test_ladder_s_mismatch(frac_powers):
    fp = frac_powers[0.5]
    lad = make_ladder(0.25, 1.0)
    with pytest.raises(InvalidArgumentError):
        extend_spectral(fp, fp.decomposition.mode(1), lad)


def test_direct_single_mode(frac_powers):
    fp = frac_powers[0.5]
    dec = fp.decomposition
    lad = make_ladder(0.5, dec.eigenvalues[0])
    phi = dec.mode(1)
    U = extend_direct(fp, dec.operator, phi, lad)
    ref = np.outer(phi, np.exp(-math.sqrt(dec.eigenvalues[0]) * lad.nodes))
    scale = np.abs(phi).max()
    assert np.max(np.abs(U.values - ref)) <= 0.01 * scale


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_methods_agree(frac_powers, s):
    fp = frac_powers[s]
    dec = fp.decomposition
    lad = make_ladder(s, dec.eigenvalues[0], Ny=64, gamma=3)
    u = dec.mode(1) + 0.5 * dec.mode(2) - 0.2 * dec.mode(5)
    Us = extend_spectral(fp, u, lad)
    Ud = extend_direct(fp, dec.operator, u, lad)
    Es = weighted_energy(Us.values, lad, dec.K, dec.M, s)
    Ed = weighted_energy(Ud.values, lad, dec.K, dec.M, s)
    assert abs(Es - Ed) / Es <= 0.02
    ts = neumann_trace(fp, Us)
    td = neumann_trace(fp, Ud)
    assert np.linalg.norm(ts - td) / np.linalg.norm(ts) <= 0.02


def test_direct_is_discrete_minimizer(frac_powers, rng):
    fp = frac_powers[0.25]
    dec = fp.decomposition
    lad = make_ladder(0.25, dec.eigenvalues[0], Ny=32)
    U = extend_direct(fp, dec.operator, dec.mode(1), lad)
    E0 = weighted_energy(U.values, lad, dec.K, dec.M, 0.25)
    for _ in range(20):
        W = rng.standard_normal(U.values.shape)
        W[:, 0] = 0.0
        W *= 1e-3 * np.abs(U.values).max()
        assert weighted_energy(U.values + W, lad, dec.K, dec.M, 0.25) > E0


def test_spectral_energy_minimal(frac_powers, rng):
    # smooth trace-zero perturbations never lower the energy of the Poisson extension
    fp = frac_powers[0.5]
    dec = fp.decomposition
    lad = make_ladder(0.5, dec.eigenvalues[0])
    U = extend_spectral(fp, dec.mode(1) + 0.3 * dec.mode(3), lad)
    E0 = weighted_energy(U.values, lad, dec.K, dec.M, 0.5)
    y = lad.nodes / lad.Y
    for _ in range(20):
        k = rng.integers(1, 6)
        m = rng.integers(1, 4)
        W = np.outer(dec.mode(int(k)), np.sin(np.pi * m * y) * (1 - y))
        W *= rng.uniform(0.05, 0.5) * rng.choice([-1, 1])
        assert weighted_energy(U.values + W, lad, dec.K, dec.M, 0.5) > E0


def test_trace_half_closed_form(frac_powers):
    fp = frac_powers[0.5]
    dec = fp.decomposition
    phi = dec.mode(1)
    U = extend_spectral(fp, phi, make_ladder(0.5, dec.eigenvalues[0]))
    ref = math.sqrt(dec.eigenvalues[0]) * phi
    assert np.linalg.norm(neumann_trace(fp, U) - ref) <= 1e-4 * np.linalg.norm(ref)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_trace_constant_reproduced(frac_powers, s):
    fp = frac_powers[s]
    dec = fp.decomposition
    phi = dec.mode(1)
    U = extend_spectral(fp, phi, make_ladder(s, dec.eigenvalues[0]))
    tr, est = neumann_trace(fp, U, full_output=True)
    ratio = (tr @ dec.M @ phi) / dec.eigenvalues[0] ** s
    assert ratio == pytest.approx(trace_constant(s), rel=5e-3)
    assert est < 1e-3


def test_trace_matches_frac_apply(frac_powers):
    fp = frac_powers[0.75]
    dec = fp.decomposition
    u = dec.mode(1) - dec.mode(2) + 0.25 * dec.mode(4)
    U = extend_spectral(fp, u, make_ladder(0.75, dec.eigenvalues[0]))
    ref = trace_constant(0.75) * frac_apply(fp, u)
    assert np.linalg.norm(neumann_trace(fp, U) - ref) <= 5e-3 * np.linalg.norm(ref)


def test_trace_warns_on_coarse_ladder(frac_powers):
    fp = frac_powers[0.25]
    dec = fp.decomposition
    lad = make_ladder(0.25, dec.eigenvalues[0], Ny=8, first_node_power=0.5)
    U = extend_spectral(fp, dec.mode(6), lad)
    with pytest.warns(AccuracyWarning):
        neumann_trace(fp, U, method="richardson")


def test_trace_method_validation(frac_powers):
    fp = frac_powers[0.5]
    dec = fp.decomposition
    U = extend_spectral(fp, dec.mode(1), make_ladder(0.5, dec.eigenvalues[0]))
    with pytest.raises(InvalidArgumentError):
        neumann_trace(fp, U, method="spline")
    with pytest.raises(InvalidArgumentError):
        neumann_trace(fp, U, nodes=3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        neumann_trace(fp, U)


def test_lanczos_gamma_in_trace_constant():
    s = 0.3
    assert trace_constant(s) == pytest.approx(gamma(1 - s) / (4**s * gamma(1 + s)), rel=1e-15)
