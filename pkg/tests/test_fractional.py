import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab import (
    FracPower,
    InvalidArgumentError,
    PoleError,
    QuadratureConfig,
    frac_apply,
    frac_apply_semigroup,
    frac_schroedinger_spectrum,
    gamma,
    modal_potential,
    spectral_power,
)
from fraclab.fractional import semigroup_multipliers


@pytest.mark.parametrize(
    "x, ref",
    [(0.5, 1.77245385090552), (1.0, 1.0), (-0.5, -3.54490770181103), (5.0, 24.0)],
)
def test_gamma_values(x, ref):
    assert gamma(x) == pytest.approx(ref, rel=1e-13)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-20.0, 60.0).filter(lambda v: abs(v - round(v)) > 1e-6 or v > 0.5))
def test_gamma_vs_scipy(x):
    assert gamma(x) == pytest.approx(scipy.special.gamma(x), rel=1e-12)


@pytest.mark.parametrize("x", [0.0, -1.0, -7.0])
def test_gamma_poles(x):
    with pytest.raises(PoleError):
        gamma(x)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5])
def test_order_range(small_dec, s):
    with pytest.raises(InvalidArgumentError) as err:
        FracPower(s, small_dec)
    assert err.value.code == "s_out_of_range"


def test_frac_apply_mode(interval_dec):
    fp = FracPower(0.5, interval_dec)
    phi = interval_dec.mode(2)
    out = frac_apply(fp, phi)
    np.testing.assert_allclose(out, math.sqrt(interval_dec.eigenvalues[1]) * phi, atol=1e-10)
    assert np.max(np.abs(out - 2 * phi)) < 1e-3 * np.abs(phi).max()


def test_power_one_limit(small_dec):
    u = np.sin(small_dec.grid.interior_nodes[:, 0]) ** 3
    ref = np.linalg.solve(small_dec.M, small_dec.K @ u)
    np.testing.assert_allclose(spectral_power(small_dec, 1.0, u), ref, atol=1e-10)


def test_zero_input(frac_powers):
    fp = frac_powers[0.5]
    z = np.zeros(fp.decomposition.n)
    assert np.all(frac_apply(fp, z) == 0)
    assert np.all(frac_apply_semigroup(fp, z) == 0)


@settings(max_examples=10, deadline=None)
@given(s=st.floats(0.05, 0.95), t=st.floats(0.05, 0.95))
def test_semigroup_law(small_dec, s, t):
    # L^s L^t = L^(s+t) when s + t <= 1
    if s + t > 1:
        t = 1 - s
    u = small_dec.mode(1) - 0.5 * small_dec.mode(4)
    a = spectral_power(small_dec, s, spectral_power(small_dec, t, u))
    b = spectral_power(small_dec, s + t, u)
    np.testing.assert_allclose(a, b, atol=1e-9 * np.abs(b).max())


def test_semigroup_single_mode(interval_dec):
    fp = FracPower(0.5, interval_dec)
    phi = interval_dec.mode(1)
    out = frac_apply_semigroup(fp, phi)
    ref = interval_dec.eigenvalues[0] ** 0.5 * phi
    assert np.linalg.norm(out - ref) <= 1e-6 * np.linalg.norm(ref)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_semigroup_two_modes(interval_dec, s):
    fp = FracPower(s, interval_dec)
    u = interval_dec.mode(1) + interval_dec.mode(3)
    a = frac_apply_semigroup(fp, u)
    b = frac_apply(fp, u)
    M = interval_dec.M
    err = math.sqrt((a - b) @ M @ (a - b) / (b @ M @ b))
    assert err <= 1e-6


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_multipliers_continuum_identity(s):
    lam = np.array([0.3, 1.0, 17.0, 4.0e4])
    np.testing.assert_allclose(semigroup_multipliers(s, lam), lam**s, rtol=1e-8)


def test_semigroup_info(small_dec):
    fp = FracPower(0.25, small_dec)
    _, info = frac_apply_semigroup(fp, small_dec.mode(1), full_output=True)
    assert info.nodes > 0
    assert info.error_estimate < 1e-6
    assert info.tail_bound < 1e-12


def test_quadrature_budget_failure(small_dec):
    from fraclab import AccuracyError

    fp = FracPower(0.5, small_dec)
    cfg = QuadratureConfig(rtol=1e-15, initial_intervals=2, max_levels=2)
    with pytest.raises(AccuracyError):
        frac_apply_semigroup(fp, small_dec.mode(1), cfg)


@pytest.mark.parametrize("value", [3.0, 0.0])
def test_constant_modal_potential(small_dec, value):
    pot = modal_potential(small_dec, value)
    np.testing.assert_allclose(pot.matrix, value * np.eye(small_dec.n), atol=1e-8)


def test_schroedinger_shift(frac_powers):
    fp = frac_powers[0.5]
    dec = fp.decomposition
    lam_s = fp.powers
    spec = frac_schroedinger_spectrum(fp, modal_potential(dec, lam_s[0]))
    assert abs(spec.mu[0]) <= 1e-10
    spec0 = frac_schroedinger_spectrum(fp, modal_potential(dec, 0.0))
    np.testing.assert_allclose(spec0.mu, lam_s, rtol=1e-12)
    spec2 = frac_schroedinger_spectrum(fp, modal_potential(dec, lam_s[1]))
    assert spec2.mu[0] == pytest.approx(lam_s[0] - lam_s[1], abs=1e-10)
    assert abs(spec2.mu[1]) <= 1e-10
    np.testing.assert_allclose(np.abs(spec2.modal_vectors[:, 1]), np.eye(dec.n)[1], atol=1e-8)
    np.testing.assert_allclose(spec2.vectors[:, 1], dec.mode(2), atol=1e-8)


def test_monotone_in_potential(frac_powers):
    fp = frac_powers[0.25]
    dec = fp.decomposition

    def C(p):
        return np.sin(p[0]) + 0.5

    base = frac_schroedinger_spectrum(fp, modal_potential(dec, C)).mu
    shifted = frac_schroedinger_spectrum(fp, modal_potential(dec, lambda p: C(p) + 1.0)).mu
    drop = base - shifted
    assert np.all((drop >= 1 - 1e-8) & (drop <= 1 + 1e-8))


def test_mismatched_decompositions(small_dec, interval_dec):
    fp = FracPower(0.5, small_dec)
    with pytest.raises(InvalidArgumentError):
        frac_schroedinger_spectrum(fp, modal_potential(interval_dec, 1.0))
