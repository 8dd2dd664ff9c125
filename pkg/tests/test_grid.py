import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab import (
    CoefficientViolationError,
    InvalidArgumentError,
    MatrixCoefficient,
    ScalarCoefficient,
    assemble,
    assemble_stiffness,
    build_interval_grid,
    build_rectangle_grid,
    weighted_mass,
)


def test_interval_nodes():
    g = build_interval_grid(0.0, np.pi, 4)
    np.testing.assert_allclose(g.nodes[:, 0], np.pi * np.arange(5) / 4)
    assert g.boundary.tolist() == [True, False, False, False, True]
    assert g.n_interior == 3


def test_interval_counts():
    g = build_interval_grid(0.0, 1.0, 3)
    assert g.n_nodes == 4
    assert g.n_interior == 2


@pytest.mark.parametrize("args", [(1.0, 0.0, 10), (0.0, 1.0, 2), (0.0, np.inf, 4), (0.0, 1.0, 3.5)])
def test_interval_rejects(args):
    with pytest.raises(InvalidArgumentError):
        build_interval_grid(*args)


@pytest.mark.parametrize(
    "args, nodes, interior, triangles",
    [((0, 1, 0, 1, 3, 3), 16, 4, 18), ((0, 2, 0, 1, 4, 3), 20, 6, 24)],
)
def test_rectangle_counts(args, nodes, interior, triangles):
    g = build_rectangle_grid(*args)
    assert g.n_nodes == nodes
    assert g.n_interior == interior
    assert len(g.elements) == triangles
    assert np.all(g.element_measures() > 0)


def test_rectangle_rejects_empty():
    with pytest.raises(InvalidArgumentError):
        build_rectangle_grid(0, 1, 1, 1, 3, 3)


def test_p1_interval_matrices():
    g = build_interval_grid(0.0, np.pi, 4)
    op = assemble(g)
    h = np.pi / 4
    tri = np.diag([2.0] * 3) - np.diag([1.0] * 2, 1) - np.diag([1.0] * 2, -1)
    np.testing.assert_allclose(op.K, tri / h, rtol=1e-14)
    mass = np.diag([4.0] * 3) + np.diag([1.0] * 2, 1) + np.diag([1.0] * 2, -1)
    np.testing.assert_allclose(op.M, mass * h / 6, rtol=1e-14)


def test_rectangle_anisotropic_spd():
    g = build_rectangle_grid(0, 1, 0, 1, 6, 5)
    op = assemble(g, np.diag([1.0, 2.0]))
    np.testing.assert_allclose(op.K, op.K.T, atol=1e-14)
    np.linalg.cholesky(op.K)
    np.linalg.cholesky(op.M)


def test_rectangle_mass_total():
    # C = 1 gives back the consistent mass
    g = build_rectangle_grid(0, 2, 0, 1, 4, 4)
    C = ScalarCoefficient.constant(1.0)
    M = weighted_mass(g, C)
    op = assemble(g)
    np.testing.assert_allclose(M, op.M, rtol=1e-13)


def test_nonsymmetric_coefficient_rejected():
    g = build_rectangle_grid(0, 1, 0, 1, 3, 3)
    A = MatrixCoefficient(lambda p: np.array([[1.0, 0.5], [0.0, 1.0]]), 2)
    with pytest.raises(CoefficientViolationError):
        assemble(g, A)


def test_indefinite_coefficient_rejected():
    g = build_interval_grid(0, 1, 8)
    A = MatrixCoefficient(lambda p: 1.0 - 2.0 * (p[0] > 0.5), 1)
    with pytest.raises(CoefficientViolationError):
        assemble(g, A)


def test_unchecked_stiffness_allows_differences():
    g = build_interval_grid(0, 1, 8)
    K = assemble_stiffness(g, MatrixCoefficient.constant(-1.0, 1), check=False)
    assert np.all(np.diag(K) < 0)


def test_weighted_mass_linear_exact():
    # C(x) = x is reproduced by its P1 interpolant, so entries equal int x phi_i phi_j
    from scipy.integrate import quad

    g = build_interval_grid(0, 1, 5)
    M = weighted_mass(g, ScalarCoefficient(lambda p: p[0]))
    x = g.nodes[:, 0]
    h = x[1] - x[0]

    def hat(k, t):
        return max(0.0, 1.0 - abs(t - x[k]) / h)

    for i in range(g.n_interior):
        for j in range(g.n_interior):
            ki, kj = g.interior[i], g.interior[j]
            ref = quad(lambda t: t * hat(ki, t) * hat(kj, t), 0, 1, points=list(x))[0]
            assert M[i, j] == pytest.approx(ref, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(3, 40), a=st.floats(-5, 5), width=st.floats(0.1, 10))
def test_interval_matrices_property(n, a, width):
    # interior stiffness is SPD for every uniform interval mesh
    g = build_interval_grid(a, a + width, n)
    op = assemble(g)
    assert np.all(np.linalg.eigvalsh(op.K) > 0)
    # full mass sums to the length; each boundary row and column removes 2h/3
    h = width / n
    np.testing.assert_allclose(op.M.sum(), width - 4 * h / 3, rtol=1e-10)


def test_lattice_roundtrip():
    g = build_rectangle_grid(0, 1, 0, 2, 4, 5)
    vals = np.arange(g.n_nodes, dtype=float)
    lat = g.to_lattice(vals)
    assert lat.shape == (5, 6)
    xs, ys = g.lattice_axes()
    np.testing.assert_allclose(xs, np.linspace(0, 1, 5))
    np.testing.assert_allclose(ys, np.linspace(0, 2, 6))
    i, j = 2, 3
    k = i + j * 5
    assert lat[i, j] == k
    np.testing.assert_allclose(g.nodes[k], [xs[i], ys[j]])


def test_edges_unique():
    g = build_rectangle_grid(0, 1, 0, 1, 3, 3)
    e = g.edges()
    # 3x3 cells: 12 + 12 axis edges and 9 diagonals
    assert len(e) == 33
    assert np.all(e[:, 0] < e[:, 1])
