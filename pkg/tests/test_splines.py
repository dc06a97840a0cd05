import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splinequad.quadrature import gauss_legendre
from splinequad.splines import (
    BSplineCurve, Partition, SingularParameterizationError, SplineSpace, basis_integral,
    basis_integrals, basis_matrix, eval_basis, eval_basis_derivatives, eval_curve, find_span,
    make_space,
)

from conftest import spaces


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition((0.0, 0.5, 0.5, 1.0))
    with pytest.raises(ValueError):
        Partition((0.1, 1.0))
    with pytest.raises(ValueError):
        Partition((0.0, 0.9))
    with pytest.raises(ValueError):
        Partition((0.0,))
    assert Partition.uniform(4).knots == (0.0, 0.25, 0.5, 0.75, 1.0)


def test_clamped_knots_quadratic_c1():
    s = make_space(2, 1, Partition((0, 0.2, 0.4, 0.6, 0.8, 1)))
    np.testing.assert_allclose(s.clamped_knots, [0, 0, 0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1])
    assert s.dimension == 7


def test_clamped_knots_single_linear_element():
    s = make_space(1, 0, Partition((0.0, 1.0)))
    np.testing.assert_array_equal(s.clamped_knots, [0, 0, 1, 1])
    assert s.dimension == 2


def test_dimension_quartic_c0():
    s = make_space(4, 0, Partition.uniform(8))
    assert s.dimension == 33
    assert s.multiplicity == 4


@pytest.mark.parametrize("d,k", [(2, 2), (2, 3), (3, -1)])
def test_make_space_rejects_bad_continuity(d, k):
    with pytest.raises(ValueError):
        make_space(d, k, Partition.uniform(2))


@given(spaces(max_degree=16, max_elements=50))
def test_knot_multiplicities(space):
    xi = space.clamped_knots
    d = space.degree
    assert np.all(xi[: d + 1] == 0.0) and np.all(xi[-d - 1:] == 1.0)
    for u in space.partition.knots[1:-1]:
        assert np.count_nonzero(xi == u) == space.multiplicity
    assert space.dimension == d + 1 + (space.ne - 1) * space.multiplicity


def test_find_span_examples():
    assert find_span(make_space(1, 0, Partition((0.0, 1.0))), 0.3) == 1
    s = make_space(2, 1, Partition((0.0, 0.5, 1.0)))
    np.testing.assert_array_equal(s.clamped_knots, [0, 0, 0, 0.5, 1, 1, 1])
    assert find_span(s, 0.5) == 3
    # x = 1 closes the last non-degenerate span
    i = find_span(s, 1.0)
    assert s.clamped_knots[i] < s.clamped_knots[i + 1] == 1.0
    with pytest.raises(ValueError):
        find_span(s, 1.5)


def test_eval_basis_examples():
    np.testing.assert_allclose(eval_basis(make_space(1, 0, Partition.uniform(2)), 0.25), [0.5, 0.5, 0])
    bern = SplineSpace(2, -1, Partition.uniform(1))
    np.testing.assert_allclose(eval_basis(bern, 0.5), [0.25, 0.5, 0.25])
    v = eval_basis(make_space(4, 0, Partition.uniform(8)), 0.0)
    assert v[0] == 1.0 and np.all(v[1:] == 0.0)
    with pytest.raises(ValueError):
        eval_basis(bern, -0.1)


def test_eval_derivative_examples():
    D = eval_basis_derivatives(make_space(1, 0, Partition.uniform(2)), 0.25, 1)
    np.testing.assert_allclose(D[1], [-2, 2, 0])
    D = eval_basis_derivatives(SplineSpace(2, -1, Partition.uniform(1)), 0.0, 1)
    np.testing.assert_allclose(D[1], [-2, 2, 0])
    with pytest.raises(ValueError):
        eval_basis_derivatives(make_space(2, 0, Partition.uniform(2)), 0.3, 3)
    with pytest.raises(ValueError):
        eval_basis_derivatives(make_space(2, 0, Partition.uniform(2)), 0.3, -1)


@settings(max_examples=60)
@given(spaces(max_degree=16, max_elements=50), st.integers(0, 2**31 - 1))
def test_partition_of_unity_and_support(space, seed):
    x = np.random.default_rng(seed).uniform(0, 1, 1000)
    B = basis_matrix(space, x)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-13)
    assert np.all(B >= 0.0)
    xi = space.clamped_knots
    d = space.degree
    lo = xi[np.arange(space.dimension)]
    hi = xi[np.arange(space.dimension) + d + 1]
    outside = (x[:, None] < lo[None, :]) | (x[:, None] > hi[None, :])
    assert np.all(B[outside] == 0.0)
    assert np.all(np.count_nonzero(B, axis=1) <= d + 1)


@settings(max_examples=40)
@given(spaces(max_degree=10, max_elements=20), st.floats(0, 1))
def test_derivative_rows_sum_to_zero(space, x):
    D = eval_basis_derivatives(space, x, 1)
    assert abs(D[1].sum()) <= 1e-13 * max(1.0, np.abs(D[1]).max())


@settings(max_examples=40)
@given(spaces(max_degree=8, max_elements=10))
def test_continuity_at_interior_knots(space):
    # one-sided first-order Taylor extrapolations to the knot must agree for
    # every derivative order up to the continuity; the bound covers the O(eps^2) remainder
    eps = 1e-6
    d = space.degree
    for u in space.partition.knots[1:-1]:
        left = eval_basis_derivatives(space, u - eps, d)
        right = eval_basis_derivatives(space, u + eps, d)
        for r in range(space.continuity + 1):
            from_left = left[r] + eps * left[r + 1]
            from_right = right[r] - eps * right[r + 1]
            curv = np.abs(left[r + 2]).max() + np.abs(right[r + 2]).max() if r + 2 <= d else 0.0
            scale = max(1.0, np.abs(left[r]).max())
            assert np.max(np.abs(from_left - from_right)) <= 1e-8 * scale + eps**2 * curv


@settings(max_examples=40)
@given(spaces(max_degree=10, max_elements=12), st.integers(0, 2**31 - 1))
def test_first_derivative_matches_finite_differences(space, seed):
    rng = np.random.default_rng(seed)
    knots = np.asarray(space.partition.knots)
    h = 1e-6
    for _ in range(5):
        e = rng.integers(space.ne)
        a, b = knots[e], knots[e + 1]
        x = rng.uniform(a + 0.1 * (b - a), b - 0.1 * (b - a))
        fd = (eval_basis(space, x + h) - eval_basis(space, x - h)) / (2 * h)
        d1 = eval_basis_derivatives(space, x, 1)[1]
        scale = np.abs(d1).max()
        assert np.max(np.abs(fd - d1)) <= 1e-5 * scale


def test_basis_integral_examples():
    assert basis_integral(SplineSpace(0, -1, Partition.uniform(1)), 0) == 1.0
    bern = SplineSpace(2, -1, Partition.uniform(1))
    np.testing.assert_allclose(basis_integrals(bern), [1 / 3] * 3, rtol=1e-15)
    np.testing.assert_allclose(basis_integrals(make_space(1, 0, Partition.uniform(2))), [0.25, 0.5, 0.25])
    with pytest.raises(IndexError):
        basis_integral(bern, 3)


@settings(max_examples=50)
@given(spaces(max_degree=16, max_elements=30))
def test_basis_integrals_match_gauss_oracle(space):
    # independent oracle: 2d-point Gauss rule copied into every element
    ref = gauss_legendre(max(2 * space.degree, 1))
    knots = np.asarray(space.partition.knots)
    x = (knots[:-1, None] + np.outer(np.diff(knots), ref.points)).ravel()
    w = np.outer(np.diff(knots), ref.weights).ravel()
    oracle = basis_matrix(space, x).T @ w
    exact = basis_integrals(space)
    np.testing.assert_allclose(exact, oracle, rtol=1e-13, atol=1e-15)
    assert np.all(exact > 0)
    assert math.isclose(math.fsum(exact), 1.0, rel_tol=1e-14)


def test_curve_straight_line():
    line = BSplineCurve(1, (0.0, 0.0, 1.0, 1.0), ((0.0, 0.0), (1.0, 0.0)))
    point, jac, kappa = eval_curve(line, 0.5)
    np.testing.assert_allclose(point, [0.5, 0.0])
    assert jac == pytest.approx(1.0) and kappa == 0.0


def test_curve_validation_and_singularity():
    with pytest.raises(ValueError):
        BSplineCurve(1, (0.0, 0.0, 1.0, 1.0), ((0.0, 0.0),))
    dot = BSplineCurve(1, (0.0, 0.0, 1.0, 1.0), ((0.3, 0.3), (0.3, 0.3)))
    with pytest.raises(SingularParameterizationError):
        eval_curve(dot, 0.5)
