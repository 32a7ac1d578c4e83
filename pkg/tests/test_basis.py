import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delaylens.errors import UsageError
from delaylens.gam.basis import (apply_constraint, bspline_basis, difference_matrix, difference_penalty,
                                 greville, make_knots, sum_to_zero_transform)


def naive_bspline(knots, degree, j, x):
    """Textbook recursion for one basis function, 0/0 taken as 0."""
    if degree == 0:
        last = np.flatnonzero(knots[:-1] < knots[1:]).max()
        if knots[j] <= x < knots[j + 1]:
            return 1.0
        return 1.0 if (j == last and x == knots[j + 1]) else 0.0
    out = 0.0
    den = knots[j + degree] - knots[j]
    if den > 0:
        out += (x - knots[j]) / den * naive_bspline(knots, degree - 1, j, x)
    den = knots[j + degree + 1] - knots[j + 1]
    if den > 0:
        out += (knots[j + degree + 1] - x) / den * naive_bspline(knots, degree - 1, j + 1, x)
    return out


@st.composite
def knot_cases(draw):
    degree = draw(st.integers(0, 3))
    n_inner = draw(st.integers(0, 6))
    inner = sorted(draw(st.lists(st.floats(0.01, 0.99), min_size=n_inner, max_size=n_inner)))
    knots = np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])
    x = draw(st.lists(st.floats(0, 1), min_size=1, max_size=8))
    return knots, degree, np.array(x)


@given(knot_cases())
@settings(max_examples=150, deadline=None)
def test_matches_naive_recursion(case):
    knots, degree, x = case
    B = bspline_basis(knots, degree, x)
    m = len(knots) - degree - 1
    oracle = np.array([[naive_bspline(knots, degree, j, xi) for j in range(m)] for xi in x])
    np.testing.assert_allclose(B, oracle, atol=1e-12)


@given(knot_cases())
@settings(max_examples=100, deadline=None)
def test_partition_of_unity(case):
    knots, degree, x = case
    B = bspline_basis(knots, degree, x)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(B >= -1e-15)


def test_degree_zero_indicator():
    knots = np.array([0.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(bspline_basis(knots, 0, [0.5, 1.0, 2.9, 3.0]),
                                  [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]])


def test_scalar_and_clamping():
    knots = make_knots(np.linspace(0, 1, 50), 6)
    assert bspline_basis(knots, 3, 0.3).shape == (6,)
    np.testing.assert_array_equal(bspline_basis(knots, 3, -5.0), bspline_basis(knots, 3, 0.0))
    np.testing.assert_array_equal(bspline_basis(knots, 3, 7.0), bspline_basis(knots, 3, 1.0))


def test_bad_knots():
    with pytest.raises(UsageError):
        bspline_basis([0, 0, 1], 3, 0.5)
    with pytest.raises(UsageError):
        bspline_basis([0, 0, 0, 0, 1, 0.5, 1, 1, 1], 3, [0.5])


def test_make_knots_quantiles_of_unique_values():
    x = np.r_[np.zeros(1000), np.arange(1, 11)]
    knots = make_knots(x, n_basis=6, degree=3)
    np.testing.assert_allclose(knots[4:6], np.quantile(np.arange(0, 11), [1 / 3, 2 / 3]))
    assert len(knots) == 6 + 4
    with pytest.raises(UsageError):
        make_knots(np.ones(5))


def test_penalty_null_space_linear_index():
    S = difference_penalty(4, 2)
    beta = np.array([1.0, 2.0, 3.0, 4.0])
    assert beta @ S @ beta == pytest.approx(0, abs=1e-12)


def test_penalty_unit_example():
    S = difference_penalty(3, 2)
    beta = np.array([0.0, 0.0, 1.0])
    assert beta @ S @ beta == 1


@pytest.mark.parametrize("order", [1, 2, 3])
def test_penalty_symmetric_psd(order):
    xi = greville(make_knots(np.random.default_rng(order).gamma(2, size=300), 10), 3)
    for S in (difference_penalty(10, order), difference_penalty(10, order, xi)):
        np.testing.assert_allclose(S, S.T, atol=1e-14)
        assert np.linalg.eigvalsh(S).min() >= -1e-12
        assert np.linalg.matrix_rank(S) == 10 - order


def test_scaled_penalty_null_space_is_affine():
    x = np.random.default_rng(0).lognormal(size=500)
    knots = make_knots(x, 10)
    xi = greville(knots, 3)
    S = difference_penalty(10, 2, xi)
    beta = 2.0 - 0.7 * xi
    # zero up to rounding relative to the scale of S and beta
    assert beta @ S @ beta <= 1e-13 * np.linalg.norm(S) * (beta @ beta)
    # linear coefficients give a linear function of x
    grid = np.linspace(x.min(), x.max(), 40)
    np.testing.assert_allclose(bspline_basis(knots, 3, grid) @ beta, 2.0 - 0.7 * grid, atol=1e-10)


def test_even_spacing_reduces_to_plain_differences():
    xi = np.arange(8.0)
    np.testing.assert_allclose(difference_matrix(8, 2, xi), difference_matrix(8, 2))


def test_penalty_order_checks():
    with pytest.raises(UsageError):
        difference_penalty(2, 2)


def test_constraint_dimension_and_centering(rng):
    x = rng.uniform(size=300)
    B = bspline_basis(make_knots(x, 10), 3, x)
    Bc, Z = apply_constraint(B)
    assert Bc.shape == (300, 9)
    assert np.linalg.matrix_rank(Bc) == 9
    np.testing.assert_allclose(Z.T @ Z, np.eye(9), atol=1e-12)
    beta = rng.normal(size=9)
    assert abs((Bc @ beta).sum()) < 1e-8


def test_weighted_constraint(rng):
    x = rng.uniform(size=100)
    w = rng.integers(1, 20, 100).astype(float)
    B = bspline_basis(make_knots(x, 8), 3, x)
    Z = sum_to_zero_transform(B, w)
    f = B @ Z @ rng.normal(size=7)
    assert abs(w @ f) < 1e-8


def test_constraint_round_trip(rng):
    x = rng.uniform(size=200)
    B = bspline_basis(make_knots(x, 10), 3, x)
    Bc, Z = apply_constraint(B)
    beta_c = rng.normal(size=9)
    # predictions through the stored transform equal the constrained-design fit
    np.testing.assert_allclose(B @ (Z @ beta_c), Bc @ beta_c, atol=1e-12)
    # a centred unconstrained function is reproduced exactly in the constrained space
    f = B @ rng.normal(size=10)
    f = f - f.mean()
    coef, *_ = np.linalg.lstsq(Bc, f, rcond=None)
    np.testing.assert_allclose(Bc @ coef, f, atol=1e-9)


def test_matches_scipy_design_matrix(rng):
    from scipy.interpolate import BSpline
    x = rng.uniform(-2, 3, 300)
    knots = make_knots(x, 12)
    # scipy evaluates on the half-open base interval; keep the right end out
    inside = x[x < knots[-1]]
    ref = BSpline.design_matrix(inside, knots, 3).toarray()
    np.testing.assert_allclose(bspline_basis(knots, 3, inside), ref, rtol=0, atol=1e-13)
