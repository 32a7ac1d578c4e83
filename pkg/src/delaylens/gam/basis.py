"""B-spline bases, difference penalties and sum-to-zero constraints."""

from __future__ import annotations

import numpy as np

from ..errors import UsageError


def check_knots(knots, degree):
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or len(knots) < 2 * (degree + 1):
        raise UsageError(f"need at least {2 * (degree + 1)} knots for degree {degree}")
    if np.any(np.diff(knots) < 0):
        raise UsageError("knot vector must be nondecreasing")
    if not knots[degree] < knots[-degree - 1]:
        raise UsageError("boundary knots must span a nonempty interval")
    return knots


def bspline_basis(knots, degree, x):
    """Evaluate all B-spline basis functions at ``x`` by the Cox-de Boor recursion.

    Parameters
    ----------
    knots : array, shape (m + degree + 1,)
        Full knot vector, boundary knots included (repeat them for a
        clamped basis).
    degree : int
    x : float or array, shape (n,)
        Points outside the boundary knots are clamped to the boundary.

    Returns
    -------
    ndarray, shape (n, m)
        Nonnegative rows summing to one. A scalar ``x`` gives shape ``(m,)``.
    """
    knots = check_knots(knots, degree)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = knots[degree], knots[-degree - 1]
    x = np.clip(x, lo, hi)
    n_int = len(knots) - 1
    # degree 0: half-open intervals; the right boundary belongs to the last nonempty one
    span = np.searchsorted(knots, x, side="right") - 1
    last = np.flatnonzero(knots[:-1] < knots[1:]).max()
    span = np.where(x >= hi, last, span)
    span = np.clip(span, 0, n_int - 1)
    B = np.zeros((len(x), n_int))
    B[np.arange(len(x)), span] = 1.0
    for p in range(1, degree + 1):
        n_fun = n_int - p
        left_den = knots[p:p + n_fun] - knots[:n_fun]
        right_den = knots[p + 1:p + 1 + n_fun] - knots[1:1 + n_fun]
        with np.errstate(divide="ignore", invalid="ignore"):
            lw = np.where(left_den > 0, (x[:, None] - knots[:n_fun]) / left_den, 0.0)
            rw = np.where(right_den > 0, (knots[p + 1:p + 1 + n_fun] - x[:, None]) / right_den, 0.0)
        B = lw * B[:, :n_fun] + rw * B[:, 1:n_fun + 1]
    return B[0] if scalar else B


def make_knots(x, n_basis=10, degree=3):
    """Clamped knot vector with interior knots at quantiles of the distinct values of ``x``."""
    u = np.unique(np.asarray(x, dtype=float))
    if len(u) < 2:
        raise UsageError("cannot place knots on a constant covariate")
    n_inner = n_basis - degree - 1
    if n_inner < 0:
        raise UsageError(f"basis dimension {n_basis} too small for degree {degree}")
    probs = np.arange(1, n_inner + 1) / (n_inner + 1)
    inner = np.quantile(u, probs) if n_inner else np.array([])
    return np.concatenate([np.repeat(u[0], degree + 1), inner, np.repeat(u[-1], degree + 1)])


def greville(knots, degree):
    """Knot averages: the abscissae at which linear functions have linear coefficients."""
    knots = np.asarray(knots, dtype=float)
    m = len(knots) - degree - 1
    if degree == 0:
        return (knots[:m] + knots[1:m + 1]) / 2
    return np.array([knots[j + 1:j + degree + 1].mean() for j in range(m)])


def difference_matrix(k, order, abscissae=None):
    """Order-``order`` difference operator, optionally divided by abscissa spacing.

    With ``abscissae`` each differencing step divides by the spacing of the
    points it spans (rescaled by the mean spacing), so the null space holds
    coefficient vectors polynomial in the abscissae instead of the index.
    """
    if k <= order:
        raise UsageError(f"basis dimension {k} must exceed penalty order {order}")
    D = np.eye(k)
    if abscissae is None:
        for _ in range(order):
            D = np.diff(D, axis=0)
        return D
    xi = np.asarray(abscissae, dtype=float)
    if len(xi) != k or np.any(np.diff(xi) <= 0):
        raise UsageError("abscissae must be strictly increasing with one entry per coefficient")
    for j in range(1, order + 1):
        gap = (xi[j:] - xi[:-j]) / j
        D = np.diff(D, axis=0) / (gap / gap.mean())[:, None]
    return D


def difference_penalty(k, order=2, abscissae=None):
    """Penalty ``S = D^T D`` for the difference operator of :func:`difference_matrix`."""
    D = difference_matrix(k, order, abscissae)
    return D.T @ D


def sum_to_zero_transform(basis, weights=None):
    """Orthogonal transform absorbing the constraint ``sum_i w_i f(x_i) = 0``.

    Returns ``Z`` of shape ``(k, k - 1)`` whose columns span the null space
    of the constraint row ``w^T B``; the constrained basis is ``B @ Z``.
    """
    B = np.asarray(basis, dtype=float)
    w = np.ones(len(B)) if weights is None else np.asarray(weights, dtype=float)
    c = w @ B
    q, _ = np.linalg.qr(c[:, None], mode="complete")
    return q[:, 1:]


def apply_constraint(basis, weights=None):
    """Constrained basis and the transform to reuse at prediction time."""
    Z = sum_to_zero_transform(basis, weights)
    return np.asarray(basis) @ Z, Z
