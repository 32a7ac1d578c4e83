"""Model matrices for person-period hazard models.

Every covariate is fixed per event, and the only quantity varying within
an event is the week ``t``. The design therefore factors as an event-level
matrix ``Xe`` plus, for each event type, a small basis ``B_j`` over the
week grid. Products with weights are accumulated per (event, week) cell,
so a fit never materializes the full person-period matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import DataError, UsageError
from ..events import EVENT_TYPES
from ..geo import REGIMES
from .basis import bspline_basis, difference_penalty, greville, make_knots, sum_to_zero_transform

CATEGORICAL_LEVELS = {
    "regime": REGIMES,
    "internet": ("No", "Yes"),
    "event_type": EVENT_TYPES,
}


class DesignWarning(UserWarning):
    """A term was dropped or simplified while building a design."""


class DenseDesign:
    """Ordinary model matrix with the interface of :class:`PersonPeriodDesign`."""

    def __init__(self, X):
        self.X = np.ascontiguousarray(np.asarray(X, dtype=float))
        if self.X.ndim != 2:
            raise UsageError("design matrix must be two-dimensional")

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_cols(self):
        return self.X.shape[1]

    def matvec(self, beta):
        return self.X @ beta

    def rmatvec(self, v):
        return self.X.T @ v

    def gram(self, w):
        Xw = self.X * w[:, None]
        return self.X.T @ Xw

    def dense(self):
        return self.X

    def rows_quadform(self, V):
        return np.einsum("ij,jk,ik->i", self.X, V, self.X)


def _weighted_crossprod(X, w):
    if np.all(w >= 0):
        Xs = X * np.sqrt(w)[:, None]
        return Xs.T @ Xs
    return X.T @ (X * w[:, None])


class PersonPeriodDesign:
    """Factored person-period design ``x_it = [Xe_i, onehot(type_i) (x) B(t)]``.

    Parameters
    ----------
    event_matrix : ndarray, shape (n_events, p_e)
    row_event : ndarray of int, shape (n_rows,)
    row_t : ndarray of int, shape (n_rows,)
        Week index of each row starting at 1.
    level_of_event : ndarray of int, shape (n_events,), optional
        Baseline block of each event, or -1 for none.
    level_bases : list of ndarray, shape (n_t, q_j)
        Basis of each baseline block evaluated at weeks ``1..n_t``.
    """

    def __init__(self, event_matrix, row_event, row_t, level_of_event=None, level_bases=()):
        self.Xe = np.ascontiguousarray(np.asarray(event_matrix, dtype=float))
        self.row_event = np.asarray(row_event, dtype=np.int64)
        self.row_t = np.asarray(row_t, dtype=np.int64) - 1
        self.n_events = self.Xe.shape[0]
        self.level_bases = [np.asarray(B, dtype=float) for B in level_bases]
        self.n_t = max([len(B) for B in self.level_bases] + [int(self.row_t.max()) + 1 if len(self.row_t) else 1])
        if np.any(self.row_t < 0):
            raise UsageError("week indices start at 1")
        if level_of_event is None:
            level_of_event = np.full(self.n_events, -1)
        level_of_event = np.asarray(level_of_event, dtype=np.int64)
        # events stored grouped by block so per-block slices are views
        order = np.argsort(level_of_event, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        self.Xe = np.ascontiguousarray(self.Xe[order])
        self.row_event = rank[self.row_event]
        self.level_of_event = level_of_event[order]
        self.cell = self.row_event * self.n_t + self.row_t
        self.p_e = self.Xe.shape[1]
        self.slices = []
        start = self.p_e
        for B in self.level_bases:
            if len(B) < self.n_t:
                raise UsageError("baseline basis shorter than the week grid")
            self.slices.append(slice(start, start + B.shape[1]))
            start += B.shape[1]
        self._n_cols = start
        bounds = np.searchsorted(self.level_of_event, np.arange(len(self.level_bases) + 1))
        self.level_events = [slice(bounds[j], bounds[j + 1]) for j in range(len(self.level_bases))]
        self.row_level = self.level_of_event[self.row_event]

    @property
    def n_rows(self):
        return len(self.row_event)

    @property
    def n_cols(self):
        return self._n_cols

    def _cells(self, v):
        return np.bincount(self.cell, weights=v, minlength=self.n_events * self.n_t).reshape(self.n_events, self.n_t)

    def matvec(self, beta):
        beta = np.asarray(beta, dtype=float)
        eta = (self.Xe @ beta[:self.p_e])[self.row_event]
        if self.level_bases:
            curves = np.zeros((len(self.level_bases) + 1, self.n_t))
            for j, (B, sl) in enumerate(zip(self.level_bases, self.slices)):
                curves[j] = B[:self.n_t] @ beta[sl]
            # row_level == -1 picks the trailing zero curve
            eta = eta + curves[self.row_level, self.row_t]
        return eta

    def rmatvec(self, v):
        v = np.asarray(v, dtype=float)
        out = np.empty(self.n_cols)
        out[:self.p_e] = self.Xe.T @ np.bincount(self.row_event, weights=v, minlength=self.n_events)
        if self.level_bases:
            n_lev = len(self.level_bases)
            key = np.where(self.row_level >= 0, self.row_level, n_lev) * self.n_t + self.row_t
            per = np.bincount(key, weights=v, minlength=(n_lev + 1) * self.n_t).reshape(n_lev + 1, self.n_t)
            for j, (B, sl) in enumerate(zip(self.level_bases, self.slices)):
                out[sl] = B[:self.n_t].T @ per[j]
        return out

    def gram(self, w):
        """``X^T diag(w) X`` assembled from per-cell weight sums."""
        w = np.asarray(w, dtype=float)
        G = np.zeros((self.n_cols, self.n_cols))
        if not self.level_bases:
            we = np.bincount(self.row_event, weights=w, minlength=self.n_events)
            G[:] = _weighted_crossprod(self.Xe, we)
            return G
        W = self._cells(w)
        we = W.sum(axis=1)
        G[:self.p_e, :self.p_e] = _weighted_crossprod(self.Xe, we)
        for j, (B, sl) in enumerate(zip(self.level_bases, self.slices)):
            idx = self.level_events[j]
            Wj = W[idx]
            Bj = B[:self.n_t]
            cross = self.Xe[idx].T @ (Wj @ Bj)
            G[:self.p_e, sl] = cross
            G[sl, :self.p_e] = cross.T
            G[sl, sl] = Bj.T @ (Bj * Wj.sum(axis=0)[:, None])
        return G

    def dense(self):
        X = np.zeros((self.n_rows, self.n_cols))
        X[:, :self.p_e] = self.Xe[self.row_event]
        for j, (B, sl) in enumerate(zip(self.level_bases, self.slices)):
            rows = np.flatnonzero(self.row_level == j)
            X[rows, sl] = B[self.row_t[rows]]
        return X

    def rows_quadform(self, V):
        """``diag(X V X^T)`` without forming ``X``."""
        V = np.asarray(V, dtype=float)
        Ve = V[:self.p_e, :self.p_e]
        out = np.einsum("ij,jk,ik->i", self.Xe, Ve, self.Xe)[self.row_event]
        for j, (B, sl) in enumerate(zip(self.level_bases, self.slices)):
            rows = np.flatnonzero(self.row_level == j)
            if not len(rows):
                continue
            Bj = B[:self.n_t]
            bb = np.einsum("ij,jk,ik->i", Bj, V[sl, sl], Bj)
            eb = self.Xe @ V[:self.p_e, sl]
            ev, tv = self.row_event[rows], self.row_t[rows]
            out[rows] += bb[tv] + 2 * np.einsum("ij,ij->i", eb[ev], Bj[tv])
        return out


@dataclass
class Term:
    """One block of design columns with what is needed to rebuild it.

    ``kind`` is one of ``intercept``, ``dummy``, ``numeric``, ``smooth``,
    ``linear`` (a smooth reduced to a centered linear column) or
    ``baseline`` (the smooth in ``t`` for one event type).
    """

    name: str
    kind: str
    variable: str
    start: int = 0
    stop: int = 0
    levels: list = field(default_factory=list)
    reference: str | None = None
    level: str | None = None
    knots: list | None = None
    degree: int = 3
    penalty_order: int = 2
    Z: np.ndarray | None = None
    S: np.ndarray | None = None
    center: float = 0.0
    x_range: tuple | None = None
    lambda_group: str | None = None

    @property
    def cols(self):
        return slice(self.start, self.stop)

    @property
    def size(self):
        return self.stop - self.start

    @property
    def penalized(self):
        return self.S is not None

    def basis(self, x):
        """Constrained columns of a smooth or linear term at values ``x``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return (x - self.center)[:, None]
        return bspline_basis(np.asarray(self.knots), self.degree, x) @ self.Z

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("name", "kind", "variable", "start", "stop", "levels", "reference",
                                           "level", "knots", "degree", "penalty_order", "center", "lambda_group")}
        d["x_range"] = list(self.x_range) if self.x_range is not None else None
        d["Z"] = self.Z.tolist() if self.Z is not None else None
        d["S"] = self.S.tolist() if self.S is not None else None
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("Z", "S"):
            d[key] = np.asarray(d[key], dtype=float) if d.get(key) is not None else None
        if d.get("x_range") is not None:
            d["x_range"] = tuple(d["x_range"])
        return cls(**d)


@dataclass
class Design:
    """Built design: matrix operator, response, terms and penalty blocks."""

    matrix: object
    y: np.ndarray
    terms: list
    column_names: list
    d_max: int

    @property
    def penalized_terms(self):
        return [t for t in self.terms if t.penalized]

    def penalty_blocks(self):
        """``(slice, S)`` per penalized term, in term order."""
        return [(t.cols, t.S) for t in self.penalized_terms]


def categorical_labels(values, variable):
    """Map raw categorical values to canonical labels (internet 0/1 -> No/Yes)."""
    values = pd.Series(values)
    if variable == "internet":
        mapping = {"0": "No", "1": "Yes", "no": "No", "yes": "Yes", "false": "No", "true": "Yes"}
        return np.array([mapping.get(str(v).strip().lower(), str(v)) for v in values], dtype=object)
    return values.astype(str).to_numpy(dtype=object)


def _ordered_levels(labels, variable):
    present = set(labels)
    canon = [lv for lv in CATEGORICAL_LEVELS.get(variable, ()) if lv in present]
    return canon + sorted(present - set(canon))


def _require(events, variable):
    if variable not in events.columns:
        raise DataError(f"covariate {variable!r} missing from the event table")
    col = events[variable]
    if col.isna().any():
        raise DataError(f"covariate {variable!r} has {int(col.isna().sum())} missing values")
    return col


def _warn(msg):
    warnings.warn(msg, DesignWarning, stacklevel=3)


def _scaled_penalty(S, X, w):
    """Scale ``S`` so that unit smoothing weight is comparable to the data term."""
    XtX = X.T @ (X * w[:, None])
    ns = np.linalg.norm(S)
    return S * (np.linalg.norm(XtX) / ns) if ns > 0 else S


def _smooth_term(name, variable, x, weights, k, degree, order, group=None):
    """Constrained smooth of event-level values ``x`` (or None if dropped)."""
    u = np.unique(x)
    if len(u) < 2:
        _warn(f"{name}: covariate is constant, term dropped")
        return None, None
    knots = make_knots(x, k, degree)
    B = bspline_basis(knots, degree, x)
    Z = sum_to_zero_transform(B, weights)
    Bu = bspline_basis(knots, degree, u) @ Z
    if np.linalg.matrix_rank(Bu, tol=1e-9 * max(1.0, np.abs(Bu).max())) < Z.shape[1]:
        _warn(f"{name}: {len(u)} distinct values cannot support a basis of {k}; using a linear term")
        center = float(np.average(x, weights=weights))
        term = Term(name, "linear", variable, x_range=(float(u[0]), float(u[-1])), center=center)
        return term, (x - center)[:, None]
    S = Z.T @ difference_penalty(k, order, greville(knots, degree)) @ Z
    X = B @ Z
    term = Term(name, "smooth", variable, knots=knots.tolist(), degree=degree, penalty_order=order,
                Z=Z, S=_scaled_penalty(S, X, weights), x_range=(float(u[0]), float(u[-1])), lambda_group=group)
    return term, X


def build_design(spec, data) -> Design:
    """Assemble the design of ``spec`` on person-period data.

    Parameters
    ----------
    spec : ModelSpec
    data : PersonPeriodData

    Returns
    -------
    Design
        Columns are ordered intercept, linear terms (categorical dummies in
        canonical level order), event-type dummies, covariate smooths, then
        one baseline block in ``t`` per event type present.
    """
    events = data.events
    n_t = int(max(data.d_max, data.t.max() if len(data.t) else 1))
    weights = np.bincount(data.event_index, minlength=len(events)).astype(float)
    cols, terms, names = [], [], []

    def add(term, X, labels):
        term.start = sum(c.shape[1] for c in cols)
        term.stop = term.start + X.shape[1]
        cols.append(np.asarray(X, dtype=float))
        terms.append(term)
        names.extend(labels)

    add(Term("(Intercept)", "intercept", "(Intercept)"), np.ones((len(events), 1)), ["(Intercept)"])

    for var in spec.linear:
        raw = _require(events, var)
        if var in CATEGORICAL_LEVELS:
            labels = categorical_labels(raw, var)
            term, X = _dummy_term(var, labels)
            if term is not None:
                add(term, X, [f"{var}{lv}" for lv in term.levels])
        else:
            x = raw.to_numpy(dtype=float)
            if np.ptp(x) == 0:
                _warn(f"{var}: zero-variance covariate dropped")
                continue
            add(Term(var, "numeric", var), x[:, None], [var])

    base = spec.baseline
    by = base.by_factor
    types = categorical_labels(_require(events, by), by)
    type_term, Xt = _dummy_term(by, types)
    if type_term is not None:
        add(type_term, Xt, [f"{by}{lv}" for lv in type_term.levels])

    for sm in spec.smooths:
        name = f"s({sm.variable})"
        x = _require(events, sm.variable).to_numpy(dtype=float)
        term, X = _smooth_term(name, sm.variable, x, weights, sm.k, sm.degree, sm.penalty_order)
        if term is not None:
            add(term, X, [f"{name}.{j + 1}" for j in range(X.shape[1])] if term.kind == "smooth" else [name])

    Xe = np.concatenate(cols, axis=1)
    p_e = Xe.shape[1]

    # baseline: one constrained basis in t per event type, knots on the weeks it was observed
    levels = _ordered_levels(types, by)
    tgrid = np.arange(1, n_t + 1, dtype=float)
    level_of_event = np.full(len(events), -1)
    bases = []
    start = p_e
    row_type = types[data.event_index]
    k_min = max(base.degree + 2, base.penalty_order + 1)
    for lv in levels:
        counts = np.bincount(data.t[row_type == lv] - 1, minlength=n_t).astype(float)
        name = f"s(t):{lv}"
        seen = np.flatnonzero(counts)
        group = "baseline" if spec.shared_baseline_lambda else None
        if len(seen) < 2:
            _warn(f"{name}: a single observed week, baseline smooth dropped")
            continue
        k = min(base.k, len(seen))
        x_range = (1.0, float(seen.max() + 1))
        if k < k_min:
            _warn(f"{name}: {len(seen)} observed weeks cannot support a spline basis; using a linear term")
            center = float(np.average(tgrid, weights=counts))
            term = Term(name, "linear", "t", level=lv, center=center, x_range=x_range)
            Bl = (tgrid - center)[:, None]
        else:
            if k < base.k:
                _warn(f"{name}: {len(seen)} observed weeks, basis dimension reduced to {k}")
            knots = make_knots(seen + 1.0, k, base.degree)
            Bt = bspline_basis(knots, base.degree, tgrid)
            Z = sum_to_zero_transform(Bt, counts)
            Bl = Bt @ Z
            S = Z.T @ difference_penalty(k, base.penalty_order, greville(knots, base.degree)) @ Z
            term = Term(name, "baseline", "t", level=lv, knots=knots.tolist(), degree=base.degree,
                        penalty_order=base.penalty_order, Z=Z, S=_scaled_penalty(S, Bl, counts),
                        x_range=x_range, lambda_group=group)
        term.start, term.stop = start, start + Bl.shape[1]
        start = term.stop
        level_of_event[types == lv] = len(bases)
        bases.append(Bl)
        terms.append(term)
        names.extend([f"{name}.{j + 1}" for j in range(Bl.shape[1])] if term.kind == "baseline" else [name])

    matrix = PersonPeriodDesign(Xe, data.event_index, data.t, level_of_event, bases)
    return Design(matrix, np.asarray(data.y, dtype=float), terms, names, int(data.d_max))


def _dummy_term(var, labels):
    levels = _ordered_levels(labels, var)
    canon = CATEGORICAL_LEVELS.get(var, ())
    intended = canon[0] if canon else levels[0]
    absent = [lv for lv in canon if lv not in levels]
    for lv in absent:
        if lv != intended:
            _warn(f"{var}: level {lv!r} absent, zero-variance dummy dropped")
    if intended not in levels:
        _warn(f"{var}: reference level {intended!r} absent, using {levels[0]!r}")
    reference = levels[0]
    coded = levels[1:]
    if not coded:
        _warn(f"{var}: single level {reference!r}, zero-variance dummy dropped")
        return None, None
    X = np.column_stack([(labels == lv).astype(float) for lv in coded])
    return Term(var, "dummy", var, levels=coded, reference=reference), X


def event_columns(terms, events, n_cols_event):
    """Rebuild the event-level matrix of stored ``terms`` on new events."""
    n = len(events)
    Xe = np.zeros((n, n_cols_event))
    for term in terms:
        if term.kind == "intercept":
            Xe[:, term.cols] = 1.0
        elif term.kind == "dummy":
            labels = categorical_labels(_require(events, term.variable), term.variable)
            known = set(term.levels) | {term.reference}
            unseen = sorted(set(labels) - known)
            if unseen:
                raise UsageError(f"{term.variable}: level(s) {unseen} not seen when fitting")
            for j, lv in enumerate(term.levels):
                Xe[:, term.start + j] = labels == lv
        elif term.kind == "numeric":
            Xe[:, term.cols] = _require(events, term.variable).to_numpy(dtype=float)[:, None]
        elif term.kind in ("smooth", "linear") and term.variable != "t":
            Xe[:, term.cols] = term.basis(_require(events, term.variable).to_numpy(dtype=float))
    return Xe


def design_for(terms, events, event_index, t, by="event_type"):
    """Person-period operator for new (event, week) pairs using fitted terms."""
    p_e = max([tm.stop for tm in terms if tm.variable != "t"] + [0])
    Xe = event_columns(terms, events, p_e)
    t = np.asarray(t, dtype=np.int64)
    n_t = int(max(t.max() if len(t) else 1, 1))
    base_terms = [tm for tm in terms if tm.variable == "t"]
    labels = categorical_labels(_require(events, by), by) if base_terms or by in events else None
    level_of_event = np.full(len(events), -1)
    bases = []
    tgrid = np.arange(1, n_t + 1, dtype=float)
    type_term = next((tm for tm in terms if tm.kind == "dummy" and tm.variable == by), None)
    if labels is not None:
        known = {tm.level for tm in base_terms}
        if type_term is not None:
            known |= set(type_term.levels) | {type_term.reference}
        unseen = sorted(set(labels) - known)
        if unseen:
            raise UsageError(f"{by}: level(s) {unseen} not seen when fitting")
    for j, tm in enumerate(base_terms):
        if tm.start != p_e + sum(b.shape[1] for b in bases):
            raise UsageError("baseline blocks out of order")
        bases.append(tm.basis(tgrid))
        level_of_event[labels == tm.level] = j
    return PersonPeriodDesign(Xe, event_index, t, level_of_event, bases)
