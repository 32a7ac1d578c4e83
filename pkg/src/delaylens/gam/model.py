"""Grouped proportional-hazards GAM: model specs and fitted results."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from ..errors import UsageError
from ..survival import PersonPeriodData, expand_frame
from .design import Term, build_design, design_for
from .pirls import cloglog_inverse, pirls_fit
from .smoothing import gcv_score, select_lambda

Z_95 = stats.norm.ppf(0.975)


@dataclass(frozen=True)
class SmoothTermSpec:
    """Penalized B-spline smooth of one covariate.

    ``by_factor`` gives one smooth per level of a categorical (used for the
    baseline in ``t``). Smooths are always centered over the fitted rows.
    """

    variable: str
    k: int = 10
    degree: int = 3
    penalty_order: int = 2
    by_factor: str | None = None

    def __post_init__(self):
        if self.k < self.degree + 2:
            raise UsageError(f"s({self.variable}): k={self.k} below degree + 2")
        if self.k <= self.penalty_order:
            raise UsageError(f"s({self.variable}): k={self.k} must exceed the penalty order")


M1_SMOOTHS = ("logGDP", "logPOP", "logFATALITY_cum", "GOVCENSOR", "SELFCENSOR")
M1_LINEAR = ("regime", "internet")
M2_SMOOTHS = ("logBORDER", "logPOP50km", "logDISTANCE", "logFATALITY_wk")


@dataclass(frozen=True)
class ModelSpec:
    """Additive cloglog predictor: baseline ``s(t)`` per event type, smooths, linear terms."""

    name: str
    baseline: SmoothTermSpec = SmoothTermSpec("t", by_factor="event_type")
    smooths: tuple = ()
    linear: tuple = ()
    shared_baseline_lambda: bool = False
    criterion: str = "gcv"
    fixed_lambda: tuple | None = None
    d_max: int = 20

    def __post_init__(self):
        if self.baseline.by_factor is None:
            raise UsageError("the baseline needs a by_factor (event type)")
        if self.criterion != "gcv":
            raise UsageError(f"unknown smoothing criterion {self.criterion!r}")
        object.__setattr__(self, "smooths", tuple(s if isinstance(s, SmoothTermSpec) else SmoothTermSpec(s)
                                                  for s in self.smooths))
        object.__setattr__(self, "linear", tuple(self.linear))
        if self.fixed_lambda is not None:
            object.__setattr__(self, "fixed_lambda", tuple(np.atleast_1d(self.fixed_lambda).astype(float)))

    @classmethod
    def m1(cls, k=10, degree=3, penalty_order=2, **kw):
        """Country-level model: five country smooths plus regime and internet."""
        base = SmoothTermSpec("t", k, degree, penalty_order, "event_type")
        return cls("M1", base, tuple(SmoothTermSpec(v, k, degree, penalty_order) for v in M1_SMOOTHS),
                   M1_LINEAR, **kw)

    @classmethod
    def m2(cls, k=10, degree=3, penalty_order=2, weekly_events=False, **kw):
        """Event-level model, meant to be fitted within one country.

        ``weekly_events`` adds a smooth of ``logEVENTS_wk``, the country's
        event count in the week of occurrence.
        """
        base = SmoothTermSpec("t", k, degree, penalty_order, "event_type")
        names = M2_SMOOTHS + (("logEVENTS_wk",) if weekly_events else ())
        return cls("M2", base, tuple(SmoothTermSpec(v, k, degree, penalty_order) for v in names), (), **kw)

    def variables(self):
        return [self.baseline.by_factor] + [s.variable for s in self.smooths] + list(self.linear)

    def to_dict(self):
        d = asdict(self)
        d["smooths"] = [asdict(s) for s in self.smooths]
        d["linear"] = list(self.linear)
        d["fixed_lambda"] = list(self.fixed_lambda) if self.fixed_lambda is not None else None
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["baseline"] = SmoothTermSpec(**d["baseline"])
        d["smooths"] = tuple(SmoothTermSpec(**s) for s in d["smooths"])
        return cls(**d)


@dataclass
class PartialEffectCurve:
    x: np.ndarray
    estimate: np.ndarray
    se: np.ndarray
    clamped: np.ndarray

    def to_frame(self):
        return pd.DataFrame({"x": self.x, "estimate": self.estimate, "se": self.se, "clamped": self.clamped})


@dataclass
class FitResult:
    """Fitted model with everything needed to predict on new data."""

    spec: ModelSpec
    terms: list
    column_names: list
    beta: np.ndarray
    cov: np.ndarray
    lam: np.ndarray
    edf: dict
    deviance: float
    penalized_loglik: float
    gcv: float
    n_rows: int
    n_events: int
    convergence: dict = field(default_factory=dict)
    design_warnings: list = field(default_factory=list)

    @property
    def penalized_terms(self):
        return [t for t in self.terms if t.penalized]

    @property
    def edf_total(self):
        return float(sum(self.edf.values()))

    def term(self, name):
        for t in self.terms:
            if name in (t.name, t.variable, f"s({name})"):
                return t
        raise UsageError(f"no term named {name!r}")

    def lambdas(self):
        return {t.name: float(lv) for t, lv in zip(self.penalized_terms, self.lam)}

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "column_names": list(self.column_names),
            "coefficients": self.beta.tolist(),
            "covariance": self.cov.tolist(),
            "lambda": self.lambdas(),
            "edf": self.edf,
            "deviance": self.deviance,
            "penalized_loglik": self.penalized_loglik,
            "gcv": self.gcv,
            "n_rows": self.n_rows,
            "n_events": self.n_events,
            "terms": [t.to_dict() for t in self.terms],
            "convergence": self.convergence,
            "warnings": list(self.design_warnings),
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d):
        terms = [Term.from_dict(t) for t in d["terms"]]
        lam = np.array([d["lambda"][t.name] for t in terms if t.penalized])
        return cls(ModelSpec.from_dict(d["spec"]), terms, d["column_names"], np.asarray(d["coefficients"]),
                   np.asarray(d["covariance"]), lam, dict(d["edf"]), d["deviance"], d["penalized_loglik"],
                   d["gcv"], d["n_rows"], d["n_events"], d.get("convergence", {}), d.get("warnings", []))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _resolve_lambda(spec, terms):
    pen = [t for t in terms if t.penalized]
    fixed = np.asarray(spec.fixed_lambda, dtype=float)
    if fixed.size == 1:
        return np.full(len(pen), float(fixed[0]))
    if fixed.size != len(pen):
        raise UsageError(f"{fixed.size} fixed smoothing parameters for {len(pen)} penalized terms")
    return fixed


def fit_model(spec: ModelSpec, data, *, tol=1e-8, max_iter=200, xtol=0.05, method="newton") -> FitResult:
    """Build the design, select smoothing parameters by GCV and fit.

    Parameters
    ----------
    spec : ModelSpec
    data : PersonPeriodData or DataFrame
        A delay table with covariate columns is expanded with ``spec.d_max``.
    method : {"newton", "exact"}
        Trial-fit strategy of :func:`select_lambda`.
    """
    if isinstance(data, pd.DataFrame):
        data = expand_frame(data, spec.d_max)
    if not isinstance(data, PersonPeriodData):
        raise UsageError("fit_model needs person-period data or a delay table")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        design = build_design(spec, data)
    notes = [str(w.message) for w in caught]
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    X, y = design.matrix, design.y
    blocks = design.penalty_blocks()
    pen = design.penalized_terms
    names = {}
    groups = [names.setdefault(t.lambda_group or t.name, len(names)) for t in pen]
    convergence = {}
    if spec.fixed_lambda is not None:
        lam = _resolve_lambda(spec, design.terms)
        beta0 = None
    else:
        search = select_lambda(X, y, blocks, groups=groups, xtol=xtol, tol=tol, max_iter=max_iter, method=method)
        lam = search.lam
        beta0 = search.fit.beta
        convergence.update(method=method, sweeps=search.sweeps, evaluations=search.evaluations,
                           plateau=search.plateau, flat=search.flat, history=search.history)
    fit = pirls_fit(X, y, blocks, lam, beta0=beta0, tol=tol, max_iter=max_iter, strict=True)
    convergence.update(iterations=fit.iterations, converged=fit.converged, ridge=fit.ridge, trace=fit.trace)
    edf = {t.name: float(fit.edf_coef[t.cols].sum()) for t in design.terms}
    pll = -0.5 * fit.penalized_deviance
    return FitResult(spec, design.terms, design.column_names, fit.beta, fit.cov, np.asarray(lam, dtype=float),
                     edf, fit.deviance, pll, gcv_score(len(y), fit.deviance, fit.edf), len(y),
                     len(data.events), convergence, notes)


def _fitted_design(fit, events, t):
    events = events.reset_index(drop=True)
    t = np.broadcast_to(np.asarray(t, dtype=np.int64), (len(events),))
    if np.any(t < 1):
        raise UsageError("weeks start at 1")
    return design_for(fit.terms, events, np.arange(len(events)), t, fit.spec.baseline.by_factor)


def predict_hazard(fit: FitResult, covariates: pd.DataFrame, t):
    """Hazard ``pi`` and the standard error of ``eta`` for each covariate row.

    Parameters
    ----------
    fit : FitResult
    covariates : DataFrame
        One row per prediction with every covariate the model uses.
    t : int or array of int
        Week of each row.

    Returns
    -------
    pi, se_eta : ndarray
    """
    X = _fitted_design(fit, covariates, t)
    eta = X.matvec(fit.beta)
    se = np.sqrt(np.maximum(X.rows_quadform(fit.cov), 0.0))
    pi, _ = cloglog_inverse(eta)
    return pi, se


def linear_predictor(fit: FitResult, covariates: pd.DataFrame, t):
    return _fitted_design(fit, covariates, t).matvec(fit.beta)


def baseline_hazard_curve(fit: FitResult, event_type, t=None) -> pd.DataFrame:
    """Hazard of one event type with every covariate effect at zero.

    Returns columns ``t, eta, se, hazard, lower, upper`` where the band is
    a pointwise 95% interval mapped from the ``eta`` scale.
    """
    t = np.arange(1, fit.spec.d_max + 1) if t is None else np.asarray(t, dtype=np.int64)
    by = fit.spec.baseline.by_factor
    x = np.zeros((len(t), len(fit.beta)))
    x[:, 0] = 1.0
    known = False
    for term in fit.terms:
        if term.kind == "dummy" and term.variable == by:
            known |= event_type == term.reference or event_type in term.levels
            if event_type in term.levels:
                x[:, term.start + term.levels.index(event_type)] = 1.0
        elif term.variable == "t" and term.level == event_type:
            known = True
            x[:, term.cols] = term.basis(t.astype(float))
    if not known:
        raise UsageError(f"{by}: level {event_type!r} not seen when fitting")
    eta = x @ fit.beta
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", x, fit.cov, x), 0.0))
    pi, _ = cloglog_inverse(eta)
    lo, _ = cloglog_inverse(eta - Z_95 * se)
    hi, _ = cloglog_inverse(eta + Z_95 * se)
    return pd.DataFrame({"t": t, "eta": eta, "se": se, "hazard": pi, "lower": lo, "upper": hi})


def baseline_event_types(fit: FitResult):
    by = fit.spec.baseline.by_factor
    levels = [t.level for t in fit.terms if t.variable == "t"]
    for term in fit.terms:
        if term.kind == "dummy" and term.variable == by:
            levels += [term.reference] + term.levels
    seen = []
    for lv in levels:
        if lv not in seen:
            seen.append(lv)
    return seen


def partial_effect(fit: FitResult, term, grid=None, n=100) -> PartialEffectCurve:
    """Centered effect of a smooth with pointwise standard errors.

    Grid points outside the fitted covariate range are evaluated at the
    nearest boundary and flagged in ``clamped``.
    """
    tm = fit.term(term) if isinstance(term, str) else term
    if tm.kind not in ("smooth", "linear", "baseline"):
        raise UsageError(f"{tm.name} is not a smooth term")
    lo, hi = tm.x_range
    x = np.linspace(lo, hi, n) if grid is None else np.asarray(grid, dtype=float)
    Xg = tm.basis(np.clip(x, lo, hi) if tm.kind != "linear" else x)
    b = fit.beta[tm.cols]
    V = fit.cov[tm.cols, tm.cols]
    est = Xg @ b
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", Xg, V, Xg), 0.0))
    return PartialEffectCurve(x, est, se, (x < lo) | (x > hi))


def coefficient_table(fit: FitResult, include_intercept=False) -> pd.DataFrame:
    """Wald table of the linear terms in model order.

    Columns ``block, reference, term, estimate, se, z, p`` with two-sided
    normal p-values.
    """
    rows = []
    selected = [t for t in fit.terms if t.kind in ("dummy", "numeric") and t.variable in fit.spec.linear]
    selected.sort(key=lambda t: list(fit.spec.linear).index(t.variable))
    if include_intercept:
        selected = [t for t in fit.terms if t.kind == "intercept"] + selected
    for tm in selected:
        labels = tm.levels if tm.kind == "dummy" else [tm.name]
        for j, label in enumerate(labels):
            i = tm.start + j
            est = float(fit.beta[i])
            se = float(np.sqrt(fit.cov[i, i]))
            z = est / se if se > 0 else np.nan
            rows.append({"block": tm.variable, "reference": tm.reference or "", "term": label,
                         "estimate": est, "se": se, "z": z, "p": float(2 * stats.norm.sf(abs(z)))})
    return pd.DataFrame(rows, columns=["block", "reference", "term", "estimate", "se", "z", "p"])


def fitted_values(fit: FitResult, data: PersonPeriodData):
    """In-sample hazards of every person-period row."""
    X = design_for(fit.terms, data.events, data.event_index, data.t, fit.spec.baseline.by_factor)
    pi, _ = cloglog_inverse(X.matvec(fit.beta))
    return pi


def model_survival(fit: FitResult, covariates: pd.Series | dict, t=None):
    """``prod_{u<=t} (1 - pi_u)`` for one covariate profile."""
    t = np.arange(1, fit.spec.d_max + 1) if t is None else np.asarray(t)
    frame = pd.DataFrame([dict(covariates)] * len(t))
    pi, _ = predict_hazard(fit, frame, t)
    return np.cumprod(1 - pi)


__all__ = [
    "SmoothTermSpec", "ModelSpec", "FitResult", "PartialEffectCurve", "fit_model", "predict_hazard",
    "linear_predictor", "baseline_hazard_curve", "baseline_event_types", "partial_effect",
    "coefficient_table", "fitted_values", "model_survival",
]
