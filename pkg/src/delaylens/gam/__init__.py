"""Penalized-spline hazard GAM with complementary log-log link."""

from .basis import apply_constraint, bspline_basis, difference_penalty, make_knots
from .design import DenseDesign, Design, PersonPeriodDesign, build_design
from .model import (FitResult, ModelSpec, PartialEffectCurve, SmoothTermSpec, baseline_event_types,
                    baseline_hazard_curve, coefficient_table, fit_model, fitted_values, model_survival,
                    partial_effect, predict_hazard)
from .pirls import cloglog_inverse, penalized_gradient, penalized_loglik, pirls_fit
from .smoothing import gcv_score, select_lambda

__all__ = [
    "apply_constraint", "bspline_basis", "difference_penalty", "make_knots", "DenseDesign", "Design",
    "PersonPeriodDesign", "build_design", "FitResult", "ModelSpec", "PartialEffectCurve", "SmoothTermSpec",
    "baseline_event_types", "baseline_hazard_curve", "coefficient_table", "fit_model", "fitted_values",
    "model_survival", "partial_effect", "predict_hazard", "cloglog_inverse", "penalized_gradient",
    "penalized_loglik", "pirls_fit", "gcv_score", "select_lambda",
]
