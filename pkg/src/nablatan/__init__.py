"""Tangent surfaces of directed curves under affine connections, and their singularities."""

__version__ = "0.1.0"

from .classify import (
    ClassificationReport,
    Singularity,
    SingularityClass,
    classification_report,
    classify_chain,
    classify_point,
    classify_via_frames,
    codim,
    scan_curve,
)
from .connection import ChristoffelField, covariant_chain, symmetrize
from .curve import DirectedCurve, NablaType, curve_nabla_type, field_nabla_type, frame_from_degenerate
from .errors import NablaTanError
from .genericity import PerturbationSpec, montecarlo_types
from .geodesic import IntegratorOptions, geodesic_jet, integrate_geodesic
from .normal_forms import GermKind, germ_eval, model_curve
from .presets import make_preset
from .surface import eval_surface, frontal_frame, singular_locus

__all__ = [
    "ChristoffelField",
    "ClassificationReport",
    "DirectedCurve",
    "GermKind",
    "IntegratorOptions",
    "NablaTanError",
    "NablaType",
    "PerturbationSpec",
    "Singularity",
    "SingularityClass",
    "classification_report",
    "classify_chain",
    "classify_point",
    "classify_via_frames",
    "codim",
    "covariant_chain",
    "curve_nabla_type",
    "eval_surface",
    "field_nabla_type",
    "frame_from_degenerate",
    "frontal_frame",
    "geodesic_jet",
    "germ_eval",
    "integrate_geodesic",
    "make_preset",
    "model_curve",
    "montecarlo_types",
    "scan_curve",
    "singular_locus",
    "symmetrize",
]
