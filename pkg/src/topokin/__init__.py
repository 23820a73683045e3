"""Measure-based kinematics of smooth curves in R^3.

Speed here is a ratio of measures: the arc-length measure of the part of the
image inside a ball over the time the curve spends inside it.
"""

from .curves import (
    CATALOG,
    NO_SURFACE,
    DomainError,
    Jet,
    Surface,
    Trajectory,
    ValidationReport,
    cylinder,
    evaluate_jet,
    make_catalog_trajectory,
    plane,
    sphere,
    torus,
    validate_on_surface,
    validate_smoothness,
)
from .expr import (
    EvalDomainError,
    ExprError,
    ParseError,
    ScalarJet,
    eval_scalar_jet,
    make_expression_trajectory,
    parse_expression,
    to_source,
)
from .kinematics import (
    NetOptions,
    SpeedEstimate,
    acceleration_magnitude,
    average_speed,
    derived_trajectory,
    instantaneous_speed,
    neighborhood_speed,
    newton_force,
)
from .measure import (
    DEFAULT_OPTIONS,
    Estimate,
    IntervalSet,
    LengthEstimate,
    MeasureOptions,
    QuadratureError,
    image_measure,
    lebesgue_measure_1d,
    partition_arc_length,
    preimage_ball_intervals,
    quadrature_arc_length,
)

__version__ = "0.1.0"
