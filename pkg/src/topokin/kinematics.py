"""Speeds from measures: average, neighbourhood and instantaneous speed.

The neighbourhood speed of a ball ``V = B(x, eps)`` around a point of the
image is ``m(V) / m(preimage(V))``: distance covered inside ``V`` over time
spent inside ``V``.  Instantaneous speed is the limit of that ratio along a
shrinking ladder of balls ``eps_k = eps0 * ratio**k``.  Acceleration reuses the
same machinery on the velocity curve ``t -> traj'(t)``.

``measure="set"`` (default) measures ``V`` as a set, each image point once;
``measure="traversal"`` counts retraced pieces once per pass.  The two agree
away from retraced points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .curves import Trajectory, estimate_diameter, evaluate_jet
from .measure import (
    DEFAULT_OPTIONS,
    Estimate,
    MeasureOptions,
    image_measure,
    lebesgue_measure_1d,
    partition_arc_length,
    preimage_ball_intervals,
)

MEASURE_MODES = ("set", "traversal")


@dataclass(frozen=True)
class NetOptions:
    """Shrinking-ball ladder.  ``eps0=None`` means ``0.1 * min(1, diameter)``."""

    eps0: float | None = None
    ratio: float = 0.5
    max_rungs: int = 30
    conv_tol: float = 1e-4
    extrapolate: bool = True

    def __post_init__(self):
        if self.eps0 is not None and not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if self.max_rungs < 3:
            raise ValueError("max_rungs must be >= 3")
        if not self.conv_tol > 0:
            raise ValueError("conv_tol must be positive")


class Rung(NamedTuple):
    eps: float
    speed: float
    image_meas: float
    preimage_meas: float
    components: int = 1  # connected pieces of the preimage


class NeighborhoodSpeed(NamedTuple):
    speed: float
    image_meas: float
    preimage_meas: float
    converged: bool = True
    components: int = 1


@dataclass(frozen=True)
class SpeedEstimate:
    value: float
    rungs: list[Rung]
    converged: bool
    inf_over_rungs: float
    oracle_speed: float | None
    extrapolated: bool
    exponent: float | None = None  # fitted p in v(eps) = v* + c eps^p
    measures_converged: bool = field(default=True)

    @property
    def rung_speeds(self) -> list[float]:
        return [r.speed for r in self.rungs]


def _check_mode(measure: str):
    if measure not in MEASURE_MODES:
        raise ValueError(f"measure must be one of {MEASURE_MODES}, got {measure!r}")


def _check_time(traj: Trajectory, t: float):
    if not traj.a <= t <= traj.b:
        raise ValueError(f"t = {t!r} outside [{traj.a!r}, {traj.b!r}]")


def average_speed(traj: Trajectory, opts: MeasureOptions = DEFAULT_OPTIONS,
                  measure: str = "set") -> Estimate:
    """Measure of the whole image over ``b - a`` (the preimage of the image is ``[a, b]``)."""
    _check_mode(measure)
    if measure == "set":
        num = image_measure(traj, None, opts)
        return Estimate(num / traj.duration, num.converged)
    length = partition_arc_length(traj, None, opts)
    return Estimate(length.value / traj.duration, length.converged)


def neighborhood_speed(traj: Trajectory, t: float, eps: float,
                       opts: MeasureOptions = DEFAULT_OPTIONS,
                       measure: str = "set") -> NeighborhoodSpeed:
    _check_mode(measure)
    _check_time(traj, t)
    if not eps > 0:
        raise ValueError("eps must be positive")
    center = traj.position(float(t))
    pre = preimage_ball_intervals(traj, center, eps, opts)
    pre_meas = lebesgue_measure_1d(pre)
    if pre_meas <= 0:
        # continuity puts a neighbourhood of t inside the ball
        raise RuntimeError(f"empty preimage for a ball around traj({t!r}); eps = {eps!r}")
    if measure == "set":
        num = image_measure(traj, pre, opts)
        ok = num.converged
    else:
        est = partition_arc_length(traj, pre, opts)
        num, ok = est.value, est.converged
    return NeighborhoodSpeed(float(num) / pre_meas, float(num), pre_meas, ok, len(pre))


def default_eps0(diameter: float) -> float:
    return 0.1 * min(1.0, diameter) if diameter > 0 else 0.1


def _agree(u: float, v: float, tol: float, scale: float) -> bool:
    return abs(u - v) <= tol * max(abs(u), abs(v), scale)


def _extrapolate(rungs: list[Rung], ratio: float, tol: float, scale: float):
    """Fit ``v(eps) = v* + c eps^p`` through the last three rungs.

    Returns ``(v*, p)`` if ``p`` lies in [0.25, 3] and the fit predicts the
    fourth-last rung to within ``tol``; otherwise ``None``.
    """
    if len(rungs) < 4:
        return None
    v = [r.speed for r in rungs[-4:]]
    d1, d2 = v[2] - v[1], v[3] - v[2]
    if d1 == 0 or d2 == 0 or d2 / d1 <= 0:
        return None
    q = d2 / d1  # ratio**p
    p = math.log(q) / math.log(ratio)
    if not 0.25 <= p <= 3:
        return None
    tail = d2 * q / (q - 1)  # c * eps_k^p
    limit = v[3] - tail
    predicted = limit + tail / q**3
    if abs(predicted - v[0]) > tol * max(abs(limit), abs(v[3]), scale):
        return None
    return limit, p


def instantaneous_speed(traj: Trajectory, t: float, net: NetOptions | None = None,
                        opts: MeasureOptions = DEFAULT_OPTIONS,
                        measure: str = "set") -> SpeedEstimate:
    """Limit of neighbourhood speeds over balls ``B(traj(t), eps0 * ratio**k)``.

    The ladder stops once two consecutive rung speeds agree to ``conv_tol``,
    relative to the larger of the two speeds and the curve's speed scale
    ``diameter / (b - a)`` (the floor lets stationary points, where speeds
    tend to zero, converge), and their preimages have the same number of
    connected pieces (a ball still catching a far branch is not yet local).
    ``value`` is the power-law extrapolated limit when the fit is
    trustworthy, else the last rung.  ``inf_over_rungs`` is
    the infimum over the computed ladder.
    """
    _check_mode(measure)
    _check_time(traj, t)
    net = net or NetOptions()
    diam = estimate_diameter(traj)
    eps0 = net.eps0 if net.eps0 is not None else default_eps0(diam)
    scale = diam / traj.duration

    rungs: list[Rung] = []
    measures_ok = True
    converged = False
    for k in range(net.max_rungs):
        eps = eps0 * net.ratio**k
        ns = neighborhood_speed(traj, t, eps, opts, measure)
        measures_ok &= ns.converged
        rungs.append(Rung(eps, ns.speed, ns.image_meas, ns.preimage_meas, ns.components))
        if (k and rungs[-1].components == rungs[-2].components
                and _agree(rungs[-1].speed, rungs[-2].speed, net.conv_tol, scale)):
            converged = True
            break

    value, exponent, extrapolated = rungs[-1].speed, None, False
    if net.extrapolate:
        fit = _extrapolate(rungs, net.ratio, net.conv_tol, scale)
        if fit is not None:
            value, exponent = fit
            extrapolated = True
    oracle = float(np.linalg.norm(evaluate_jet(traj, t, 1).d1))
    return SpeedEstimate(
        value=max(float(value), 0.0),
        rungs=rungs,
        converged=converged,
        inf_over_rungs=min(r.speed for r in rungs),
        oracle_speed=oracle,
        extrapolated=extrapolated,
        exponent=exponent,
        measures_converged=measures_ok,
    )


def derived_trajectory(traj: Trajectory) -> Trajectory:
    """The velocity curve ``t -> traj'(t)`` as a trajectory with jets to order 2."""
    if traj.max_jet_order < 3:
        raise ValueError("derived trajectory needs jets of order 3")
    ev = traj.evaluator

    def derived(t, order):
        return ev(t, order + 1)[1:order + 2]

    return Trajectory(traj.a, traj.b, derived, 2, f"d/dt {traj.label}".rstrip())


def acceleration_magnitude(traj: Trajectory, t: float, net: NetOptions | None = None,
                           opts: MeasureOptions = DEFAULT_OPTIONS,
                           measure: str = "set") -> SpeedEstimate:
    """Instantaneous speed of the velocity curve; its oracle is ``|traj''(t)|``."""
    return instantaneous_speed(derived_trajectory(traj), t, net, opts, measure)


def newton_force(traj: Trajectory, mass: float, t: float) -> np.ndarray:
    """``mass * traj''(t)`` for ``t`` in the open interval ``(a, b)``."""
    if not mass > 0:
        raise ValueError("mass must be positive")
    if not traj.a < t < traj.b:
        raise ValueError(f"t = {t!r} must lie strictly inside ({traj.a!r}, {traj.b!r})")
    return mass * evaluate_jet(traj, t, 2).d2
