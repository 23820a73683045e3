"""Trajectories, surfaces and sample-based validation of both.

A trajectory is a closed time interval plus a vectorised jet evaluator: given an
array of times and an order ``k`` it returns ``k + 1`` arrays of shape
``t.shape + (3,)`` holding position and derivatives.  Surfaces are membership
residuals only (zero on the surface).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# evaluator(t, order) -> [d0, d1, ..., d_order], each of shape t.shape + (3,)
JetEvaluator = Callable[[np.ndarray, int], list]


class DomainError(ValueError):
    """Raised when a trajectory is evaluated outside its time interval."""


@dataclass(frozen=True)
class Jet:
    """Position and derivatives of a trajectory at one time.

    Derivatives above the requested order are ``None``.
    """

    t: float
    d0: np.ndarray
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None
    d3: np.ndarray | None = None

    @property
    def order(self) -> int:
        return sum(d is not None for d in (self.d1, self.d2, self.d3))


@dataclass(frozen=True)
class Trajectory:
    a: float
    b: float
    evaluator: JetEvaluator = field(repr=False, compare=False)
    max_jet_order: int = 3
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("trajectory interval must be finite")
        if not self.a < self.b:
            raise ValueError(f"interval requires a < b (got a={self.a}, b={self.b})")
        if self.max_jet_order not in (2, 3):
            raise ValueError("max_jet_order must be 2 or 3")

    @property
    def duration(self) -> float:
        return self.b - self.a

    def derivatives(self, t, order: int = 0) -> list[np.ndarray]:
        """Vectorised evaluation; returns ``[d0, ..., d_order]``."""
        if order > self.max_jet_order:
            raise ValueError(f"order {order} exceeds max_jet_order {self.max_jet_order}")
        t = np.asarray(t, dtype=float)
        if np.any(t < self.a) or np.any(t > self.b) or np.any(np.isnan(t)):
            raise DomainError(f"t outside [{self.a!r}, {self.b!r}]")
        return [np.asarray(d, dtype=float) for d in self.evaluator(t, order)[: order + 1]]

    def position(self, t) -> np.ndarray:
        return self.derivatives(t, 0)[0]

    def __call__(self, t) -> np.ndarray:
        return self.position(t)


def evaluate_jet(traj: Trajectory, t: float, order: int = 2) -> Jet:
    """Position and derivatives up to ``order`` at a single time ``t``."""
    if order < 0:
        raise ValueError("order must be non-negative")
    ds = traj.derivatives(float(t), order)
    ds = ds + [None] * (4 - len(ds))
    return Jet(float(t), *ds)


# ---------------------------------------------------------------------------
# Catalog

def _stack(*components) -> np.ndarray:
    shape = np.broadcast(*components).shape
    return np.stack([np.broadcast_to(c, shape) for c in components], axis=-1).astype(float)


def _circle_jets(R: float) -> JetEvaluator:
    def ev(t, order):
        c, s = np.cos(t), np.sin(t)
        z = np.zeros_like(t)
        return [
            _stack(R * c, R * s, z),
            _stack(-R * s, R * c, z),
            _stack(-R * c, -R * s, z),
            _stack(R * s, -R * c, z),
        ][: order + 1]
    return ev


def _helix_jets(R: float, pitch: float) -> JetEvaluator:
    circle = _circle_jets(R)

    def ev(t, order):
        out = circle(t, order)
        zs = [pitch * t, np.full_like(t, pitch), np.zeros_like(t), np.zeros_like(t)]
        for k in range(len(out)):
            out[k][..., 2] = zs[k]
        return out
    return ev


def _cubic_line_jets(t, order):
    z = np.zeros_like(t)
    return [
        _stack(t**3, z, z),
        _stack(3 * t**2, z, z),
        _stack(6 * t, z, z),
        _stack(np.full_like(t, 6.0), z, z),
    ][: order + 1]


def _gerono_jets(A: float) -> JetEvaluator:
    def ev(t, order):
        s, c = np.sin(t), np.cos(t)
        s2, c2 = np.sin(2 * t), np.cos(2 * t)
        z = np.zeros_like(t)
        return [
            _stack(A * s, 0.5 * A * s2, z),
            _stack(A * c, A * c2, z),
            _stack(-A * s, -2 * A * s2, z),
            _stack(-A * c, -4 * A * c2, z),
        ][: order + 1]
    return ev


def _accelerating_circle_jets(t, order):
    # angle t^2/(2 pi): angular speed t/pi, angular acceleration 1/pi
    th = t * t / (2 * math.pi)
    w = t / math.pi
    al = 1 / math.pi
    c, s = np.cos(th), np.sin(th)
    z = np.zeros_like(t)
    return [
        _stack(c, s, z),
        _stack(-s * w, c * w, z),
        _stack(-c * w**2 - s * al, -s * w**2 + c * al, z),
        _stack(s * w**3 - 3 * c * w * al, -c * w**3 - 3 * s * w * al, z),
    ][: order + 1]


# name -> (arity, factory(params) -> evaluator)
CATALOG: dict[str, tuple[int, Callable[..., JetEvaluator]]] = {
    "circle": (1, lambda R: _circle_jets(R)),
    "helix": (2, lambda R, c: _helix_jets(R, c)),
    "cubic_line": (0, lambda: _cubic_line_jets),
    "double_circle": (1, lambda R: _circle_jets(R)),
    "gerono": (1, lambda A: _gerono_jets(A)),
    "accelerating_circle": (0, lambda: _accelerating_circle_jets),
}


def make_catalog_trajectory(name: str, params: Sequence[float], a: float, b: float) -> Trajectory:
    """Build a closed-form trajectory from the catalog.

    Entries: ``circle(R)``, ``helix(R, c)``, ``cubic_line()``,
    ``double_circle(R)``, ``gerono(A)`` and ``accelerating_circle()``.
    All provide jets up to order 3.
    """
    try:
        arity, factory = CATALOG[name]
    except KeyError:
        raise ValueError(
            f"unknown catalog trajectory {name!r}; expected one of {sorted(CATALOG)}"
        ) from None
    params = [float(p) for p in params]
    if len(params) != arity:
        raise ValueError(f"{name} takes {arity} parameter(s), got {len(params)}")
    label = f"{name}({', '.join(repr(p) for p in params)})"
    return Trajectory(float(a), float(b), factory(*params), 3, label)


# ---------------------------------------------------------------------------
# Surfaces

SURFACE_KINDS = ("sphere", "cylinder", "torus", "plane", "none")


@dataclass(frozen=True)
class Surface:
    """A surface in R^3 given by a membership residual.

    ``params`` holds: sphere ``(R, cx, cy, cz)``; cylinder ``(R,)`` about the
    z axis; torus ``(R, r)`` about the z axis; plane ``(z0,)``; none ``()``.
    """

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in SURFACE_KINDS:
            raise ValueError(f"unknown surface kind {self.kind!r}")
        expected = {"sphere": 4, "cylinder": 1, "torus": 2, "plane": 1, "none": 0}[self.kind]
        if len(self.params) != expected:
            raise ValueError(f"{self.kind} takes {expected} parameter(s), got {len(self.params)}")

    def residual(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        if self.kind == "sphere":
            R, cx, cy, cz = self.params
            return (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 - R**2
        if self.kind == "cylinder":
            (R,) = self.params
            return x**2 + y**2 - R**2
        if self.kind == "torus":
            R, r = self.params
            return (np.hypot(x, y) - R) ** 2 + z**2 - r**2
        if self.kind == "plane":
            (z0,) = self.params
            return z - z0
        return np.zeros_like(x)


def sphere(radius: float, center=(0.0, 0.0, 0.0)) -> Surface:
    return Surface("sphere", (float(radius), *map(float, center)))


def cylinder(radius: float) -> Surface:
    return Surface("cylinder", (float(radius),))


def torus(major: float, minor: float) -> Surface:
    return Surface("torus", (float(major), float(minor)))


def plane(z0: float = 0.0) -> Surface:
    return Surface("plane", (float(z0),))


NO_SURFACE = Surface("none")


# ---------------------------------------------------------------------------
# Validation

@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    max_residual: float
    worst_t: float
    samples_checked: int
    messages: list[str] = field(default_factory=list)


def validate_on_surface(traj: Trajectory, surf: Surface, n_samples: int = 1000,
                        tol: float = 1e-9) -> ValidationReport:
    """Check ``|residual(traj(t))| <= tol`` on an equispaced grid including both ends."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if tol <= 0:
        raise ValueError("tol must be positive")
    ts = np.linspace(traj.a, traj.b, n_samples)
    res = np.abs(surf.residual(traj.position(ts)))
    if not np.all(np.isfinite(res)):
        raise FloatingPointError("non-finite residual while validating containment")
    i = int(np.argmax(res))
    worst = float(res[i])
    passed = worst <= tol
    msg = [] if passed else [
        f"trajectory leaves {surf.kind} surface: |residual| = {worst!r} at t = {ts[i]!r} (tol {tol!r})"
    ]
    return ValidationReport(passed, worst, float(ts[i]), n_samples, msg)


def validate_smoothness(traj: Trajectory, n_samples: int = 200, fd_step: float = 1e-4,
                        fd_tol: float = 1e-6) -> ValidationReport:
    """Compare reported d1, d2 with central differences of d0, d1.

    Only interior samples are checked (each needs ``t +- fd_step`` in the domain).
    """
    if n_samples < 3:
        raise ValueError("n_samples must be >= 3")
    if fd_step <= 0 or fd_tol <= 0:
        raise ValueError("fd_step and fd_tol must be positive")
    if traj.b - traj.a <= 4 * fd_step:
        raise ValueError("domain too short for the finite-difference step")
    ts = np.linspace(traj.a + fd_step, traj.b - fd_step, n_samples)
    d0p, d1p, d2p = traj.derivatives(ts + fd_step, 2)
    d0m, d1m, d2m = traj.derivatives(ts - fd_step, 2)
    _, d1, d2 = traj.derivatives(ts, 2)
    err1 = np.abs(d1 - (d0p - d0m) / (2 * fd_step)).max(axis=-1)
    err2 = np.abs(d2 - (d1p - d1m) / (2 * fd_step)).max(axis=-1)
    err = np.maximum(err1, err2)
    if not np.all(np.isfinite(err)):
        raise FloatingPointError("non-finite jet values while validating smoothness")
    i = int(np.argmax(err))
    worst = float(err[i])
    passed = worst <= fd_tol
    msgs = []
    if not passed:
        which = "d1" if err1[i] >= err2[i] else "d2"
        msgs.append(f"{which} disagrees with finite differences by {worst!r} at t = {ts[i]!r}")
    return ValidationReport(passed, worst, float(ts[i]), n_samples, msgs)


def estimate_diameter(traj: Trajectory, n_samples: int = 256) -> float:
    """Largest pairwise distance among ``n_samples`` equispaced points of the image."""
    p = traj.position(np.linspace(traj.a, traj.b, n_samples))
    d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
    return float(d.max())
