"""Independent brute-force oracles.

Nothing here imports from ``topokin``: curves are passed in as plain numpy
callables, measures come from dense uniform scans, and expressions are checked
by Python's own evaluator.
"""

from __future__ import annotations

import math

import numpy as np


def scan_preimage(position, a, b, center, radius, n=2_000_001):
    """Intervals of ``{t : |position(t) - center| < radius}`` from a dense scan.

    Endpoints are only accurate to the grid spacing ``(b - a) / (n - 1)``.
    """
    t = np.linspace(a, b, n)
    d = np.linalg.norm(position(t) - np.asarray(center, float), axis=-1)
    inside = d < radius
    out = []
    start = None
    for i in np.nonzero(np.diff(inside.astype(np.int8)))[0]:
        if inside[i + 1]:
            start = 0.5 * (t[i] + t[i + 1])
        else:
            out.append((a if start is None else start, 0.5 * (t[i] + t[i + 1])))
            start = None
    if inside[-1]:
        out.append((a if start is None and inside[0] else start, b))
    elif inside[0] and not out:
        out.append((a, b))
    return out


def retraced_circle_sweep(eps, n=4_000_000, bins=2_000_000):
    """Neighbourhood speed at (0, 1, 0) for angle(t) = t^2 / (2 pi), t in [0, 2 pi sqrt 2].

    The image measure is the covered fraction of the unit circle (angle bins
    hit by an inside sample), counted once no matter how many passes hit it.
    Returns ``(speed, image_measure, preimage_measure)``.
    """
    T = 2 * math.pi * math.sqrt(2)
    dt = T / n
    t = (np.arange(n) + 0.5) * dt
    th = t * t / (2 * math.pi)
    inside = np.cos(th) ** 2 + (np.sin(th) - 1) ** 2 < eps * eps
    pre = inside.sum() * dt
    ang = np.mod(th[inside], 2 * math.pi)
    covered = np.unique((ang / (2 * math.pi) * bins).astype(np.int64)).size
    image = covered * 2 * math.pi / bins
    return image / pre, image, pre


def transversal_sweep(position, speed, a, b, center, eps, n=4_000_000):
    """Neighbourhood speed when the branches inside the ball cross but never overlap.

    Without overlap the image measure is just the arc length of the inside
    samples, ``sum(speed(t) dt)``.
    """
    dt = (b - a) / n
    t = a + (np.arange(n) + 0.5) * dt
    inside = np.linalg.norm(position(t) - np.asarray(center, float), axis=-1) < eps
    pre = inside.sum() * dt
    image = speed(t[inside]).sum() * dt
    return image / pre, image, pre


def central_difference(f, t, h):
    return (f(t + h) - f(t - h)) / (2 * h)


_PY_NAMESPACE = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp, "log": math.log,
    "sqrt": math.sqrt, "atan": math.atan, "sinh": math.sinh, "cosh": math.cosh,
    "pi": math.pi, "e": math.e,
}


def python_eval(source: str, t: float) -> float:
    """Evaluate an expression with Python's own parser (``^`` becomes ``**``).

    Python gives ``**`` the same precedence and associativity as ``^`` here,
    including ``-2**2 == -4`` and ``2**3**2 == 512``.
    """
    value = eval(source.replace("^", "**"), {"__builtins__": {}}, {**_PY_NAMESPACE, "t": t})
    if isinstance(value, complex):
        raise ValueError("complex result")
    return float(value)


def random_expression(rng: np.random.Generator, depth: int) -> str:
    """Random well-formed expression text, nesting at most ``depth`` levels."""
    if depth <= 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.5:
            return "t"
        if r < 0.6:
            return str(rng.choice(["pi", "e"]))
        return str(rng.choice(["0.5", "1", "2", "3", "1.5", "0.25"]))
    kind = rng.random()
    if kind < 0.35:
        fn = str(rng.choice(["sin", "cos", "tan", "exp", "log", "sqrt", "atan", "sinh", "cosh"]))
        return f"{fn}({random_expression(rng, depth - 1)})"
    if kind < 0.45:
        return f"-({random_expression(rng, depth - 1)})"
    op = str(rng.choice(["+", "-", "*", "/", "^"]))
    left = random_expression(rng, depth - 1)
    right = random_expression(rng, depth - 1) if op != "^" else str(rng.choice(["2", "3", "0.5", "t", "-1"]))
    return f"({left}) {op} ({right})"


def fd_safe_points(jet_at, source, rng, h=1e-5, want=5, tries=40, lo=-3.0, hi=3.0, bound=1e4):
    """Up to ``want`` points where the central-difference oracle can be trusted.

    ``jet_at(t)`` returns an object with ``c0..c3``.  A point is safe when the
    jet, Python's evaluation and the stencil ``t +- h, t +- 2h`` all exist, the
    coefficients stay below ``bound``, and the differences with steps ``h``
    and ``2 h`` agree to ``3e-6`` relative (their gap is about three times the
    truncation error of the step-``h`` difference).  Returns tuples
    ``(t, jet, value, fd1, fd2)``: ``value`` is Python's evaluation at ``t``,
    ``fd1 ~ c1`` is differenced from ``c0`` and ``fd2 ~ c2`` from ``c1``.
    """
    out = []
    for _ in range(tries):
        t = float(rng.uniform(lo, hi))
        try:
            m2, m1, c, p1, p2 = (jet_at(t + k * h) for k in (-2, -1, 0, 1, 2))
            value = python_eval(source, t)
        except (ArithmeticError, ValueError):
            continue
        if max(abs(c.c0), abs(c.c1), abs(c.c2), abs(c.c3)) > bound:
            continue
        fd1, fd1_wide = (p1.c0 - m1.c0) / (2 * h), (p2.c0 - m2.c0) / (4 * h)
        fd2, fd2_wide = (p1.c1 - m1.c1) / (2 * h), (p2.c1 - m2.c1) / (4 * h)
        if (abs(fd1 - fd1_wide) > 3e-6 * max(1, abs(fd1))
                or abs(fd2 - fd2_wide) > 3e-6 * max(1, abs(fd2))):
            continue
        out.append((t, c, value, fd1, fd2))
        if len(out) == want:
            break
    return out
