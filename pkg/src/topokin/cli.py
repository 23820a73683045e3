"""``topokin`` command line: scene files in, CSV (or aligned tables) out.

Exit codes: 0 success, 1 containment validation failed, 2 usage / scene /
input errors, 3 a requested result did not converge.  Floats are printed in
shortest round-trip form, so identical inputs give byte-identical output.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import curves
from .curves import Surface, Trajectory, make_catalog_trajectory, validate_on_surface, validate_smoothness
from .expr import ExprError, ParseError, Var, eval_scalar_jet, make_expression_trajectory, parse_expression
from .kinematics import (
    MEASURE_MODES,
    NetOptions,
    acceleration_magnitude,
    average_speed,
    instantaneous_speed,
    newton_force,
)
from .measure import MeasureOptions, QuadratureError, image_measure, partition_arc_length, quadrature_arc_length

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2, 3

PROFILE_HEADER = ("t", "speed", "converged", "oracle_speed", "inf_over_rungs", "rungs_used")


class SceneError(Exception):
    def __init__(self, path, line: int | None, message: str):
        self.line = line
        where = f"{path}:{line}" if line is not None else f"{path}"
        super().__init__(f"{where}: {message}")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Scene:
    surface: Surface
    trajectory: Trajectory
    mass: float = 1.0


# ---------------------------------------------------------------------------
# Scene files

_SURFACE_KEYS = {
    "sphere": ({"radius"}, {"center"}),
    "cylinder": ({"radius"}, set()),
    "torus": ({"major", "minor"}, set()),
    "plane": ({"z"}, set()),
    "none": (set(), set()),
}


def _constant(text: str) -> float:
    """A constant expression such as ``6.283185307179586`` or ``2*pi``."""
    ast = parse_expression(text)
    if _uses_t(ast):
        raise ExprError(f"constant expected, {text!r} depends on t")
    return eval_scalar_jet(ast, 0.0).c0


def _uses_t(node) -> bool:
    if isinstance(node, Var):
        return True
    return any(_uses_t(child) for child in vars(node).values() if not isinstance(child, (str, float)))


def _parse_surface(words: list[str]) -> Surface:
    if not words:
        raise ValueError("surface needs a kind: " + ", ".join(_SURFACE_KEYS))
    kind, args = words[0], words[1:]
    if kind not in _SURFACE_KEYS:
        raise ValueError(f"unknown surface kind {kind!r}; expected one of {', '.join(_SURFACE_KEYS)}")
    required, optional = _SURFACE_KEYS[kind]
    kv = {}
    for arg in args:
        key, sep, value = arg.partition("=")
        if not sep or key not in required | optional:
            raise ValueError(f"unexpected surface parameter {arg!r} for {kind}")
        if key in kv:
            raise ValueError(f"duplicate surface parameter {key!r}")
        kv[key] = value
    missing = required - kv.keys()
    if missing:
        raise ValueError(f"{kind} requires {', '.join(sorted(missing))}")
    if kind == "sphere":
        center = tuple(_constant(c) for c in kv.get("center", "0,0,0").split(","))
        if len(center) != 3:
            raise ValueError("sphere center needs three comma-separated numbers")
        return curves.sphere(_constant(kv["radius"]), center)
    if kind == "cylinder":
        return curves.cylinder(_constant(kv["radius"]))
    if kind == "torus":
        return curves.torus(_constant(kv["major"]), _constant(kv["minor"]))
    if kind == "plane":
        return curves.plane(_constant(kv["z"]))
    return curves.NO_SURFACE


def load_scene(path) -> Scene:
    """Parse a scene file; every error is a :class:`SceneError` naming the line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as err:
        raise SceneError(path, None, f"cannot read scene: {err}") from None

    seen: dict[str, tuple[int, object]] = {}

    def once(key: str, lineno: int, value):
        if key in seen:
            raise SceneError(path, lineno, f"duplicate '{key}' directive (first on line {seen[key][0]})")
        seen[key] = (lineno, value)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            head, sep, rest = line.partition("=")
            key = head.strip()
            if sep and key in ("x", "y", "z"):
                src = rest.strip()
                try:
                    parse_expression(src)
                except ParseError as err:
                    col = raw.index(src) + err.offset + 1
                    raise SceneError(path, lineno, f"column {col}: {key}: {err}") from None
                once(key, lineno, src)
                continue
            if sep and key == "mass":
                mass = _constant(rest.strip())
                if not mass > 0:
                    raise ValueError("mass must be positive")
                once("mass", lineno, mass)
                continue
            words = line.split()
            directive = words[0]
            if directive == "surface":
                once("surface", lineno, _parse_surface(words[1:]))
            elif directive == "interval":
                if len(words) != 3:
                    raise ValueError("interval takes two values: interval <a> <b>")
                a, b = _constant(words[1]), _constant(words[2])
                if not a < b:
                    raise ValueError("interval requires a < b")
                once("interval", lineno, (a, b))
            elif directive == "trajectory":
                if len(words) not in (2, 3):
                    raise ValueError("trajectory takes a catalog name and optional p1,p2,...")
                name = words[1]
                if name not in curves.CATALOG:
                    raise ValueError(f"unknown catalog trajectory {name!r}")
                params = [_constant(p) for p in words[2].split(",")] if len(words) == 3 else []
                once("trajectory", lineno, (name, params))
            else:
                raise ValueError(f"unknown directive {directive!r}")
        except SceneError:
            raise
        except (ValueError, ExprError) as err:
            raise SceneError(path, lineno, str(err)) from None

    for key in ("surface", "interval"):
        if key not in seen:
            raise SceneError(path, None, f"missing '{key}' directive")
    coords = [k for k in "xyz" if k in seen]
    if "trajectory" in seen and coords:
        raise SceneError(path, seen["trajectory"][0], "use either 'trajectory' or x/y/z lines, not both")
    if "trajectory" not in seen and len(coords) != 3:
        missing = [k for k in "xyz" if k not in seen]
        raise SceneError(path, None, f"missing '{missing[0]}' directive")

    a, b = seen["interval"][1]
    try:
        if "trajectory" in seen:
            name, params = seen["trajectory"][1]
            traj = make_catalog_trajectory(name, params, a, b)
        else:
            traj = make_expression_trajectory(*(seen[k][1] for k in "xyz"), a, b)
    except (ValueError, ExprError) as err:
        line = seen["trajectory"][0] if "trajectory" in seen else seen["interval"][0]
        raise SceneError(path, line, str(err)) from None
    mass = seen["mass"][1] if "mass" in seen else 1.0
    return Scene(seen["surface"][1], traj, mass)


# ---------------------------------------------------------------------------
# Output

def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render(rows: list[tuple], header: tuple | None, style: str) -> str:
    cells = [[fmt(v) for v in r] for r in rows]
    if header:
        cells.insert(0, list(header))
    if style == "table" and cells:
        widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
        return "".join("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in cells)
    return "".join(",".join(r) + "\n" for r in cells)


# ---------------------------------------------------------------------------
# Commands

def _options(args) -> tuple[NetOptions, MeasureOptions]:
    net = NetOptions(eps0=args.eps0, ratio=args.ratio, max_rungs=args.max_rungs, conv_tol=args.conv_tol)
    opts = MeasureOptions(rel_tol=args.rel_tol)
    return net, opts


def _times(scene: Scene, values) -> list[float]:
    traj = scene.trajectory
    if not values:
        raise UsageError("--at is required")
    out = []
    for v in values:
        try:
            t = _constant(v)
        except ExprError as err:
            raise UsageError(f"--at {v!r}: {err}") from None
        if not traj.a <= t <= traj.b:
            raise UsageError(f"--at {v!r} outside [{traj.a!r}, {traj.b!r}]")
        out.append(t)
    return out


def _speed_row(est, t) -> tuple:
    return (t, est.value, est.converged and est.measures_converged, est.oracle_speed,
            est.inf_over_rungs, len(est.rungs))


def cmd_validate(scene: Scene, args):
    traj = scene.trajectory
    rows = []
    if scene.surface.kind != "none":
        rep = validate_on_surface(traj, scene.surface, args.samples or 1000, args.tol)
        rows.append(("on_surface", rep.passed, rep.max_residual, rep.worst_t))
    step = 1e-4
    if traj.b - traj.a > 4 * step:
        rep = validate_smoothness(traj, max(3, args.samples or 200), step, 1e-6)
        rows.append(("smoothness", rep.passed, rep.max_residual, rep.worst_t))
    ok = all(r[1] for r in rows)
    return rows, ("check", "passed", "max_residual", "worst_t"), EXIT_OK if ok else EXIT_INVALID


def cmd_arclength(scene: Scene, args):
    _, opts = _options(args)
    traj = scene.trajectory
    q = args.quantity
    rows, ok = [], True
    if q in ("traversal", "both", "all"):
        est = partition_arc_length(traj, None, opts)
        rows.append(("traversal_length", est.value))
        ok &= est.converged
    if q in ("image", "both", "all"):
        im = image_measure(traj, None, opts)
        rows.append(("image_measure", float(im)))
        ok &= im.converged
    if q in ("quadrature", "all"):
        try:
            rows.append(("quadrature_length", quadrature_arc_length(traj, None, opts)))
        except QuadratureError as err:
            rows.append(("quadrature_length", err.best))
            ok = False
    return rows, None, EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_avgspeed(scene: Scene, args):
    _, opts = _options(args)
    v = average_speed(scene.trajectory, opts, args.measure)
    return [("average_speed", float(v))], None, EXIT_OK if v.converged else EXIT_NONCONVERGED


def _ladder_rows(fn, scene: Scene, ts, args):
    net, opts = _options(args)

    def one(t):
        return _speed_row(fn(scene.trajectory, t, net, opts, args.measure), t)

    if args.jobs > 1 and len(ts) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(one, ts))  # map keeps input order
    else:
        rows = [one(t) for t in ts]
    ok = all(r[2] for r in rows)
    return rows, PROFILE_HEADER, EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_speed(scene: Scene, args):
    return _ladder_rows(instantaneous_speed, scene, _times(scene, args.at), args)


def cmd_accel(scene: Scene, args):
    if scene.trajectory.max_jet_order < 3:
        raise UsageError("acceleration needs third-order jets")
    return _ladder_rows(acceleration_magnitude, scene, _times(scene, args.at), args)


def cmd_force(scene: Scene, args):
    rows = []
    for t in _times(scene, args.at):
        try:
            f = newton_force(scene.trajectory, scene.mass, t)
        except ValueError as err:
            raise UsageError(str(err)) from None
        rows.append((t, *map(float, f)))
    return rows, ("t", "fx", "fy", "fz"), EXIT_OK


def cmd_profile(scene: Scene, args):
    n = args.samples or 50
    if n < 2:
        raise UsageError("--samples must be >= 2")
    traj = scene.trajectory
    ts = [float(t) for t in np.linspace(traj.a, traj.b, n)]
    return _ladder_rows(instantaneous_speed, scene, ts, args)


COMMANDS = {
    "validate": cmd_validate,
    "arclength": cmd_arclength,
    "avgspeed": cmd_avgspeed,
    "speed": cmd_speed,
    "accel": cmd_accel,
    "force": cmd_force,
    "profile": cmd_profile,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("scene", help="scene file")
    common.add_argument("--measure", choices=MEASURE_MODES, default="set",
                        help="numerator of neighbourhood speed: image set (default) or traversal length")
    common.add_argument("--eps0", type=float, default=None, help="initial ball radius")
    common.add_argument("--ratio", type=float, default=0.5, help="ladder shrink factor in (0, 1)")
    common.add_argument("--max-rungs", type=int, default=30)
    common.add_argument("--conv-tol", type=float, default=1e-4)
    common.add_argument("--rel-tol", type=float, default=1e-8)
    common.add_argument("--samples", type=int, default=None, help="profile / validation sample count")
    common.add_argument("--out", default=None, help="write output here instead of stdout")
    common.add_argument("--skip-validate", action="store_true", help="skip the on-surface check")
    common.add_argument("--tol", type=float, default=1e-9, help="on-surface tolerance")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for multi-point commands")
    common.add_argument("--format", choices=("csv", "table"), default="csv")
    common.add_argument("--at", action="append", default=[], metavar="T",
                        help="time value (repeatable; constant expressions like pi/3 allowed)")
    common.add_argument("--quantity", choices=("traversal", "image", "quadrature", "both", "all"),
                        default="both", help="arclength: which length(s) to report")

    parser = _Parser(prog="topokin", description="Measure-based kinematics of curves in R^3.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        scene = load_scene(args.scene)
        if args.command != "validate" and scene.surface.kind != "none" and not args.skip_validate:
            rep = validate_on_surface(scene.trajectory, scene.surface, 1000, args.tol)
            if not rep.passed:
                print(f"topokin: validation failed: {rep.messages[0]}", file=stderr)
                return EXIT_INVALID
        rows, header, code = COMMANDS[args.command](scene, args)
    except (UsageError, SceneError) as err:
        print(f"topokin: error: {err}", file=stderr)
        return EXIT_USAGE
    except (ValueError, ExprError) as err:
        print(f"topokin: error: {err}", file=stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError) as err:
        print(f"topokin: numerical failure: {err}", file=stderr)
        return EXIT_NONCONVERGED

    text = render(rows, header, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if code == EXIT_NONCONVERGED:
        print("topokin: warning: some results did not converge", file=stderr)
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
