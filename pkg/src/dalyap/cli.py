"""Command-line workflows: analyze, extend, validate, render.

Exit codes: 0 success, 1 input error, 2 hypothesis failure, 3 numerical failure.
Every subcommand also accepts ``--config FILE``, a ``key = value`` file whose
keys are the long option names (``degree = 64``); explicit flags win.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from typing import Sequence

import numpy as np

from .catalog import UNSTABLE_POINTS
from .continuation import (ContinuationParams, OrbitSum, ShiftEmbryo, _boundary_distances,
                           boundary_directions, run_auto)
from .errors import (DalyapError, DegenerateBox, EmptyLayer, FixedPointMismatch, GridMismatch,
                     MapSyntaxError, NoConvergence, NotAContraction, NotCenteredAtOrigin,
                     SeriesOverflow, SingularDegreeOperator)
from .lyapunov import DirectSum, PerDegreeSolve, Picard, check_hypotheses, residual, solve_embryo
from .oracle import OrbitParams, analytic_boundary, analytic_da, basin_grid, compare
from .polymap import parse_map, shift_to_origin
from .region import BasinRaster, RegionEstimate, grid_scan, write_svg
from .series import read_embryo, write_embryo

EXIT_OK, EXIT_INPUT, EXIT_HYPOTHESIS, EXIT_NUMERICAL = 0, 1, 2, 3


class InputError(Exception):
    pass


# ----------------------------------------------------------------- helpers

def _floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise InputError(f"cannot read {what} from {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise InputError(f"cannot read {what} from {text!r}")
    return vals


def _box(text: str, dim: int) -> list[tuple[float, float]]:
    vals = _floats(text, "box")
    if len(vals) != 2 * dim:
        raise InputError(f"box needs {2 * dim} numbers lo1,hi1,... for dimension {dim}")
    return [(vals[2 * k], vals[2 * k + 1]) for k in range(dim)]


def _centers(text: str) -> list[list[float]]:
    return [_floats(part, "center") for part in text.split(";") if part.strip()]


def _read_map(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_map(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read map file {path!r}: {exc.strerror}") from None


def _method(name: str, tol: float, iters: int, terms: int | None):
    if name == "per-degree":
        return PerDegreeSolve()
    if name == "picard":
        return Picard(tol, iters)
    if name == "direct-sum":
        return DirectSum(terms)
    raise InputError(f"unknown method {name!r}")


def _default_box(estimates: Sequence[RegionEstimate], pad: float = 0.25) -> list[tuple[float, float]]:
    dim = estimates[0].dim
    lo = np.full(dim, np.inf)
    hi = np.full(dim, -np.inf)
    for est in estimates:
        c = np.asarray(est.center)
        if dim == 1:
            d = np.array([est.radius_1d()] * 2)
            dirs = np.array([[1.0], [-1.0]])
        else:
            dirs = np.vstack([np.eye(dim), -np.eye(dim), boundary_directions(dim)])
            d = _boundary_distances(est, dirs)
        # the top layer can vanish along a direction (Examples 5 and 6 on the axes);
        # such rays never leave the estimate, so the box is built from the others
        finite = d < 1e6
        if not finite.any():
            raise InputError("the estimate is unbounded along every sampled direction; pass --box")
        if not finite.all():
            _stamp(f"estimate unbounded along {int((~finite).sum())} sampled directions; "
                   "default box ignores them, pass --box to choose one")
        # near-degenerate directions give very long rays; the box is only a
        # viewing window, so it is clipped to a few median ray lengths
        d = np.minimum(d[finite], 4.0 * np.median(d[finite]))
        pts = c[None, :] + dirs[finite] * d[:, None]
        lo = np.minimum(lo, pts.min(axis=0))
        hi = np.maximum(hi, pts.max(axis=0))
    w = np.maximum(hi - lo, 1e-12)
    return [(float(a - pad * s), float(b + pad * s)) for a, b, s in zip(lo, hi, w)]


def _default_res(dim: int) -> int:
    return 64 if dim >= 3 else 256


def _stamp(msg: str) -> None:
    # timestamps go to the console only, never into artifacts
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", file=sys.stderr)


# ---------------------------------------------------------------- commands

def cmd_analyze(args) -> int:
    f = _read_map(args.map)
    if args.fixed_point:
        f = shift_to_origin(f, _floats(args.fixed_point, "fixed point"))
    norm = check_hypotheses(f)
    if args.degree < 2:
        raise InputError("degree must be at least 2")
    method = _method(args.method, args.tol, args.max_iter, args.terms)
    _stamp(f"solving degree {args.degree} with {args.method}")
    V, info = solve_embryo(f, args.degree, method, return_info=True)
    est = RegionEstimate.from_series(V, args.top_layers)
    lines = [f"map: {args.map}", f"dimension: {f.dim}", f"degree: {args.degree}",
             f"method: {args.method}", f"norm: {norm!r}", f"effective_layer: {est.effective_layer}",
             f"amplification: {info.amplification:.6g}"]
    if f.dim == 1:
        r = est.radius_1d()
        lines.append(f"interval: {V.center[0] - r!r} {V.center[0] + r!r}")
    if args.residual:
        lines.append(f"residual: {residual(V, f)!r}")
    if args.out_embryo:
        write_embryo(V, args.out_embryo)
        lines.append(f"embryo: {args.out_embryo}")
    if args.out_raster:
        box = _box(args.box, f.dim) if args.box else _default_box([est])
        res = args.res or _default_res(f.dim)
        R = grid_scan(est, box, res)
        R.to_csv(args.out_raster)
        lines.append(f"raster: {args.out_raster} ({int(R.members().sum())} of {R.cells} cells)")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_extend(args) -> int:
    try:
        V = read_embryo(args.embryo)
    except OSError as exc:
        raise InputError(f"cannot read embryo archive {args.embryo!r}: {exc.strerror}") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    f = _read_map(args.map) if args.map else None
    if f is not None and args.fixed_point:
        f = shift_to_origin(f, _floats(args.fixed_point, "fixed point"))
    if args.reexpand == "orbit-sum":
        if f is None:
            raise InputError("--reexpand orbit-sum needs --map")
        reexpand = OrbitSum(args.orbit_terms)
    else:
        reexpand = ShiftEmbryo()
    if bool(args.auto) == bool(args.centers):
        raise InputError("give exactly one of --centers and --auto")
    centers = _centers(args.centers) if args.centers else None
    if centers is not None and any(len(c) != V.dim for c in centers):
        raise InputError(f"every center needs {V.dim} coordinates")
    steps = args.steps if args.steps is not None else (len(centers) if centers else 3)
    params = ContinuationParams(margin=args.margin, v_max=args.vmax,
                                candidates_per_step=args.candidates, max_steps=steps,
                                reexpand=reexpand, top_layers=args.top_layers)
    p = args.degree or V.max_degree
    _stamp(f"extending a degree-{V.max_degree} embryo")
    report = run_auto(f, p, params, centers, embryo=V)
    report.write(args.out_report, embryo_dir=args.embryo_dir)
    box = _box(args.box, V.dim) if args.box else _default_box(report.estimates())
    res = args.res or _default_res(V.dim)
    rasters = report.rasters(box, res)
    stem, ext = os.path.splitext(args.out_raster)
    for r, ras in enumerate(rasters):
        ras.to_csv(f"{stem}_round{r}{ext or '.csv'}")
    rasters[-1].to_csv(args.out_raster)
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        est = BasinRaster.from_csv(args.raster)
    except OSError as exc:
        raise InputError(f"cannot read raster {args.raster!r}: {exc.strerror}") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    lines = []
    if args.truth:
        truth = BasinRaster.from_csv(args.truth)
    else:
        if not args.map:
            raise InputError("validate needs --map (or --truth)")
        f = _read_map(args.map)
        params = OrbitParams(args.trap, args.escape, args.iters)
        fp = _floats(args.fixed_point, "fixed point") if args.fixed_point else None
        _stamp(f"classifying {est.cells} cells")
        truth = basin_grid(f, est.box, est.res, params, fixed_point=fp)
        if args.out_truth:
            truth.to_csv(args.out_truth)
    cmp = compare(est, truth)
    lines.append(f"false_inclusion_rate: {cmp.false_inclusion_rate!r}")
    lines.append(f"coverage: {cmp.coverage!r}")
    lines.append(f"undecided_cells: {cmp.excluded_undecided}")
    if args.example_id is not None:
        pred = analytic_da(args.example_id)
        inside = pred(truth.points()).reshape(truth.res)
        decided = truth.labels != 2
        agree = ((truth.labels == 1) == inside) & decided
        n_dec = int(decided.sum())
        lines.append(f"oracle_vs_published_agreement: {float(agree.sum()) / n_dec if n_dec else 0.0!r}")
        ana = BasinRaster(truth.box, truth.res, inside.astype(np.int8))
        c2 = compare(est, ana)
        lines.append(f"false_inclusion_rate_vs_published: {c2.false_inclusion_rate!r}")
        lines.append(f"coverage_vs_published: {c2.coverage!r}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _slice(text: str) -> tuple[int, int]:
    axis, sep, index = text.partition("=")
    if not sep:
        raise InputError("slice must look like axis=index")
    names = {"x": 0, "y": 1, "z": 2}
    try:
        a = names[axis] if axis in names else int(axis)
        return a, int(index)
    except ValueError:
        raise InputError(f"invalid slice {text!r}") from None


def cmd_render(args) -> int:
    rasters = []
    for path in [p for p in args.rasters.split(",") if p]:
        try:
            rasters.append(BasinRaster.from_csv(path))
        except OSError as exc:
            raise InputError(f"cannot read raster {path!r}: {exc.strerror}") from None
        except ValueError as exc:
            raise InputError(str(exc)) from None
    if not rasters:
        raise InputError("no rasters given")
    overlay, points = None, []
    if args.overlay and args.overlay != "none":
        try:
            ex = int(args.overlay)
        except ValueError:
            raise InputError("overlay must be an example id or 'none'") from None
        try:
            overlay = analytic_boundary(ex)
        except ValueError:
            overlay = None
        points += UNSTABLE_POINTS.get(ex, [])
    if args.points:
        points += [tuple(c) for c in _centers(args.points)]
    sl = _slice(args.slice) if args.slice else None
    try:
        write_svg(rasters, args.svg, overlay=overlay, points=points, slice_spec=sl)
    except IndexError as exc:
        raise InputError(str(exc)) from None
    if args.pgm:
        base = rasters[-1] if sl is None else rasters[-1].slice(*sl)
        base.to_pgm(args.pgm)
    print(f"svg: {args.svg}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dalyap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file with defaults for these options")

    a = sub.add_parser("analyze", help="embryo, region estimate and summary at the origin")
    common(a)
    a.add_argument("--map", required=True)
    a.add_argument("--degree", type=int, required=True)
    a.add_argument("--method", default="per-degree", choices=["per-degree", "picard", "direct-sum"])
    a.add_argument("--tol", type=float, default=1e-12, help="Picard tolerance")
    a.add_argument("--max-iter", type=int, default=10000, help="Picard iteration cap")
    a.add_argument("--terms", type=int, default=None, help="direct-sum orbit terms")
    a.add_argument("--fixed-point", default=None, help='"c1,c2,..." to move to the origin')
    a.add_argument("--box", default=None, help='"lo1,hi1,lo2,hi2,..."')
    a.add_argument("--res", type=int, default=None)
    a.add_argument("--top-layers", type=int, default=1)
    a.add_argument("--out-embryo", default="embryo.txt")
    a.add_argument("--out-raster", default="raster.csv")
    a.add_argument("--summary", default=None)
    a.add_argument("--residual", action="store_true", help="also report the equation residual")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("extend", help="continue an estimate from an embryo archive")
    common(e)
    e.add_argument("--embryo", required=True)
    e.add_argument("--map", default=None, help="needed for orbit-sum re-expansion")
    e.add_argument("--fixed-point", default=None)
    e.add_argument("--centers", default=None, help='"c;c;..." with c = "x1,x2,..."')
    e.add_argument("--auto", action="store_true")
    e.add_argument("--steps", type=int, default=None)
    e.add_argument("--vmax", type=float, default=None)
    e.add_argument("--margin", type=float, default=1e-3)
    e.add_argument("--candidates", type=int, default=None)
    e.add_argument("--reexpand", default="shift", choices=["shift", "orbit-sum"])
    e.add_argument("--orbit-terms", type=int, default=None)
    e.add_argument("--degree", type=int, default=None)
    e.add_argument("--top-layers", type=int, default=1)
    e.add_argument("--box", default=None)
    e.add_argument("--res", type=int, default=None)
    e.add_argument("--out-report", default="report.txt")
    e.add_argument("--out-raster", default="union.csv")
    e.add_argument("--embryo-dir", default="steps")
    e.set_defaults(func=cmd_extend)

    v = sub.add_parser("validate", help="compare a raster with the orbit oracle")
    common(v)
    v.add_argument("--map", default=None)
    v.add_argument("--raster", required=True)
    v.add_argument("--truth", default=None, help="compare against this raster instead")
    v.add_argument("--example-id", type=int, default=None)
    v.add_argument("--fixed-point", default=None)
    v.add_argument("--trap", type=float, default=1e-6)
    v.add_argument("--escape", type=float, default=1e6)
    v.add_argument("--iters", type=int, default=10000)
    v.add_argument("--out-truth", default=None)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("render", help="draw rasters as SVG (and PGM)")
    common(r)
    r.add_argument("--rasters", required=True, help="F1,F2,... first drawn dark, the rest light")
    r.add_argument("--overlay", default="none", help="example id or none")
    r.add_argument("--points", default=None, help='extra dots "x,y;x,y"')
    r.add_argument("--slice", default=None, help="axis=index for 3-D rasters")
    r.add_argument("--svg", required=True)
    r.add_argument("--pgm", default=None)
    r.set_defaults(func=cmd_render)
    return ap


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, sep, val = line.partition("=")
                if not sep:
                    raise InputError(f"{path}:{n}: expected key = value")
                out[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise InputError(f"cannot read config {path!r}: {exc.strerror}") from None
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    subs = parser._subparsers._group_actions[0].choices  # noqa: SLF001
    if known.config and command in subs:
        sub = subs[command]
        acts = {a.dest: a for a in sub._actions}  # noqa: SLF001
        defaults = {}
        for key, val in read_config(known.config).items():
            if key not in acts or key in ("config", "help"):
                raise InputError(f"unknown config key {key!r}")
            act = acts[key]
            if isinstance(act, argparse._StoreTrueAction):  # noqa: SLF001
                defaults[key] = val.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = val
            act.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# options whose values may start with a minus sign ("--box -1,1")
_SIGNED = {"--box", "--centers", "--fixed-point"}


def _join_signed(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _SIGNED and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = _join_signed(list(sys.argv[1:] if argv is None else argv))
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_INPUT if exc.code else EXIT_OK
    except NotAContraction as exc:
        print(f"error: hypothesis failed: ||d0 f|| = {exc.norm!r} is not below 1", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (NotCenteredAtOrigin, FixedPointMismatch) as exc:
        print(f"error: hypothesis failed: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (SingularDegreeOperator, NoConvergence, SeriesOverflow, EmptyLayer) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MapSyntaxError as exc:
        print(f"error: map syntax: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, GridMismatch, DegenerateBox, DalyapError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
