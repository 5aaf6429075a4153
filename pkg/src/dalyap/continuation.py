"""Gradual extension of a region estimate by re-expanding the embryo at new centers.

A run is organised in rounds.  Round 0 is the origin-centred estimate.  Each
later round takes the estimates added in the previous round, samples points
just inside their boundaries, keeps those where the current embryo is still
small, and re-expands there.  Explicit center lists are consumed one center
per round, each re-expanded from the most recent embryo.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import EmptyLayer, SeriesOverflow
from .extfloat import ExtFloat
from .lyapunov import EmbryoMethod, PerDegreeSolve, check_hypotheses, orbit_sum, solve_embryo
from .polymap import PolyMap
from .region import BasinRaster, RegionEstimate, grid_scan, ray_boundary, union
from .series import TruncatedSeries, eval_series, eval_series_many, taylor_shift, write_embryo

__all__ = [
    "ShiftEmbryo",
    "OrbitSum",
    "ContinuationParams",
    "Step",
    "ContinuationReport",
    "boundary_directions",
    "select_centers",
    "extend_step",
    "run_auto",
    "MAX_STEPS",
    "NO_ADMISSIBLE_CENTER",
    "CENTER_LIST_EXHAUSTED",
]

MAX_STEPS = "MaxSteps"
NO_ADMISSIBLE_CENTER = "NoAdmissibleCenter"
CENTER_LIST_EXHAUSTED = "UserCenterListExhausted"


@dataclass(frozen=True)
class ShiftEmbryo:
    """Taylor-shift the polynomial embryo to the new center."""


@dataclass(frozen=True)
class OrbitSum:
    """Expand the orbit sum directly about the new center (``K=None``: adaptive)."""
    K: int | None = None


ReexpandMethod = Union[ShiftEmbryo, OrbitSum]


@dataclass(frozen=True)
class ContinuationParams:
    margin: float = 1e-3
    v_max: float | None = None            # None: 10 x median |V| over the inner half
    candidates_per_step: int | None = None  # None: 2 in 1-D, 8 otherwise
    max_steps: int = 3
    reexpand: ReexpandMethod = ShiftEmbryo()
    top_layers: int = 1

    def __post_init__(self):
        if not 0.0 < self.margin < 1.0:
            raise ValueError("margin must lie in (0, 1)")
        if self.v_max is not None and not self.v_max > 0:
            raise ValueError("v_max must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.candidates_per_step is not None and self.candidates_per_step < 1:
            raise ValueError("candidates_per_step must be positive")

    def candidates_for(self, dim: int) -> int:
        if self.candidates_per_step is not None:
            return self.candidates_per_step
        return 2 if dim == 1 else 8


@dataclass
class Step:
    round: int
    center: tuple[float, ...]
    embryo: TruncatedSeries
    estimate: RegionEstimate
    v_at_center: float                 # |V| of the parent embryo at this center
    embryo_path: str | None = None


def _ext_to_float(v: ExtFloat) -> float:
    return abs(float(v)) if v.log2abs() < 1020 else math.inf


@dataclass
class ContinuationReport:
    steps: list[Step] = field(default_factory=list)
    stop_reason: str = MAX_STEPS

    @property
    def dim(self) -> int:
        return self.steps[0].embryo.dim

    def estimates(self, up_to_round: int | None = None) -> list[RegionEstimate]:
        return [s.estimate for s in self.steps if up_to_round is None or s.round <= up_to_round]

    def contains(self, X, up_to_round: int | None = None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros(len(X), dtype=bool)
        for est in self.estimates(up_to_round):
            out |= est.contains(X)
        return out

    def rounds(self) -> int:
        return max(s.round for s in self.steps)

    def rasters(self, box, res) -> list[BasinRaster]:
        """One raster per round, each the union of all estimates so far."""
        per = [grid_scan(s.estimate, box, res) for s in self.steps]
        out = []
        for r in range(self.rounds() + 1):
            out.append(union([ras for ras, s in zip(per, self.steps) if s.round <= r]))
        return out

    def intervals(self) -> list[tuple[float, float]]:
        """1-D: per-step intervals, in step order."""
        out = []
        for s in self.steps:
            r = s.estimate.radius_1d()
            out.append((s.center[0] - r, s.center[0] + r))
        return out

    def union_intervals(self) -> list[tuple[float, float]]:
        """1-D: the union of all step intervals as disjoint sorted intervals."""
        merged: list[list[float]] = []
        for lo, hi in sorted(self.intervals()):
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return [(a, b) for a, b in merged]

    def to_text(self) -> str:
        lines = ["REPORT v1", f"dim {self.dim}", f"steps {len(self.steps)}",
                 f"stop {self.stop_reason}"]
        for i, s in enumerate(self.steps):
            lines.append(f"step {i}")
            lines.append(f"round {s.round}")
            lines.append("center " + " ".join(repr(c) for c in s.center))
            lines.append(f"v_center {s.v_at_center!r}")
            lines.append(f"degree {s.embryo.max_degree}")
            lines.append("layers " + " ".join(str(m) for m in s.estimate.layers))
            if self.dim == 1:
                lo, hi = self.intervals()[i]
                lines.append(f"interval {lo!r} {hi!r}")
            lines.append(f"embryo {s.embryo_path or '-'}")
            lines.append("end")
        if self.dim == 1:
            lines.append("union " + " ".join(f"{lo!r} {hi!r}" for lo, hi in self.union_intervals()))
        return "\n".join(lines) + "\n"

    def write(self, path: str | os.PathLike, embryo_dir: str | os.PathLike | None = None) -> None:
        """Write the report; with ``embryo_dir`` each step's embryo is archived too."""
        if embryo_dir is not None:
            os.makedirs(embryo_dir, exist_ok=True)
            for i, s in enumerate(self.steps):
                p = os.path.join(os.fspath(embryo_dir), f"step{i:03d}.embryo")
                write_embryo(s.embryo, p)
                s.embryo_path = p
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())


def read_report(path: str | os.PathLike) -> list[dict]:
    """Parse a ``REPORT v1`` file into one dict per step (plus header keys)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != "REPORT v1":
        raise ValueError("not a REPORT v1 file")
    steps, cur = [], None
    for ln in lines[1:]:
        key, _, val = ln.partition(" ")
        if key == "step":
            cur = {}
        elif key == "end":
            steps.append(cur)
            cur = None
        elif cur is not None:
            cur[key] = val
    return steps


# ----------------------------------------------------------------- sampling

def boundary_directions(dim: int) -> np.ndarray:
    """Fixed ray directions: both signs in 1-D, 64 angles in 2-D, 128 Fibonacci-sphere
    points in 3-D."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        t = 2.0 * math.pi * np.arange(64) / 64
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if dim == 3:
        k = np.arange(128) + 0.5
        z = 1.0 - 2.0 * k / 128
        rho = np.sqrt(1.0 - z * z)
        phi = math.pi * (3.0 - math.sqrt(5.0)) * k
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    raise ValueError("boundary sampling supports dimensions 1 to 3")


def _boundary_distances(est: RegionEstimate, dirs: np.ndarray) -> np.ndarray:
    if est.dim == 1:
        return np.full(len(dirs), est.radius_1d())
    c = np.asarray(est.center)
    # the radicand along a ray grows monotonically, so start from a layer-wise guess
    t0 = max(1e-12, min(2.0 ** (-float(np.max(L)) / m) for m, L in zip(est.layers, est.log2coef)))
    return np.array([ray_boundary(est.contains, c, d, t0=t0, steps=20) for d in dirs])


def _inner_median(V: TruncatedSeries, est: RegionEstimate, dirs, dist) -> float:
    c = np.asarray(est.center)
    fr = np.arange(1, 9) / 16.0
    pts = (c[None, None, :] + dirs[:, None, :] * (dist[:, None, None] * fr[None, :, None]))
    vals = eval_series_many(V, pts.reshape(-1, est.dim))
    mags = np.array([_ext_to_float(vals[i]) for i in range(len(vals))])
    return float(np.median(mags))


def select_centers(current: Sequence[RegionEstimate], V_current: TruncatedSeries,
                   params: ContinuationParams,
                   estimate: RegionEstimate | None = None) -> list[tuple[np.ndarray, float]]:
    """Candidate centers near the boundary of ``estimate`` (default: the estimate of
    ``V_current``), as ``(point, |V(point)|)`` pairs ranked by ascending ``|V|``.

    A boundary sample ``b`` on the ray from the center ``c`` yields the candidate
    ``c + (1 - margin)(b - c)``; it is dropped when ``|V| > v_max`` or when the
    point just beyond ``b`` already lies in the union ``current`` (deep inside).
    """
    est = estimate if estimate is not None else RegionEstimate.from_series(V_current, params.top_layers)
    dirs = boundary_directions(est.dim)
    dist = _boundary_distances(est, dirs)
    c = np.asarray(est.center)
    v_max = params.v_max
    if v_max is None:
        v_max = 10.0 * _inner_median(V_current, est, dirs, dist)
    cand = c[None, :] + dirs * ((1.0 - params.margin) * dist)[:, None]
    beyond = c[None, :] + dirs * ((1.0 + params.margin) * dist)[:, None]
    deep = np.zeros(len(dirs), dtype=bool)
    for e in current:
        deep |= e.contains(beyond)
    vals = eval_series_many(V_current, cand)
    out = []
    for i in range(len(dirs)):
        if deep[i]:
            continue
        v = _ext_to_float(vals[i])
        if v <= v_max:
            out.append((i, v))
    out.sort(key=lambda t: t[1])
    k = params.candidates_for(est.dim)
    return [(cand[i], v) for i, v in out[:k]]


# -------------------------------------------------------------- extension

def extend_step(V: TruncatedSeries, f: PolyMap | None, center, p: int | None = None,
                method: ReexpandMethod = ShiftEmbryo(), *, top_layers: int = 1,
                current: RegionEstimate | None = None) -> tuple[TruncatedSeries, RegionEstimate]:
    """Re-expand at ``center`` and return the new embryo and its estimate."""
    center = np.asarray(center, dtype=np.float64).reshape(-1)
    p = V.max_degree if p is None else p
    if p < 2:
        raise ValueError("degree must be at least 2")
    est = current if current is not None else RegionEstimate.from_series(V, top_layers)
    if not est.contains(center[None, :])[0]:
        warnings.warn(f"center {center.tolist()} lies outside the current estimate", stacklevel=2)
    if isinstance(method, ShiftEmbryo):
        W = taylor_shift(V.truncate(min(p, V.max_degree)), center)
    elif isinstance(method, OrbitSum):
        if f is None:
            raise ValueError("orbit-sum re-expansion needs the map")
        W = orbit_sum(f, p, K=method.K, center=center)
    else:
        raise TypeError(f"unknown re-expansion method {method!r}")
    return W, RegionEstimate.from_series(W, top_layers)


def run_auto(f: PolyMap | None, p: int, params: ContinuationParams = ContinuationParams(),
             centers_override: Sequence | None = None, *, embryo: TruncatedSeries | None = None,
             method: EmbryoMethod | None = None) -> ContinuationReport:
    """Round 0 solves (or takes) the origin embryo; later rounds extend it.

    With ``centers_override`` each round consumes one center, re-expanded from
    the most recent embryo; otherwise centers come from :func:`select_centers`.
    """
    if embryo is None:
        if f is None:
            raise ValueError("need a map or an embryo")
        check_hypotheses(f)
        embryo = solve_embryo(f, p, method or PerDegreeSolve())
    est0 = RegionEstimate.from_series(embryo, params.top_layers)
    report = ContinuationReport([Step(0, embryo.center, embryo, est0, 0.0)])
    pending = [list(map(float, np.atleast_1d(c))) for c in centers_override] \
        if centers_override is not None else None
    frontier = [report.steps[0]]
    for rnd in range(1, params.max_steps + 1):
        if pending is not None:
            if not pending:
                report.stop_reason = CENTER_LIST_EXHAUSTED
                return report
            parent = report.steps[-1]
            c = np.asarray(pending.pop(0))
            jobs = [(parent, c, _ext_to_float(eval_series(parent.embryo, c)))]
        else:
            found = []
            union_est = report.estimates()
            for k, parent in enumerate(frontier):
                for c, v in select_centers(union_est, parent.embryo, params, parent.estimate):
                    found.append((v, k, len(found), parent, c))
            found.sort(key=lambda t: (t[0], t[1], t[2]))
            jobs = [(parent, c, v) for v, _, _, parent, c in
                    found[:params.candidates_for(embryo.dim)]]
            if not jobs:
                report.stop_reason = NO_ADMISSIBLE_CENTER
                return report
        frontier = []
        for parent, c, v in jobs:
            try:
                W, est = extend_step(parent.embryo, f, c, p, params.reexpand,
                                     top_layers=params.top_layers, current=parent.estimate)
            except (SeriesOverflow, EmptyLayer):
                if pending is not None:
                    raise
                continue  # the expansion blew up here: treat the candidate as inadmissible
            st = Step(rnd, tuple(float(x) for x in c), W, est, v)
            report.steps.append(st)
            frontier.append(st)
        if not frontier:
            report.stop_reason = NO_ADMISSIBLE_CENTER
            return report
    if pending is not None and not pending:
        report.stop_reason = CENTER_LIST_EXHAUSTED
    else:
        report.stop_reason = MAX_STEPS
    return report
