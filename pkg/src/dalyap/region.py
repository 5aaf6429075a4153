"""Region estimates from the top homogeneous layer of an embryo, and rasters.

A point ``x`` belongs to the estimate of an embryo ``V`` (center ``c``) when

    sum_{|j| = p'} |B_j| |x - c|^j  <  1

for the effective layer ``p'``, the highest nonzero layer of degree ``<= p``.
Optionally the test uses the maximum of ``radicand_m ** (1/m)`` over the top
``L`` nonzero layers, a finite stand-in for the lim sup over all layers.
All magnitudes are handled as base-2 logarithms so that ``|B_j| ~ 1e2000``
times ``|x|^4096 ~ 1e-2000`` never over- or underflows.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from .errors import DegenerateBox, EmptyLayer, GridMismatch
from .extfloat import ExtArray, ExtFloat
from .series import TruncatedSeries

__all__ = [
    "RegionEstimate",
    "BasinRaster",
    "radicand",
    "interval_estimate_1d",
    "grid_scan",
    "union",
    "ray_boundary",
    "write_svg",
    "MEMBER",
    "NONMEMBER",
    "UNDECIDED",
]

NONMEMBER, MEMBER, UNDECIDED = 0, 1, 2

# coefficient floor for the effective layer, as log2(1e-300)
_FLOOR_LOG2 = math.log2(1e-300)
# stands in for log2(0) so that 0 * log2|0| stays 0 in the matrix product
_LOG2_ZERO = -1e12


def _effective_layers(V: TruncatedSeries, count: int) -> list[int]:
    out = []
    for m in sorted(V.nonzero_layers(), reverse=True):
        _, c = V.layer(m)
        if m >= 1 and c.max_abs().log2abs() > _FLOOR_LOG2:
            out.append(m)
            if len(out) == count:
                break
    return out


@dataclass(frozen=True, eq=False)
class RegionEstimate:
    """Membership rule derived from the top layer(s) of an embryo."""

    center: tuple[float, ...]
    degree: int
    layers: tuple[int, ...]            # effective layer first, then lower ones
    exps: tuple[np.ndarray, ...]       # per layer, (T, n) exponents
    log2coef: tuple[np.ndarray, ...]   # per layer, log2 |B_j|

    @classmethod
    def from_series(cls, V: TruncatedSeries, top_layers: int = 1) -> "RegionEstimate":
        if top_layers < 1:
            raise ValueError("top_layers must be at least 1")
        layers = _effective_layers(V, top_layers)
        if not layers:
            raise EmptyLayer("embryo has no nonzero layer above the coefficient floor")
        exps, logs = [], []
        for m in layers:
            e, c = V.layer(m)
            exps.append(e.copy())
            logs.append(c.log2abs())
        return cls(V.center, V.max_degree, tuple(layers), tuple(exps), tuple(logs))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def effective_layer(self) -> int:
        return self.layers[0]

    def log2_radicands(self, X) -> np.ndarray:
        """``log2`` of the radicand of every layer, shape ``(N, L)``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError("point has the wrong dimension")
        Z = np.abs(X - np.asarray(self.center))
        with np.errstate(divide="ignore"):
            LZ = np.where(Z > 0, np.log2(np.where(Z > 0, Z, 1.0)), _LOG2_ZERO)
        out = np.empty((len(X), len(self.layers)))
        for k, (E, L) in enumerate(zip(self.exps, self.log2coef)):
            step = max(1, 4_000_000 // max(len(E), 1))
            for s in range(0, len(X), step):
                T = L[None, :] + LZ[s:s + step] @ E.T.astype(np.float64)
                M = T.max(axis=1)
                with np.errstate(invalid="ignore"):
                    tot = M + np.log2(np.sum(np.exp2(T - M[:, None]), axis=1))
                out[s:s + step, k] = np.where(M < -1e11, -np.inf, tot)
        return out

    def criterion(self, X) -> np.ndarray:
        """``max_m log2(radicand_m) / m``; negative exactly for members."""
        lr = self.log2_radicands(X)
        return np.max(lr / np.asarray(self.layers, dtype=np.float64)[None, :], axis=1)

    def contains(self, X) -> np.ndarray:
        return self.criterion(X) < 0.0

    def radius_1d(self) -> float:
        if self.dim != 1:
            raise ValueError("radius_1d needs a one-dimensional estimate")
        return min(2.0 ** (-float(L[0]) / m) for m, L in zip(self.layers, self.log2coef))

    def describe(self) -> str:
        c = ",".join(repr(v) for v in self.center)
        s = f"center={c} degree={self.degree} effective_layer={self.effective_layer}"
        if len(self.layers) > 1:
            s += " layers=" + ",".join(str(m) for m in self.layers)
        if self.dim == 1:
            r = self.radius_1d()
            s += f" interval={self.center[0] - r!r},{self.center[0] + r!r}"
        return s


def radicand(V: TruncatedSeries, layer: int, x) -> ExtFloat:
    """``sum_{|j|=layer} |B_j| |x - c|^j`` in ExtFloat."""
    e, c = V.layer(layer)
    if len(e) == 0:
        raise EmptyLayer(f"layer {layer} is empty")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    z = [ExtFloat.from_float(abs(xi - ci)) for xi, ci in zip(x, V.center)]
    terms = abs(c)
    for i, zi in enumerate(z):
        pw = ExtArray.from_scalars(zi ** int(k) for k in e[:, i])
        terms = terms * pw
    return terms.sum()


def interval_estimate_1d(V: TruncatedSeries, top_layers: int = 1) -> tuple[float, float]:
    """``(c - r, c + r)`` with ``r = |B_p'|^(-1/p')``."""
    if V.dim != 1:
        raise ValueError("interval estimate needs a one-dimensional series")
    est = RegionEstimate.from_series(V, top_layers)
    r = est.radius_1d()
    return (V.center[0] - r, V.center[0] + r)


# ------------------------------------------------------------------ rasters

def _check_box(box, res) -> tuple[tuple[tuple[float, float], ...], tuple[int, ...]]:
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if isinstance(res, (int, np.integer)):
        res = (int(res),) * len(box)
    res = tuple(int(r) for r in res)
    if len(res) != len(box) or not box:
        raise DegenerateBox("box and resolution disagree in dimension")
    for lo, hi in box:
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DegenerateBox(f"degenerate box side ({lo}, {hi})")
    if any(r < 2 for r in res):
        raise ValueError("resolution must be at least 2 per axis")
    return box, res


@dataclass(frozen=True, eq=False)
class BasinRaster:
    """Per-cell labels on a box; ``labels[i1, i2, ...]`` is the cell whose
    center is ``lo_k + (i_k + 1/2) (hi_k - lo_k) / res_k`` on axis ``k``."""

    box: tuple[tuple[float, float], ...]
    res: tuple[int, ...]
    labels: np.ndarray

    def __post_init__(self):
        box, res = _check_box(self.box, self.res)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "res", res)
        lab = np.asarray(self.labels, dtype=np.int8)
        if lab.shape != res:
            raise ValueError(f"labels have shape {lab.shape}, expected {res}")
        object.__setattr__(self, "labels", lab)

    @classmethod
    def empty(cls, box, res) -> "BasinRaster":
        box, res = _check_box(box, res)
        return cls(box, res, np.zeros(res, dtype=np.int8))

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def cells(self) -> int:
        return int(np.prod(self.res))

    def axis_centers(self, k: int) -> np.ndarray:
        lo, hi = self.box[k]
        return lo + (np.arange(self.res[k]) + 0.5) * (hi - lo) / self.res[k]

    def cell_width(self, k: int = 0) -> float:
        lo, hi = self.box[k]
        return (hi - lo) / self.res[k]

    def points(self) -> np.ndarray:
        return cell_centers(self.box, self.res)

    def members(self) -> np.ndarray:
        return self.labels == MEMBER

    def same_grid(self, other: "BasinRaster") -> bool:
        return self.box == other.box and self.res == other.res

    def __eq__(self, other) -> bool:
        return (isinstance(other, BasinRaster) and self.same_grid(other)
                and bool(np.array_equal(self.labels, other.labels)))

    def member_extent_1d(self) -> tuple[float, float] | None:
        """Centers of the outermost member cells of a 1-D raster."""
        idx = np.flatnonzero(self.members())
        if self.dim != 1 or len(idx) == 0:
            return None
        c = self.axis_centers(0)
        return float(c[idx[0]]), float(c[idx[-1]])

    def slice(self, axis: int, index: int) -> "BasinRaster":
        if not 0 <= axis < self.dim or not 0 <= index < self.res[axis]:
            raise IndexError(f"invalid slice axis={axis} index={index}")
        if self.dim < 2:
            raise IndexError("cannot slice a one-dimensional raster")
        box = self.box[:axis] + self.box[axis + 1:]
        res = self.res[:axis] + self.res[axis + 1:]
        return BasinRaster(box, res, np.take(self.labels, index, axis=axis))

    # -------------------------------------------------------------- formats
    def to_csv(self, target: str | os.PathLike | TextIO) -> None:
        head = [repr(v) for lo_hi in self.box for v in lo_hi] + [str(r) for r in self.res]
        lines = [",".join(head)]
        it = np.ndindex(*self.res)
        flat = self.labels.reshape(-1)
        for k, ij in enumerate(it):
            lines.append(",".join(str(i) for i in ij) + f",{int(flat[k])}")
        _write_text(target, "\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, source: str | os.PathLike | TextIO) -> "BasinRaster":
        text = _read_text(source)
        rows = [ln for ln in text.splitlines() if ln.strip()]
        if not rows:
            raise ValueError("empty raster file")
        head = rows[0].split(",")
        if len(head) % 3:
            raise ValueError("raster header must hold lo,hi per axis then one resolution per axis")
        n = len(head) // 3
        vals = [float(v) for v in head[:2 * n]]
        box = tuple((vals[2 * k], vals[2 * k + 1]) for k in range(n))
        res = tuple(int(v) for v in head[2 * n:])
        labels = np.zeros(res, dtype=np.int8)
        data = np.array([[int(v) for v in ln.split(",")] for ln in rows[1:]], dtype=np.int64)
        if data.shape != (int(np.prod(res)), n + 1):
            raise ValueError("raster body does not match its header")
        labels[tuple(data[:, :n].T)] = data[:, n]
        return cls(box, res, labels)

    def to_pgm(self, target: str | os.PathLike | TextIO) -> None:
        """Plain PGM (P2) of a 2-D raster; rows run from high y to low y."""
        if self.dim != 2:
            raise ValueError("PGM export needs a two-dimensional raster")
        shade = {MEMBER: 64, NONMEMBER: 255, UNDECIDED: 160}
        img = np.vectorize(shade.get)(self.labels.T[::-1])
        lines = ["P2", f"{self.res[0]} {self.res[1]}", "255"]
        lines += [" ".join(str(int(v)) for v in row) for row in img]
        _write_text(target, "\n".join(lines) + "\n")


def _write_text(target, text: str) -> None:
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def cell_centers(box, res) -> np.ndarray:
    box, res = _check_box(box, res)
    axes = [lo + (np.arange(r) + 0.5) * (hi - lo) / r for (lo, hi), r in zip(box, res)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grid], axis=1)


def grid_scan(estimate: RegionEstimate, box, res) -> BasinRaster:
    """Label every cell center by the estimate's membership rule."""
    box, res = _check_box(box, res)
    if len(box) != estimate.dim:
        raise DegenerateBox("box dimension does not match the estimate")
    inside = estimate.contains(cell_centers(box, res))
    return BasinRaster(box, res, inside.reshape(res).astype(np.int8))


def union(rasters: Sequence[BasinRaster]) -> BasinRaster:
    """Cellwise OR of member labels."""
    rasters = list(rasters)
    if not rasters:
        raise ValueError("union of no rasters")
    base = rasters[0]
    acc = np.zeros(base.res, dtype=bool)
    for r in rasters:
        if not r.same_grid(base):
            raise GridMismatch("rasters live on different grids")
        acc |= r.members()
    return BasinRaster(base.box, base.res, acc.astype(np.int8))


def ray_boundary(contains: Callable[[np.ndarray], np.ndarray], center, direction,
                 t0: float = 1.0, steps: int = 20, t_max: float = 1e6) -> float:
    """Distance along a unit ray from ``center`` to the membership boundary.

    The bracket is grown by doubling from ``t0`` and then bisected ``steps``
    times; returns the inner end of the final bracket (a member point), or
    ``t_max`` if the ray never leaves the set.
    """
    c = np.asarray(center, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)

    def inside(t):
        return bool(contains((c + t * d)[None, :])[0])

    lo, hi = 0.0, t0
    while inside(hi):
        lo, hi = hi, 2.0 * hi
        if hi > t_max:
            return t_max
    while not inside(lo) and lo > 0:
        lo = 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------- SVG

_DARK, _LIGHT = "#555555", "#bbbbbb"


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _runs(mask_row: np.ndarray) -> list[tuple[int, int]]:
    out, i, n = [], 0, len(mask_row)
    while i < n:
        if mask_row[i]:
            j = i
            while j < n and mask_row[j]:
                j += 1
            out.append((i, j))
            i = j
        else:
            i += 1
    return out


def write_svg(rasters: Sequence[BasinRaster], target: str | os.PathLike | TextIO, *,
              overlay: Iterable[Sequence[tuple[float, ...]]] | None = None,
              points: Iterable[Sequence[float]] = (), slice_spec: tuple[int, int] | None = None,
              size: int = 512) -> None:
    """Render rasters: the first in dark grey, cells added by later ones in light grey.

    ``overlay`` is a list of polylines in data coordinates drawn thick black;
    ``points`` are marked as dots.  3-D rasters need ``slice_spec=(axis, index)``.
    """
    rasters = list(rasters)
    if not rasters:
        raise ValueError("nothing to render")
    base = rasters[0]
    for r in rasters[1:]:
        if not r.same_grid(base):
            raise GridMismatch("rasters live on different grids")
    drop_axis = None
    if base.dim == 3:
        if slice_spec is None:
            raise IndexError("a 3-D raster needs a slice axis=index")
        drop_axis = slice_spec[0]
        rasters = [r.slice(*slice_spec) for r in rasters]
        base = rasters[0]
    elif slice_spec is not None:
        raise IndexError("slices apply to 3-D rasters only")
    if base.dim > 3:
        raise ValueError("rendering supports 1-, 2- and 3-D rasters")

    first = rasters[0].members()
    later = np.zeros_like(first)
    for r in rasters[1:]:
        later |= r.members()
    later &= ~first

    one_d = base.dim == 1
    W = size
    H = 64 if one_d else size
    (x0, x1) = base.box[0]
    (y0, y1) = (0.0, 1.0) if one_d else base.box[1]

    def px(x):
        return (x - x0) / (x1 - x0) * W

    def py(y):
        return H - (y - y0) / (y1 - y0) * H

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>']
    nx = base.res[0]
    cw = W / nx
    for mask, color in ((first, _DARK), (later, _LIGHT)):
        if one_d:
            for a, b in _runs(mask):
                out.append(f'<rect x="{_fmt(a * cw)}" y="16" width="{_fmt((b - a) * cw)}" '
                           f'height="32" fill="{color}"/>')
            continue
        ny = base.res[1]
        ch = H / ny
        for j in range(ny):
            for a, b in _runs(mask[:, j]):
                out.append(f'<rect x="{_fmt(a * cw)}" y="{_fmt(H - (j + 1) * ch)}" '
                           f'width="{_fmt((b - a) * cw)}" height="{_fmt(ch)}" fill="{color}"/>')
    for line in overlay or ():
        pts = []
        for q in line:
            q = list(q)
            if drop_axis is not None and len(q) == 3:
                q = q[:drop_axis] + q[drop_axis + 1:]
            pts.append(f"{_fmt(px(q[0]))},{_fmt(py(q[1]) if not one_d else H / 2)}")
        out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="#000000" '
                   f'stroke-width="3"/>')
    for q in points:
        q = list(q)
        if drop_axis is not None and len(q) == 3:
            q = q[:drop_axis] + q[drop_axis + 1:]
        cy = H / 2 if one_d else py(q[1])
        out.append(f'<circle cx="{_fmt(px(q[0]))}" cy="{_fmt(cy)}" r="4" fill="#000000"/>')
    out.append("</svg>")
    _write_text(target, "\n".join(out) + "\n")
