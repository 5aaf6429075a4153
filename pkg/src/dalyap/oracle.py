"""Ground truth by direct orbit simulation, published reference basins, metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GridMismatch
from .polymap import PolyMap, eval_map, jacobian_at_zero, shift_to_origin, spectral_norm
from .region import MEMBER, NONMEMBER, UNDECIDED, BasinRaster, _check_box, cell_centers

__all__ = [
    "OrbitParams",
    "Verdict",
    "CONVERGED",
    "ESCAPED",
    "UNDECIDED",
    "validate_trap",
    "classify",
    "classify_many",
    "basin_grid",
    "analytic_da",
    "analytic_boundary",
    "Comparison",
    "compare",
]

# oracle labels share the raster codes: 1 converged, 0 escaped, 2 undecided
CONVERGED, ESCAPED = MEMBER, NONMEMBER
_NAMES = {CONVERGED: "Converged", ESCAPED: "Escaped", UNDECIDED: "Undecided"}


@dataclass(frozen=True)
class OrbitParams:
    trap_radius: float = 1e-6
    escape_radius: float = 1e6
    max_iters: int = 10000

    def __post_init__(self):
        if not (0 < self.trap_radius < self.escape_radius) or self.max_iters < 1:
            raise ValueError("need 0 < trap_radius < escape_radius and max_iters >= 1")


@dataclass(frozen=True)
class Verdict:
    label: int
    iterations: int
    trap_verified: bool = True

    @property
    def name(self) -> str:
        return _NAMES[self.label]

    def __str__(self) -> str:
        return f"{self.name}({self.iterations})"


def _nonlinear_lipschitz(f: PolyMap, delta: float) -> float:
    """Bound on the Lipschitz constant of ``f - d0 f`` over the ball of radius ``delta``.

    Entry ``(i, k)`` of the derivative of the nonlinear part is bounded by
    ``sum |c| a_k delta^(|a|-1)`` over the terms of degree >= 2; the Frobenius
    norm of that bound matrix bounds the operator norm.
    """
    n = f.dim
    M = np.zeros((n, n))
    for i, comp in enumerate(f.components):
        for a, c in comp:
            d = sum(a)
            if d >= 2:
                for k in range(n):
                    if a[k]:
                        M[i, k] += abs(c) * a[k] * delta ** (d - 1)
    return float(np.sqrt(np.sum(M * M)))


def validate_trap(f: PolyMap, delta: float, halvings: int = 20) -> tuple[float, bool]:
    """Shrink ``delta`` until ``||d0 f|| + L(delta) < 1`` certifies the ball as a trap.

    Returns ``(delta, verified)``; after ``halvings`` failed halvings the
    original radius is returned unverified.
    """
    a = spectral_norm(jacobian_at_zero(f))
    d = delta
    for _ in range(halvings + 1):
        if a + _nonlinear_lipschitz(f, d) < 1.0:
            return d, True
        d *= 0.5
    return delta, False


def _iterate(f: PolyMap, X: np.ndarray, params: OrbitParams, trap: float,
             fixed_point: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    N = len(X)
    labels = np.full(N, UNDECIDED, dtype=np.int8)
    iters = np.full(N, params.max_iters, dtype=np.int64)
    active = np.arange(N)
    Y = X.copy()
    for k in range(params.max_iters + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            r = np.linalg.norm(Y - fixed_point, axis=1)
        bad = ~np.all(np.isfinite(Y), axis=1) | (r > params.escape_radius)
        conv = ~bad & (r < trap)
        for mask, lab in ((conv, CONVERGED), (bad, ESCAPED)):
            hit = active[mask]
            labels[hit] = lab
            iters[hit] = k
        keep = ~(conv | bad)
        active, Y = active[keep], Y[keep]
        if len(active) == 0 or k == params.max_iters:
            break
        Y = eval_map(f, Y)
    return labels, iters


def classify_many(f: PolyMap, X, params: OrbitParams = OrbitParams(),
                  fixed_point=None) -> tuple[np.ndarray, np.ndarray, bool]:
    """Vectorised :func:`classify`: ``(labels, iterations, trap_verified)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != f.dim:
        raise ValueError("points have the wrong dimension")
    if fixed_point is None:
        x0 = np.zeros(f.dim)
        shifted = f
    else:
        x0 = np.asarray(fixed_point, dtype=np.float64).reshape(f.dim)
        shifted = shift_to_origin(f, x0)
    trap, ok = validate_trap(shifted, params.trap_radius)
    labels, iters = _iterate(f, X, params, trap, x0)
    return labels, iters, ok


def classify(f: PolyMap, x, params: OrbitParams = OrbitParams(), fixed_point=None) -> Verdict:
    """Iterate ``x <- f(x)``: Converged on entering the trap ball around the fixed
    point, Escaped beyond the escape radius or on a non-finite iterate,
    Undecided after ``max_iters``."""
    labels, iters, ok = classify_many(f, np.asarray(x, dtype=np.float64).reshape(1, -1),
                                      params, fixed_point)
    return Verdict(int(labels[0]), int(iters[0]), ok)


def basin_grid(f: PolyMap, box, res, params: OrbitParams = OrbitParams(),
               fixed_point=None) -> BasinRaster:
    box, res = _check_box(box, res)
    if len(box) != f.dim:
        raise ValueError("box dimension does not match the map")
    labels, _, _ = classify_many(f, cell_centers(box, res), params, fixed_point)
    return BasinRaster(box, res, labels.reshape(res))


# ------------------------------------------------------- reference basins

def _points(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if n == 1 and X.ndim <= 1:
        X = X.reshape(-1, 1)
    X = np.atleast_2d(X)
    if X.shape[1] != n:
        raise ValueError(f"points must have dimension {n}")
    return X


def analytic_da(example_id: int) -> Callable[[np.ndarray], np.ndarray]:
    """Membership predicate (boolean per point) of the published basin of
    reference example 1, 2 or 3."""
    if example_id == 1:
        def pred(X):
            x = _points(X, 1)[:, 0]
            return (-0.271845 < x) & (x < 0.653564)
    elif example_id == 2:
        def pred(X):
            X = _points(X, 2)
            return X[:, 0] ** 2 + X[:, 1] ** 2 < 3.0
    elif example_id == 3:
        def pred(X):
            X = _points(X, 2)
            return (np.abs(X[:, 0]) < 0.5) & (np.abs(X[:, 1]) < 1.0 / 3.0)
    else:
        raise ValueError(f"no published basin for example {example_id!r}")
    return pred


def analytic_boundary(example_id: int, samples: int = 256) -> list[list[tuple[float, ...]]]:
    """Polylines tracing the published boundary (for SVG overlays)."""
    if example_id == 1:
        return [[(-0.271845,), (0.653564,)]]
    if example_id == 2:
        t = np.linspace(0.0, 2.0 * math.pi, samples + 1)
        r = math.sqrt(3.0)
        return [[(float(r * math.cos(a)), float(r * math.sin(a))) for a in t]]
    if example_id == 3:
        a, b = 0.5, 1.0 / 3.0
        return [[(-a, -b), (a, -b), (a, b), (-a, b), (-a, -b)]]
    raise ValueError(f"no published basin for example {example_id!r}")


# ------------------------------------------------------------------ metrics

@dataclass(frozen=True)
class Comparison:
    false_inclusion_rate: float
    coverage: float
    estimate_cells: int
    truth_converged: int
    excluded_undecided: int


def compare(estimate: BasinRaster, truth: BasinRaster) -> Comparison:
    """False-inclusion rate and coverage of an estimate against an oracle raster.

    Cells the oracle leaves Undecided are dropped from both counts.
    """
    if not estimate.same_grid(truth):
        raise GridMismatch("estimate and truth live on different grids")
    decided = truth.labels != UNDECIDED
    est = estimate.members() & decided
    conv = truth.labels == CONVERGED
    esc = truth.labels == ESCAPED
    n_est = int(est.sum())
    n_conv = int(conv.sum())
    fir = float((est & esc).sum()) / n_est if n_est else 0.0
    cov = float((est & conv).sum()) / n_conv if n_conv else 0.0
    return Comparison(fir, cov, n_est, n_conv, int((~decided).sum()))
