"""Lyapunov embryos: truncations of the solution of V(f(x)) - V(x) = -||x||^2.

Three constructions are offered:

* :class:`PerDegreeSolve` -- layer-by-layer triangular solve.  Layer ``m``
  satisfies ``V_m(Ax) - V_m(x) = rhs_m`` where the right-hand side collects
  ``-||x||^2`` (at m=2) and the degree-m part of lower layers composed
  with ``f``.
* :class:`Picard` -- fixed-point iteration ``W <- ||x||^2 + W o f``.
* :class:`DirectSum` -- the orbit sum ``sum_k ||f^k(x)||^2`` built by
  iterating truncated series ``g_{k+1} = f(g_k)``.

The first two compose ``V`` with ``f`` and can lose many digits to
cancellation when ``f`` has no linear part; the orbit sum does not.
:class:`SolveInfo` reports a cancellation diagnostic for the per-degree solve.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import (NoConvergence, NotAContraction, NotCenteredAtOrigin, SeriesOverflow,
                     SingularDegreeOperator)
from .extfloat import ExtArray, ExtFloat
from .monomials import monomial_index
from .polymap import PolyMap, jacobian_at_zero, spectral_norm
from .series import (Composer, TruncatedSeries, _PowerTable, eval_series_many,
                     squared_norm_series)

__all__ = [
    "PerDegreeSolve",
    "Picard",
    "DirectSum",
    "EmbryoMethod",
    "SolveInfo",
    "check_hypotheses",
    "solve_embryo",
    "default_direct_sum_terms",
    "orbit_sum",
    "residual",
    "layer_residuals",
    "PositivityReport",
    "positivity_probe",
    "conjugate_by_scale",
]


@dataclass(frozen=True)
class PerDegreeSolve:
    pass


@dataclass(frozen=True)
class Picard:
    tol: float = 1e-12
    max_iter: int = 10000
    initial: TruncatedSeries | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("Picard needs tol > 0 and max_iter >= 1")


@dataclass(frozen=True)
class DirectSum:
    K: int | None = None

    def __post_init__(self):
        if self.K is not None and self.K < 1:
            raise ValueError("DirectSum needs K >= 1")


EmbryoMethod = Union[PerDegreeSolve, Picard, DirectSum]


@dataclass
class SolveInfo:
    method: str
    degree: int
    iterations: int = 0
    scale: float = 1.0
    # max over layers of sum|terms| / |result| in the right-hand sides;
    # log10 of it is roughly the number of digits lost
    amplification: float = 1.0
    layer_amplification: dict[int, float] = field(default_factory=dict)


def check_hypotheses(f: PolyMap) -> float:
    """Return ``||d0 f||`` (spectral norm) if ``f(0)=0`` and the norm is below 1."""
    A = jacobian_at_zero(f)
    norm = spectral_norm(A)
    if not norm < 1.0:
        raise NotAContraction(norm)
    return norm


def conjugate_by_scale(f: PolyMap, s: float) -> PolyMap:
    """``u -> f(s u) / s``; an embryo of this map has ``B~_j = B_j s^(|j|-2)``."""
    return PolyMap.from_dicts([{e: c * s ** (sum(e) - 1) for e, c in comp}
                               for comp in f.components], f.var_names)


def _unscale(V: TruncatedSeries, s: float, shift: int = 2) -> TruncatedSeries:
    """Multiply layer m by ``s**(shift - m)`` in ExtFloat."""
    if s == 1.0 and shift == 2:
        return V
    inv = ExtFloat(1, 1.0, 0) / ExtFloat.from_float(s)
    fac = {m: (inv ** m) * (ExtFloat.from_float(s) ** shift) for m in V.nonzero_layers()}
    f = ExtArray.from_scalars(fac[int(d)] for d in V.degrees)
    return TruncatedSeries.from_arrays(V.exps, V.coeffs * f, V.max_degree, V.center, V.dim)


# ------------------------------------------------------------ per-degree

def _per_degree_1d(f: PolyMap, p: int, info: SolveInfo) -> TruncatedSeries:
    terms = [(e[0], c) for e, c in f.components[0]]
    a = ExtFloat.from_float(dict(terms).get(1, 0.0))
    fk = ExtArray.zeros(p + 1)
    for d, c in terms:
        if d <= p:
            fk[d] = ExtFloat.from_float(c)
    lo = min(d for d, _ in terms) if terms else p + 1  # lowest degree present in f^k
    acc = ExtArray.zeros(p + 1)
    absacc = ExtArray.zeros(p + 1)
    B = ExtArray.zeros(p + 1)
    one = ExtFloat(1, 1.0, 0)
    ak = a
    worst = 1.0
    for k in range(1, p + 1):
        if k >= 2:
            ak = ak * a
            rhs = -acc[k] - (one if k == 2 else 0.0)
            denom = ak - one
            if denom.is_zero():
                raise SingularDegreeOperator(k)
            bk = rhs / denom
            B[k] = bk
            tot = absacc[k] + (one if k == 2 else 0.0)
            if not rhs.is_zero():
                amp = 2.0 ** (tot.log2abs() - rhs.log2abs())
                info.layer_amplification[k] = amp
                worst = max(worst, amp)
            if k < p and not bk.is_zero():
                s = slice(k + 1, p + 1)
                contrib = fk[s] * bk
                acc.iadd_at(s, contrib)
                absacc.iadd_at(s, abs(contrib))
        if k < p and lo <= p:
            new = ExtArray.zeros(p + 1)
            for d, c in terms:
                if lo + d <= p:
                    new.iadd_at(slice(lo + d, p + 1), fk[lo:p + 1 - d] * c)
            fk = new
            nz = np.flatnonzero(fk.mant)
            lo = int(nz[0]) if len(nz) else p + 1
    info.amplification = worst
    return TruncatedSeries.from_flat(B, 1, p)


def _per_degree_nd(f: PolyMap, p: int, info: SolveInfo) -> TruncatedSeries:
    n = f.dim
    idx = monomial_index(n, p)
    table = _PowerTable(f, p)
    N = idx.size
    acc = np.zeros(N)
    absacc = np.zeros(N)
    b_all = np.zeros(N)
    sq_rows = idx.rank(2 * np.eye(n, dtype=np.int64))
    worst = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k, P in table.layers():
            if k < 2:
                continue
            sl = idx.layer(k)
            nk = sl.stop - sl.start
            off = int(idx.offsets[k])
            rhs = -acc[sl].copy()
            tot = absacc[sl].copy()
            if k == 2:
                rhs[sq_rows - off] -= 1.0
                tot[sq_rows - off] += 1.0
            M = P[:, :nk]
            op = M.T - np.eye(nk)
            if np.count_nonzero(op - np.diag(np.diag(op))) == 0:
                d = np.diag(op)
                if np.any(np.abs(d) < 1e-14):
                    raise SingularDegreeOperator(k)
                b = rhs / d
            else:
                try:
                    if np.linalg.cond(op) > 1e14:
                        raise SingularDegreeOperator(k)
                    b = np.linalg.solve(op, rhs)
                except np.linalg.LinAlgError:
                    raise SingularDegreeOperator(k) from None
            rmax = np.max(np.abs(rhs)) if nk else 0.0
            if rmax > 0:
                amp = float(np.max(tot) / rmax)
                info.layer_amplification[k] = amp
                worst = max(worst, amp)
            b_all[sl] = b
            if k < p and np.any(b):
                acc[off:] += b @ P
                absacc[off:] += np.abs(b) @ np.abs(P)
            if not np.all(np.isfinite(acc)) or not np.all(np.isfinite(b)):
                raise SeriesOverflow(f"per-degree solve overflowed at degree {k}; "
                                     "try a smaller scale")
    info.amplification = worst
    return TruncatedSeries.from_flat(ExtArray.from_float(b_all), n, p)


# ----------------------------------------------------------------- Picard

def _picard(f: PolyMap, p: int, method: Picard, info: SolveInfo) -> TruncatedSeries:
    comp = Composer(f, p)
    q = squared_norm_series(f.dim, p)
    W = method.initial.truncate(p) if method.initial is not None else TruncatedSeries.zero(f.dim, p)
    change = math.inf
    for it in range(1, method.max_iter + 1):
        Wn = comp(W) + q
        diff = (Wn - W).coeffs.max_abs()
        big = Wn.coeffs.max_abs()
        W = Wn
        change = float(diff) if diff.log2abs() < 1000 else math.inf
        if diff <= (big + 1.0) * method.tol:
            info.iterations = it
            return W
    raise NoConvergence(method.max_iter, change)


# ------------------------------------------------------------- orbit sum

def default_direct_sum_terms(f: PolyMap, p: int) -> int:
    """Number of orbit-sum terms: ``alpha^K <= 1e-14`` for ``alpha = ||d0 f|| > 0``;
    for a zero linear part, the last k whose ``||f^k||^2`` reaches degree <= p."""
    alpha = spectral_norm(jacobian_at_zero(f))
    if alpha > 0:
        return max(1, math.ceil(math.log(1e-14) / math.log(alpha)))
    q = min((sum(e) for comp in f.components for e, _ in comp), default=p + 1)
    K = 0
    while 2 * q ** (K + 1) <= p:
        K += 1
    return max(K, 1)


class _Kernel:
    """Truncated products of series held as double vectors.

    One-dimensional series are dense coefficient vectors (``np.convolve``);
    multivariate ones use the flat graded-lex index of
    :func:`~dalyap.monomials.monomial_index` and precomputed index pairs.
    """

    _PAIR_CACHE_LIMIT = 10_000_000

    def __init__(self, n: int, p: int):
        self.n, self.p = n, p
        if n == 1:
            self.size = p + 1
            self.degree = np.arange(p + 1)
            return
        self.index = idx = monomial_index(n, p)
        self.size = idx.size
        self.degree = idx.degree
        self._pairs = None
        if math.comb(p + 2 * n, 2 * n) <= self._PAIR_CACHE_LIMIT:
            self._pairs = [self._layer_pairs(d) for d in range(p + 1)]

    def _layer_pairs(self, d: int):
        idx = self.index
        ia = np.arange(int(idx.offsets[d]), int(idx.offsets[d + 1]))
        ib = np.arange(int(idx.offsets[self.p - d + 1]))
        A, Bm = np.meshgrid(ia, ib, indexing="ij")
        A, Bm = A.reshape(-1), Bm.reshape(-1)
        dst = idx.rank(idx.exps[A] + idx.exps[Bm])
        return A.astype(np.int32), Bm.astype(np.int32), dst.astype(np.int32)

    def unit(self, i: int) -> int:
        if self.n == 1:
            return 1
        e = np.zeros(self.n, dtype=np.int64)
        e[i] = 1
        return int(self.index.rank(e)[0])

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.n == 1:
            return np.convolve(a, b)[:self.p + 1]
        out = np.zeros(self.size)
        idx = self.index
        for d in range(self.p + 1):
            if not np.any(a[int(idx.offsets[d]):int(idx.offsets[d + 1])]):
                continue
            A, Bm, dst = self._pairs[d] if self._pairs is not None else self._layer_pairs(d)
            out += np.bincount(dst, weights=a[A] * b[Bm], minlength=self.size)
        return out

    def apply_map(self, f: PolyMap, g: Sequence[np.ndarray]) -> list[np.ndarray]:
        powers: dict[tuple[int, int], np.ndarray] = {}

        def power(l, e):
            if e == 1:
                return g[l]
            key = (l, e)
            if key not in powers:
                powers[key] = self.mul(power(l, e - 1), g[l])
            return powers[key]

        out = []
        for comp in f.components:
            acc = np.zeros(self.size)
            for exps, c in comp:
                term = None
                for l, e in enumerate(exps):
                    if e:
                        pw = power(l, e)
                        term = pw if term is None else self.mul(term, pw)
                if term is None:
                    acc[0] += c
                else:
                    acc += c * term
            out.append(acc)
        return out


def _orbit_sum_scaled(f, p, K, center, s, tol, max_terms):
    n = f.dim
    ker = _Kernel(n, p)
    g = []
    for i in range(n):
        a = np.zeros(ker.size)
        a[0] = center[i]
        a[ker.unit(i)] = s
        g.append(a)
    tot = np.zeros(ker.size)
    quiet = 0
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            inc = np.zeros(ker.size)
            for gi in g:
                inc += ker.mul(gi, gi)
            tot += inc
            if not np.all(np.isfinite(tot)):
                raise SeriesOverflow("orbit sum left the double range")
            if K is not None:
                if k >= K:
                    break
            else:
                big = np.max(np.abs(tot))
                small = np.max(np.abs(inc))
                quiet = quiet + 1 if small <= tol * big else 0
                if quiet >= 3:
                    break
                if k >= max_terms:
                    raise NoConvergence(k, float(small / big) if big else math.inf)
            if not any(np.any(gi) for gi in g):
                break
            g = ker.apply_map(f, g)
            k += 1
    return tot, k


def _layer_log_max(tot: np.ndarray, n: int, p: int) -> np.ndarray:
    deg = np.arange(p + 1) if n == 1 else monomial_index(n, p).degree
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(tot))
    out = np.full(p + 1, -np.inf)
    np.maximum.at(out, deg.reshape(-1), la.reshape(-1))
    return out


def _growth_slope(logmax: np.ndarray, lo: int) -> float | None:
    m = np.arange(len(logmax))
    ok = np.isfinite(logmax) & (m >= lo)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(m[ok], logmax[ok], 1)[0])


def orbit_sum(f: PolyMap, p: int, K: int | None = None, center=None, scale: float | None = None,
              tol: float = 1e-17, max_terms: int = 100000,
              info: SolveInfo | None = None) -> TruncatedSeries:
    """Expansion of ``sum_{k=0}^{K} ||f^k(x)||^2`` about ``center`` to degree ``p``.

    The orbit ``g_{k+1} = f(g_k)``, ``g_0 = center + s*u``, is iterated on
    truncated series in double precision in the scaled variable ``u``; the
    result is mapped back to ``x`` with ExtFloat factors ``s**-m``.  With
    ``K=None`` terms are added until the increment stays below
    ``tol * max|total|`` for three consecutive terms.  ``scale=None`` picks
    ``s`` near the local radius of convergence from a low-degree pilot run
    and refines it so the coefficients in ``u`` neither overflow nor vanish.
    """
    n = f.dim
    center = np.zeros(n) if center is None else np.asarray(center, dtype=np.float64).reshape(n)
    if scale is not None:
        s_list = [float(scale)]
    else:
        s_list = None
    if s_list is None:
        s = 1.0
        pilot_p = min(p, 64)
        for _ in range(60):
            try:
                tot, _k = _orbit_sum_scaled(f, pilot_p, K, center, s, tol, max_terms)
                break
            except SeriesOverflow:
                s /= 16.0
        else:
            raise SeriesOverflow("could not find a workable scale for the orbit sum")
        if p > pilot_p:
            slope = _growth_slope(_layer_log_max(tot, n, pilot_p), max(2, pilot_p // 2))
            if slope is not None and abs(slope) > 1e-3:
                s = s * math.exp(-slope)
            for _ in range(12):
                try:
                    tot, k = _orbit_sum_scaled(f, p, K, center, s, tol, max_terms)
                except SeriesOverflow:
                    s /= 2.0
                    continue
                slope = _growth_slope(_layer_log_max(tot, n, p), max(2, p // 2))
                if slope is None or abs(slope) * p < 200:
                    break
                s = s * math.exp(-slope)
            else:
                raise SeriesOverflow("could not find a workable scale for the orbit sum")
        else:
            tot, k = _orbit_sum_scaled(f, p, K, center, s, tol, max_terms)
    else:
        s = s_list[0]
        tot, k = _orbit_sum_scaled(f, p, K, center, s, tol, max_terms)
    if info is not None:
        info.iterations = k
        info.scale = s
    if n == 1:
        exps = np.arange(p + 1).reshape(-1, 1)
        vals = tot
    else:
        idx = monomial_index(n, p)
        exps = idx.exps
        vals = tot
    V = TruncatedSeries.from_arrays(exps, ExtArray.from_float(vals), p, tuple(center), n)
    return _unscale(V, s, shift=0)


# ------------------------------------------------------------------ driver

# rounding amplification above which a degree solve is reported as unreliable
AMPLIFICATION_WARN = 1e12

def solve_embryo(f: PolyMap, p: int, method: EmbryoMethod | None = None, *,
                 scale: float = 1.0, return_info: bool = False):
    """Degree-``p`` embryo of the Lyapunov function of ``f`` at the origin.

    ``scale`` conjugates the map by ``x = s u`` before a per-degree or Picard
    solve (use a power of two to keep it exact); the result is always in the
    original variables.  ``DirectSum`` chooses its own scale.
    """
    if p < 2:
        raise ValueError("degree must be at least 2")
    if not f.is_centered():
        raise NotCenteredAtOrigin("map has a nonzero constant term")
    check_hypotheses(f)
    method = PerDegreeSolve() if method is None else method
    if isinstance(method, DirectSum):
        info = SolveInfo("direct-sum", p)
        K = method.K if method.K is not None else default_direct_sum_terms(f, p)
        V = orbit_sum(f, p, K=K, info=info)
    else:
        g = f if scale == 1.0 else conjugate_by_scale(f, scale)
        if isinstance(method, PerDegreeSolve):
            info = SolveInfo("per-degree", p, scale=scale)
            V = _per_degree_1d(g, p, info) if f.dim == 1 else _per_degree_nd(g, p, info)
        elif isinstance(method, Picard):
            info = SolveInfo("picard", p, scale=scale)
            if scale != 1.0 and method.initial is not None:
                init = _unscale(method.initial, 1.0 / scale)
                method = Picard(method.tol, method.max_iter, init)
            V = _picard(g, p, method, info)
        else:
            raise TypeError(f"unknown method {method!r}")
        V = _unscale(V, scale)
        if info.amplification > AMPLIFICATION_WARN:
            warnings.warn(f"degree solve amplified rounding by {info.amplification:.2g}; "
                          "coefficients may be inaccurate, DirectSum() is the stable choice",
                          RuntimeWarning, stacklevel=2)
    return (V, info) if return_info else V


# ---------------------------------------------------------------- checking

def layer_residuals(V: TruncatedSeries, f: PolyMap, p: int | None = None) -> dict[int, float]:
    """Per-layer ``max|(V o f - V + ||x||^2)_m| / max|V_m|`` (or ``/1`` for empty ``V_m``)."""
    p = V.max_degree if p is None else p
    V = V.truncate(p)
    R = Composer(f, p)(V) - V + squared_norm_series(f.dim, p)
    out = {}
    vmax = V.max_abs_by_layer()
    for m in range(p + 1):
        r = R.layer(m)[1].max_abs()
        den = vmax.get(m)
        q = r / den if den is not None else r
        out[m] = float(q) if q.log2abs() < 1000 else math.inf
    return out


def residual(V: TruncatedSeries, f: PolyMap, p: int | None = None) -> float:
    """Largest normalized layer residual of the functional equation."""
    return max(layer_residuals(V, f, p).values())


@dataclass(frozen=True)
class PositivityReport:
    values: np.ndarray          # V at the samples, as doubles (may be +-inf)
    nonpositive: np.ndarray     # indices with V <= 0 away from the center
    boundary: np.ndarray        # indices at the center where V == 0

    @property
    def ok(self) -> bool:
        return len(self.nonpositive) == 0


def positivity_probe(V: TruncatedSeries, samples) -> PositivityReport:
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if V.dim == 1 and X.shape[0] == 1 and X.shape[1] != 1:
        X = X.T
    vals = eval_series_many(V, X)
    sign = vals.sign()
    at_center = np.all(X == np.asarray(V.center), axis=1)
    bad = np.flatnonzero((sign <= 0) & ~at_center)
    boundary = np.flatnonzero((sign == 0) & at_center)
    bad = np.union1d(bad, np.flatnonzero((sign < 0) & at_center))
    return PositivityReport(vals.to_float(), bad, boundary)
