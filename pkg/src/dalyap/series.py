"""Degree-graded truncated multivariate power series.

A :class:`TruncatedSeries` is a polynomial in ``x - center`` of total degree
at most ``max_degree`` whose coefficients are extended-exponent numbers.
Storage is sparse: a graded-lex sorted array of exponent rows plus an
:class:`~dalyap.extfloat.ExtArray` of nonzero coefficients.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, TextIO

import numpy as np

from .errors import CenterMismatch, NotCenteredAtOrigin, SeriesOverflow
from .extfloat import ExtArray, ExtFloat, ZERO_EXP
from .monomials import grlex_order, monomial_index
from .polymap import PolyMap

__all__ = [
    "TruncatedSeries",
    "multiply",
    "compose_with_map",
    "Composer",
    "taylor_shift",
    "eval_series",
    "eval_series_many",
    "squared_norm_series",
    "write_embryo",
    "read_embryo",
    "series_equal",
]

# double kernels refuse coefficients beyond this magnitude
_DOUBLE_LIMIT = 1e300


def _group_sum(keys: np.ndarray, vals: ExtArray) -> tuple[np.ndarray, ExtArray]:
    """Sum values sharing a key; returns unique sorted keys and aligned sums.

    Within a group the summation order is the input order, so results are
    reproducible for a fixed input ordering.
    """
    if len(keys) == 0:
        return keys, ExtArray.zeros(0)
    order = np.argsort(keys, kind="stable")
    k = keys[order]
    m, e = vals.mant[order], vals.exp[order]
    starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
    E = np.maximum.reduceat(e, starts)
    rep = np.repeat(E, np.diff(np.r_[starts, len(k)]))
    shifted = np.ldexp(m, np.maximum(e - rep, -1100).astype(np.int32))
    S = np.add.reduceat(shifted, starts)
    return k[starts], ExtArray(S, E)


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    """Sparse truncated power series in ``x - center``.

    ``exps`` rows are unique, graded-lex sorted and of degree ``<= max_degree``;
    ``coeffs`` holds no zeros.
    """

    dim: int
    center: tuple[float, ...]
    max_degree: int
    exps: np.ndarray
    coeffs: ExtArray
    _degrees: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_degrees", self.exps.sum(axis=1) if len(self.exps) else
                           np.zeros(0, dtype=np.int64))
        if len(self.center) != self.dim:
            raise ValueError("center has the wrong dimension")

    # ---------------------------------------------------------------- build
    @classmethod
    def from_arrays(cls, exps, coeffs: ExtArray, max_degree: int, center=None,
                    dim: int | None = None, *, combine: bool = False) -> "TruncatedSeries":
        exps = np.asarray(exps, dtype=np.int64)
        if dim is None:
            dim = exps.shape[1] if exps.ndim == 2 and exps.shape[1] else len(center)
        exps = exps.reshape(-1, dim)
        if center is None:
            center = (0.0,) * dim
        center = tuple(float(c) for c in center)
        keep = exps.sum(axis=1) <= max_degree
        exps, coeffs = exps[keep], coeffs[np.flatnonzero(keep)]
        if combine and len(exps):
            radix = (int(exps.max()) + 1) ** np.arange(dim, dtype=np.int64)
            keys = exps @ radix
            _, first = np.unique(keys, return_index=True)
            ukeys, coeffs = _group_sum(keys, coeffs)
            lookup = {int(k): exps[i] for k, i in zip(keys[first], first)}
            exps = np.array([lookup[int(k)] for k in ukeys], dtype=np.int64).reshape(-1, dim)
        nz = np.flatnonzero(coeffs.mant != 0.0)
        exps, coeffs = exps[nz], coeffs[nz]
        order = grlex_order(exps)
        return cls(dim, center, int(max_degree), exps[order], coeffs[order])

    @classmethod
    def from_terms(cls, terms: Mapping[tuple, float | ExtFloat], max_degree: int,
                   center=None, dim: int | None = None) -> "TruncatedSeries":
        if dim is None:
            dim = len(next(iter(terms))) if terms else len(center)
        items = list(terms.items())
        exps = np.array([k for k, _ in items], dtype=np.int64).reshape(-1, dim)
        coeffs = ExtArray.from_scalars(ExtFloat.coerce(v) for _, v in items)
        return cls.from_arrays(exps, coeffs, max_degree, center, dim, combine=True)

    @classmethod
    def zero(cls, dim: int, max_degree: int, center=None) -> "TruncatedSeries":
        return cls.from_arrays(np.zeros((0, dim), dtype=np.int64), ExtArray.zeros(0),
                               max_degree, center, dim)

    @classmethod
    def from_flat(cls, flat: ExtArray, dim: int, max_degree: int, center=None) -> "TruncatedSeries":
        """From coefficients over the full graded-lex index of ``(dim, max_degree)``."""
        idx = monomial_index(dim, max_degree)
        nz = np.flatnonzero(flat.mant != 0.0)
        return cls(dim, tuple(float(c) for c in (center if center is not None else (0.0,) * dim)),
                   max_degree, idx.exps[nz], flat[nz])

    @classmethod
    def from_map_component(cls, f: PolyMap, i: int, max_degree: int) -> "TruncatedSeries":
        return cls.from_terms(dict(f.components[i]) or {(0,) * f.dim: 0.0}, max_degree, dim=f.dim)

    @classmethod
    def coordinate(cls, dim: int, i: int, max_degree: int, center=None) -> "TruncatedSeries":
        """The series ``x_i - c_i`` (plus ``c_i`` if a center is given)."""
        e = [0] * dim
        e[i] = 1
        terms = {tuple(e): 1.0}
        if center is not None and center[i] != 0.0:
            terms[(0,) * dim] = float(center[i])
        return cls.from_terms(terms, max_degree, center, dim)

    # ----------------------------------------------------------- accessors
    def __len__(self) -> int:
        return len(self.exps)

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    def is_zero(self) -> bool:
        return len(self.exps) == 0

    def layer_bounds(self, m: int) -> tuple[int, int]:
        lo = int(np.searchsorted(self._degrees, m, side="left"))
        hi = int(np.searchsorted(self._degrees, m, side="right"))
        return lo, hi

    def layer(self, m: int) -> tuple[np.ndarray, ExtArray]:
        lo, hi = self.layer_bounds(m)
        return self.exps[lo:hi], self.coeffs[lo:hi]

    def nonzero_layers(self) -> list[int]:
        return sorted(set(int(d) for d in np.unique(self._degrees)))

    def coeff(self, j) -> ExtFloat:
        j = np.asarray(j, dtype=np.int64)
        lo, hi = self.layer_bounds(int(j.sum()))
        hit = np.flatnonzero(np.all(self.exps[lo:hi] == j, axis=1))
        return self.coeffs[lo + int(hit[0])] if len(hit) else ExtFloat(0, 0.0, 0)

    def to_dict(self) -> dict[tuple[int, ...], ExtFloat]:
        return {tuple(int(v) for v in e): self.coeffs[i] for i, e in enumerate(self.exps)}

    def to_float_dict(self) -> dict[tuple[int, ...], float]:
        vals = self.coeffs.to_float()
        return {tuple(int(v) for v in e): float(vals[i]) for i, e in enumerate(self.exps)}

    def to_flat(self, max_degree: int | None = None) -> ExtArray:
        p = self.max_degree if max_degree is None else max_degree
        idx = monomial_index(self.dim, p)
        out = ExtArray.zeros(idx.size)
        keep = np.flatnonzero(self._degrees <= p)
        if len(keep):
            out[idx.rank(self.exps[keep])] = self.coeffs[keep]
        return out

    def to_dense(self) -> ExtArray:
        """Coefficients on a dense ``(p+1,)*dim`` grid (zeros above degree p)."""
        p = self.max_degree
        shape = (p + 1,) * self.dim
        out = ExtArray.zeros(shape)
        if len(self.exps):
            out[tuple(self.exps.T)] = self.coeffs
        return out

    @classmethod
    def from_dense(cls, dense: ExtArray, max_degree: int, center) -> "TruncatedSeries":
        nz = np.nonzero(dense.mant)
        exps = np.column_stack(nz).astype(np.int64) if len(nz) else np.zeros((0, 1))
        dim = dense.mant.ndim
        return cls.from_arrays(exps.reshape(-1, dim), dense[nz], max_degree, center, dim)

    def truncate(self, p: int) -> "TruncatedSeries":
        keep = np.flatnonzero(self._degrees <= p)
        return TruncatedSeries(self.dim, self.center, p, self.exps[keep], self.coeffs[keep])

    def with_layers_replaced(self, other: "TruncatedSeries", layers: Iterable[int]) -> "TruncatedSeries":
        layers = set(layers)
        keep_self = np.array([int(d) not in layers for d in self._degrees], dtype=bool)
        keep_other = np.array([int(d) in layers for d in other._degrees], dtype=bool)
        exps = np.vstack([self.exps[keep_self], other.exps[keep_other]])
        coeffs = ExtArray.concatenate([self.coeffs[np.flatnonzero(keep_self)],
                                       other.coeffs[np.flatnonzero(keep_other)]])
        return TruncatedSeries.from_arrays(exps, coeffs, self.max_degree, self.center, self.dim)

    def max_abs_by_layer(self) -> dict[int, ExtFloat]:
        out = {}
        for m in self.nonzero_layers():
            out[m] = self.layer(m)[1].max_abs()
        return out

    # ---------------------------------------------------------- arithmetic
    def _check_compatible(self, other: "TruncatedSeries") -> None:
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        if not np.allclose(self.center, other.center, rtol=0, atol=0):
            raise CenterMismatch(f"centers differ: {self.center} vs {other.center}")

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check_compatible(other)
        p = min(self.max_degree, other.max_degree)
        exps = np.vstack([self.exps, other.exps])
        coeffs = ExtArray.concatenate([self.coeffs, other.coeffs])
        return TruncatedSeries.from_arrays(exps, coeffs, p, self.center, self.dim, combine=True)

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(self.dim, self.center, self.max_degree, self.exps, -self.coeffs)

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return self + (-other)

    def scale(self, alpha: float | ExtFloat) -> "TruncatedSeries":
        return TruncatedSeries.from_arrays(self.exps, self.coeffs * alpha, self.max_degree,
                                           self.center, self.dim)

    def __repr__(self) -> str:
        return (f"TruncatedSeries(dim={self.dim}, center={self.center}, "
                f"max_degree={self.max_degree}, terms={len(self)})")


# -------------------------------------------------------------- multiply

def multiply(a: TruncatedSeries, b: TruncatedSeries, p: int | None = None) -> TruncatedSeries:
    """Product truncated at degree ``p`` (default: the smaller max degree).

    Every pairwise product is formed in ExtFloat arithmetic and summed per
    target monomial in graded-lex pair order.
    """
    a._check_compatible(b)
    if p is None:
        p = min(a.max_degree, b.max_degree)
    if a.is_zero() or b.is_zero():
        return TruncatedSeries.zero(a.dim, p, a.center)
    radix = (p + 1) ** np.arange(a.dim, dtype=np.int64)
    key_parts, val_parts = [], []
    da, db = a.degrees, b.degrees
    # chunk over the rows of a to bound memory
    chunk = max(1, 4_000_000 // max(len(b), 1))
    for s in range(0, len(a), chunk):
        ia = np.arange(s, min(s + chunk, len(a)))
        ok = (da[ia][:, None] + db[None, :]) <= p
        ai, bi = np.nonzero(ok)
        ai = ia[ai]
        if len(ai) == 0:
            continue
        key_parts.append((a.exps[ai] + b.exps[bi]) @ radix)
        val_parts.append(a.coeffs[ai] * b.coeffs[bi])
    if not key_parts:
        return TruncatedSeries.zero(a.dim, p, a.center)
    keys, vals = _group_sum(np.concatenate(key_parts), ExtArray.concatenate(val_parts))
    exps = np.stack([(keys // (p + 1) ** i) % (p + 1) for i in range(a.dim)], axis=1)
    return TruncatedSeries.from_arrays(exps, vals, p, a.center, a.dim)


def squared_norm_series(n: int, p: int) -> TruncatedSeries:
    """``||x||^2 = sum_i x_i^2`` as a series."""
    terms = {}
    for i in range(n):
        e = [0] * n
        e[i] = 2
        terms[tuple(e)] = 1.0
    return TruncatedSeries.from_terms(terms, p, dim=n)


# ------------------------------------------------------------- compose

class _PowerTable:
    """Truncated powers ``f^j`` of a zero-constant map, streamed layer by layer.

    Layer ``k`` is a double array of shape ``(#monomials of degree k, N - off[k])``
    whose row ``j`` holds the coefficients of ``f^j`` on flat indices
    ``off[k] .. N-1`` (``f^j`` has no terms below degree ``k``).
    """

    def __init__(self, f: PolyMap, p: int):
        if not f.is_centered():
            raise NotCenteredAtOrigin("map has a nonzero constant term")
        self.f = f
        self.p = p
        self.index = idx = monomial_index(f.dim, p)
        self.N = idx.size
        self.terms = []
        for comp in f.components:
            tl = []
            for a, c in comp:
                src, dst = idx.shift_map(a)
                tl.append((c, src, dst))
            self.terms.append(tl)

    def first_layer(self) -> np.ndarray:
        idx = self.index
        off1 = int(idx.offsets[1])
        P = np.zeros((self.f.dim, self.N - off1))
        for i, comp in enumerate(self.f.components):
            for a, c in comp:
                if sum(a) <= self.p:
                    P[i, int(idx.rank(np.array(a))[0]) - off1] += c
        return P

    def next_layer(self, k: int, P: np.ndarray) -> np.ndarray:
        idx = self.index
        n = self.f.dim
        offk, offn = int(idx.offsets[k]), int(idx.offsets[k + 1])
        new_rows = idx.exps[idx.layer(k + 1)]
        out = np.zeros((len(new_rows), self.N - offn))
        first_var = np.argmax(new_rows > 0, axis=1)
        for i in range(n):
            rows = np.flatnonzero(first_var == i)
            if len(rows) == 0:
                continue
            parents = new_rows[rows].copy()
            parents[:, i] -= 1
            src_rows = P[idx.rank(parents) - offk]
            block = np.zeros((len(rows), self.N - offn))
            for c, src, dst in self.terms[i]:
                lo = int(np.searchsorted(src, offk))
                s, d = src[lo:], dst[lo:]
                block[:, d - offn] += c * src_rows[:, s - offk]
            out[rows] = block
        return out

    def layers(self):
        """Yield ``(k, P_k)`` for ``k = 1 .. p``."""
        P = self.first_layer()
        for k in range(1, self.p + 1):
            yield k, P
            if k < self.p:
                P = self.next_layer(k, P)


def _to_double(coeffs: ExtArray, what: str) -> np.ndarray:
    vals = coeffs.to_float()
    if not np.all(np.isfinite(vals)) or np.any(np.abs(vals) > _DOUBLE_LIMIT):
        raise SeriesOverflow(f"{what} exceed the double range of the multivariate kernel")
    return vals


def _compose_1d(V: TruncatedSeries, f: PolyMap, p: int) -> TruncatedSeries:
    # Horner: H_k = B_k + f * H_{k+1}, with H_k truncated at degree p - k
    flat = V.to_flat(p)
    fcoef = [(e[0], c) for e, c in f.components[0]]
    H = ExtArray.zeros(p + 1)
    for k in range(p, -1, -1):
        top = p - k
        new = ExtArray.zeros(p + 1)
        for d, c in fcoef:
            if d <= top:
                new.iadd_at(slice(d, top + 1), H[0:top + 1 - d] * c)
        new.iadd_at(slice(0, 1), flat[k:k + 1])
        H = new
    return TruncatedSeries.from_flat(H, 1, p)


class Composer:
    """Repeated ``V -> V o f`` at fixed ``(f, p)``.

    One-dimensional maps use an ExtFloat Horner scheme.  Multivariate maps
    use a double-precision table of the powers ``f^j``; the table is kept
    in memory when it is small enough and rebuilt per call otherwise.
    """

    def __init__(self, f: PolyMap, p: int, cache_limit: int = 30_000_000):
        if not f.is_centered():
            raise NotCenteredAtOrigin("map has a nonzero constant term")
        self.f = f
        self.p = p
        self._table = None if f.dim == 1 else _PowerTable(f, p)
        self._cached = None
        if self._table is not None:
            idx = self._table.index
            size = sum(int(idx.offsets[k + 1] - idx.offsets[k]) * int(idx.size - idx.offsets[k])
                       for k in range(1, p + 1))
            if size <= cache_limit:
                self._cached = list(self._table.layers())

    def __call__(self, V: TruncatedSeries) -> TruncatedSeries:
        if V.dim != self.f.dim:
            raise ValueError("dimension mismatch between series and map")
        if any(V.center):
            raise CenterMismatch("composition needs a series centered at the origin")
        p = self.p
        if self.f.dim == 1:
            return _compose_1d(V, self.f, p)
        idx = self._table.index
        b = _to_double(V.to_flat(p), "series coefficients")
        acc = np.zeros(idx.size)
        acc[0] = b[0]
        layers = self._cached if self._cached is not None else self._table.layers()
        for k, P in layers:
            bk = b[idx.layer(k)]
            if np.any(bk):
                acc[int(idx.offsets[k]):] += bk @ P
        if not np.all(np.isfinite(acc)):
            raise SeriesOverflow("composition overflowed the double range")
        return TruncatedSeries.from_flat(ExtArray.from_float(acc), self.f.dim, p)


def compose_with_map(V: TruncatedSeries, f: PolyMap, p: int | None = None) -> TruncatedSeries:
    """``V o f`` truncated at degree ``p``; ``f`` must fix the origin."""
    if not f.is_centered():
        raise NotCenteredAtOrigin("map has a nonzero constant term")
    return Composer(f, V.max_degree if p is None else p)(V)


# --------------------------------------------------------------- shift

def _ext_factorials(p: int) -> ExtArray:
    out = [ExtFloat(1, 1.0, 0)]
    for k in range(1, p + 1):
        out.append(out[-1] * k)
    return ExtArray.from_scalars(out)


def _shift_axis(dense: ExtArray, axis: int, delta: float, fact: ExtArray) -> ExtArray:
    """Re-centre along one axis: ``B'_m = (1/m!) sum_d B_{m+d} (m+d)! delta^d / d!``."""
    p = dense.shape[axis] - 1
    bshape = [1] * dense.mant.ndim
    bshape[axis] = p + 1
    u = dense * fact.reshape(bshape)
    v = [ExtFloat(1, 1.0, 0)]
    dd = ExtFloat.from_float(delta)
    for d in range(1, p + 1):
        v.append(v[-1] * dd / d)
    v = ExtArray.from_scalars(v)
    um = np.moveaxis(u.mant, axis, 0)
    ue = np.moveaxis(u.exp, axis, 0)
    out_m = np.zeros_like(um)
    out_e = np.full(ue.shape, ZERO_EXP, dtype=np.int64)
    vshape = (p + 1,) + (1,) * (dense.mant.ndim - 1)
    vm, ve = v.mant.reshape(vshape), v.exp.reshape(vshape)
    for m in range(p + 1):
        terms = ExtArray(um[m:] * vm[:p + 1 - m], ue[m:] + ve[:p + 1 - m])
        s = terms.sum(axis=0)
        s = s * (ExtFloat(1, 1.0, 0) / fact[m])
        out_m[m], out_e[m] = s.mant, s.exp
    return ExtArray(np.moveaxis(out_m, 0, axis), np.moveaxis(out_e, 0, axis), normalized=True)


def taylor_shift(V: TruncatedSeries, c_new) -> TruncatedSeries:
    """Re-expand ``V`` (a polynomial) about ``c_new``; the degree is unchanged."""
    c_new = tuple(float(c) for c in np.asarray(c_new, dtype=np.float64).reshape(-1))
    if len(c_new) != V.dim:
        raise ValueError("new center has the wrong dimension")
    delta = [cn - co for cn, co in zip(c_new, V.center)]
    if not any(delta) or V.is_zero():
        return TruncatedSeries(V.dim, c_new, V.max_degree, V.exps, V.coeffs)
    p = V.max_degree
    if (p + 1) ** V.dim > 20_000_000:
        raise ValueError("series too large for a dense Taylor shift")
    dense = V.to_dense()
    fact = _ext_factorials(p)
    for axis, d in enumerate(delta):
        if d != 0.0:
            dense = _shift_axis(dense, axis, d, fact)
    # the shift of a degree-p polynomial has degree <= p; stray entries are zeros
    return TruncatedSeries.from_dense(dense, p, c_new)


# ---------------------------------------------------------------- eval

def _ext_powers(z: ExtFloat, kmax: int) -> ExtArray:
    out = ExtArray.zeros(kmax + 1)
    out[0] = ExtFloat(1, 1.0, 0)
    have = 1
    # doubling: out[have:2*have] = out[0:have] * z^have
    zpow = z
    while have <= kmax:
        hi = min(2 * have, kmax + 1)
        out[have:hi] = out[0:hi - have] * zpow
        zpow = zpow * zpow
        have = hi
    return out


def eval_series(V: TruncatedSeries, x) -> ExtFloat:
    """``sum_j B_j (x - c)^j`` in ExtFloat, summed layer by layer in order."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if len(x) != V.dim:
        raise ValueError("point has the wrong dimension")
    if V.is_zero():
        return ExtFloat(0, 0.0, 0)
    z = [ExtFloat.from_float(xi - ci) for xi, ci in zip(x, V.center)]
    pw = [_ext_powers(zi, int(V.exps[:, i].max())) for i, zi in enumerate(z)]
    terms = V.coeffs.copy()
    for i in range(V.dim):
        terms = terms * pw[i][V.exps[:, i]]
    total = ExtFloat(0, 0.0, 0)
    for m in V.nonzero_layers():
        lo, hi = V.layer_bounds(m)
        total = total + terms[lo:hi].sum()
    return total


def eval_series_many(V: TruncatedSeries, X, chunk_terms: int = 4_000_000) -> ExtArray:
    """Vectorised :func:`eval_series` over points ``X`` of shape ``(N, n)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    N = len(X)
    out = ExtArray.zeros(N)
    if V.is_zero() or N == 0:
        return out
    Z = ExtArray.from_float(X - np.asarray(V.center))
    T = len(V)
    step = max(1, chunk_terms // T)
    for s in range(0, N, step):
        sl = slice(s, min(s + step, N))
        terms = ExtArray(np.broadcast_to(V.coeffs.mant, (sl.stop - sl.start, T)).copy(),
                         np.broadcast_to(V.coeffs.exp, (sl.stop - sl.start, T)).copy(),
                         normalized=True)
        for i in range(V.dim):
            zi = ExtArray(Z.mant[sl, i], Z.exp[sl, i], normalized=True)
            kmax = int(V.exps[:, i].max())
            if kmax == 0:
                continue
            # per-point power tables, shape (points, kmax+1)
            pm = np.ones((len(zi), kmax + 1))
            pe = np.zeros((len(zi), kmax + 1), dtype=np.int64)
            have, zp = 1, zi
            while have <= kmax:
                hi = min(2 * have, kmax + 1)
                blk = ExtArray(pm[:, :hi - have], pe[:, :hi - have], normalized=True) * \
                    ExtArray(zp.mant[:, None], zp.exp[:, None], normalized=True)
                pm[:, have:hi], pe[:, have:hi] = blk.mant, blk.exp
                zp = zp * zp
                have = hi
            sel = V.exps[:, i]
            terms = terms * ExtArray(pm[:, sel], pe[:, sel], normalized=True)
        # layer-by-layer sums, then across layers in order
        acc = ExtArray.zeros(sl.stop - sl.start)
        for m in V.nonzero_layers():
            lo, hi = V.layer_bounds(m)
            acc = acc + ExtArray(terms.mant[:, lo:hi], terms.exp[:, lo:hi], normalized=True).sum(axis=1)
        out[sl] = acc
    return out


# ------------------------------------------------------------- archive

def write_embryo(V: TruncatedSeries, target: str | os.PathLike | TextIO) -> None:
    """Write the ``EMBRYO v1`` text archive (bit-exact mantissas)."""
    buf = io.StringIO()
    buf.write("EMBRYO v1\n")
    buf.write(f"dim {V.dim}\n")
    buf.write(f"degree {V.max_degree}\n")
    buf.write("center " + " ".join(repr(float(c)) for c in V.center) + "\n")
    for i, e in enumerate(V.exps):
        c = V.coeffs[i]
        buf.write(" ".join(str(int(v)) for v in e)
                  + f" {c.sign} {float.hex(c.mantissa)} {c.exponent}\n")
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)


def read_embryo(source: str | os.PathLike | TextIO) -> TruncatedSeries:
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "EMBRYO v1":
        raise ValueError("not an EMBRYO v1 archive")
    try:
        dim = int(lines[1].split()[1])
        degree = int(lines[2].split()[1])
        head, *cvals = lines[3].split()
        if lines[1].split()[0] != "dim" or lines[2].split()[0] != "degree" or head != "center":
            raise ValueError
        center = tuple(float(v) for v in cvals)
        exps, scal = [], []
        for ln in lines[4:]:
            parts = ln.split()
            exps.append([int(v) for v in parts[:dim]])
            sign, mant, ex = int(parts[dim]), float.fromhex(parts[dim + 1]), int(parts[dim + 2])
            scal.append(ExtFloat(sign, mant, ex) if sign else ExtFloat(0, 0.0, 0))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed EMBRYO archive: {exc}") from None
    return TruncatedSeries.from_arrays(np.array(exps, dtype=np.int64).reshape(-1, dim),
                                       ExtArray.from_scalars(scal), degree, center, dim)


def series_equal(a: TruncatedSeries, b: TruncatedSeries) -> bool:
    """Bit-exact equality of center, degree, support and coefficients."""
    return (a.dim == b.dim and a.center == b.center and a.max_degree == b.max_degree
            and a.exps.shape == b.exps.shape and bool(np.all(a.exps == b.exps))
            and bool(np.all(a.coeffs.mant == b.coeffs.mant))
            and bool(np.all(a.coeffs.exp == b.coeffs.exp)))

