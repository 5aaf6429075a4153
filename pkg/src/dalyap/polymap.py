"""Polynomial self-maps of R^n: parsing, evaluation, linearisation at 0.

Map documents look like::

    vars: x y
    # comment
    x -> -1/2*x + x*y
    y -> -0.5*y + x*y

Coefficients are decimal or rational literals (``1/12`` is one double
division); monomials are products of ``v`` and ``v^k``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import FixedPointMismatch, MapSyntaxError, NotCenteredAtOrigin
from .monomials import grlex_order

__all__ = [
    "PolyMap",
    "parse_map",
    "serialize_map",
    "eval_map",
    "jacobian_at_zero",
    "spectral_norm",
    "shift_to_origin",
]

Term = tuple[tuple[int, ...], float]


@dataclass(frozen=True)
class PolyMap:
    """``n`` sparse component polynomials; ``components[i]`` is a tuple of
    ``(exponent, coefficient)`` pairs in graded-lex order, no duplicates."""

    dim: int
    components: tuple[tuple[Term, ...], ...]
    var_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if len(self.components) != self.dim or len(self.var_names) != self.dim:
            raise ValueError("need exactly one component and one name per dimension")
        if len(set(self.var_names)) != self.dim:
            raise ValueError("variable names must be distinct")
        for comp in self.components:
            seen = set()
            for exps, c in comp:
                if len(exps) != self.dim or any(e < 0 for e in exps):
                    raise ValueError(f"bad exponent {exps!r}")
                if exps in seen:
                    raise ValueError(f"duplicate monomial {exps!r}")
                seen.add(exps)
                if not math.isfinite(c):
                    raise ValueError(f"non-finite coefficient {c!r}")

    @classmethod
    def from_dicts(cls, comps: Sequence[Mapping[tuple, float]],
                   var_names: Sequence[str] | None = None) -> "PolyMap":
        """Build from one ``{exponent: coefficient}`` dict per component."""
        n = len(comps)
        if var_names is None:
            var_names = ("x", "y", "z")[:n] if n <= 3 else tuple(f"x{i + 1}" for i in range(n))
        out = []
        for comp in comps:
            items = [(tuple(int(e) for e in k), float(v)) for k, v in comp.items() if v != 0.0]
            if items:
                order = grlex_order(np.array([k for k, _ in items]))
                items = [items[i] for i in order]
            out.append(tuple(items))
        return cls(n, tuple(out), tuple(var_names))

    def as_dicts(self) -> list[dict[tuple[int, ...], float]]:
        return [dict(comp) for comp in self.components]

    @property
    def degree(self) -> int:
        return max((sum(e) for comp in self.components for e, _ in comp), default=0)

    def constant_terms(self) -> np.ndarray:
        zero = (0,) * self.dim
        return np.array([dict(comp).get(zero, 0.0) for comp in self.components])

    def is_centered(self) -> bool:
        return not np.any(self.constant_terms())

    def scaled(self, alpha: float) -> "PolyMap":
        return PolyMap.from_dicts([{e: alpha * c for e, c in comp} for comp in self.components],
                                  self.var_names)

    @cached_property
    def _arrays(self) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        for comp in self.components:
            if comp:
                out.append((np.array([e for e, _ in comp], dtype=np.int64),
                            np.array([c for _, c in comp], dtype=np.float64)))
            else:
                out.append((np.zeros((0, self.dim), dtype=np.int64), np.zeros(0)))
        return out

    def __str__(self) -> str:
        return serialize_map(self)


# ------------------------------------------------------------------ parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^]))"
)


def _tokenize(text: str, line: int, col0: int) -> list[tuple[str, str, int]]:
    toks, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise MapSyntaxError(f"unexpected character {text[bad]!r}", line, col0 + bad + 1)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), col0 + start + 1))
        pos = m.end()
    return toks


def _literal(tok: str, line: int, col: int) -> float:
    v = float(tok)
    if not math.isfinite(v):
        raise MapSyntaxError(f"non-finite literal {tok!r}", line, col)
    return v


def _parse_expr(text: str, names: Sequence[str], line: int, col0: int) -> dict[tuple, float]:
    toks = _tokenize(text, line, col0)
    index = {v: i for i, v in enumerate(names)}
    n = len(names)
    poly: dict[tuple, float] = {}
    i = 0
    end_col = col0 + len(text) + 1

    def peek():
        return toks[i] if i < len(toks) else ("end", "", end_col)

    if not toks:
        raise MapSyntaxError("empty expression", line, end_col)
    first = True
    while True:
        sign = 1.0
        kind, val, col = peek()
        if kind == "op" and val in "+-":
            sign = -1.0 if val == "-" else 1.0
            i += 1
        elif not first:
            raise MapSyntaxError(f"expected '+' or '-', got {val or 'end of line'!r}", line, col)
        first = False
        coef, exps = sign, [0] * n
        while True:
            kind, val, col = peek()
            if kind == "num":
                i += 1
                v = _literal(val, line, col)
                k2, v2, _ = peek()
                if k2 == "op" and v2 == "/":
                    i += 1
                    k3, v3, c3 = peek()
                    if k3 != "num":
                        raise MapSyntaxError("expected a number after '/'", line, c3)
                    i += 1
                    d = _literal(v3, line, c3)
                    if d == 0.0:
                        raise MapSyntaxError("division by zero in rational literal", line, c3)
                    v = v / d
                    if not math.isfinite(v):
                        raise MapSyntaxError("non-finite rational literal", line, col)
                coef *= v
            elif kind == "name":
                i += 1
                if val not in index:
                    raise MapSyntaxError(f"undeclared variable {val!r}", line, col)
                k = 1
                k2, v2, _ = peek()
                if k2 == "op" and v2 == "^":
                    i += 1
                    k3, v3, c3 = peek()
                    if k3 != "num" or not v3.isdigit() or int(v3) < 1:
                        raise MapSyntaxError("exponent must be a positive integer", line, c3)
                    i += 1
                    k = int(v3)
                exps[index[val]] += k
            else:
                raise MapSyntaxError(f"expected a coefficient or variable, got {val or 'end of line'!r}",
                                     line, col)
            kind, val, col = peek()
            if kind == "op" and val == "*":
                i += 1
                continue
            break
        key = tuple(exps)
        poly[key] = poly.get(key, 0.0) + coef
        if i >= len(toks):
            break
    return poly


def parse_map(text: str) -> PolyMap:
    """Parse a map document; like terms are merged, variables keep declaration order."""
    names: list[str] | None = None
    comps: dict[str, dict] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if names is None:
            m = re.match(r"\s*vars\s*:(.*)$", raw)
            if not m:
                raise MapSyntaxError("first line must be 'vars: v1 v2 ...'", lineno, 1)
            names = m.group(1).split()
            if not names:
                raise MapSyntaxError("no variables declared", lineno, len(raw) + 1)
            for v in names:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", v):
                    raise MapSyntaxError(f"bad variable name {v!r}", lineno, raw.index(v) + 1)
            if len(set(names)) != len(names):
                raise MapSyntaxError("duplicate variable name", lineno, 1)
            continue
        if "->" not in raw:
            raise MapSyntaxError("expected 'var -> expression'", lineno, 1)
        lhs, rhs = raw.split("->", 1)
        var = lhs.strip()
        if var not in names:
            raise MapSyntaxError(f"undeclared variable {var!r}", lineno, raw.index(var) + 1 if var else 1)
        if var in comps:
            raise MapSyntaxError(f"second definition of {var!r}", lineno, 1)
        comps[var] = _parse_expr(rhs, names, lineno, len(lhs) + 2)
    if names is None:
        raise MapSyntaxError("missing 'vars:' declaration", 1, 1)
    missing = [v for v in names if v not in comps]
    if missing:
        raise MapSyntaxError(f"no definition for {missing[0]!r}", len(text.splitlines()) + 1, 1)
    return PolyMap.from_dicts([comps[v] for v in names], names)


def _fmt_mono(exps: Sequence[int], names: Sequence[str]) -> str:
    parts = []
    for e, v in zip(exps, names):
        if e == 1:
            parts.append(v)
        elif e > 1:
            parts.append(f"{v}^{e}")
    return "*".join(parts)


def serialize_map(f: PolyMap) -> str:
    """Inverse of :func:`parse_map`; coefficients are written with ``repr``."""
    lines = ["vars: " + " ".join(f.var_names)]
    for name, comp in zip(f.var_names, f.components):
        pieces = []
        for exps, c in comp:
            mono = _fmt_mono(exps, f.var_names)
            mag = abs(c)
            if not mono:
                body = repr(mag)
            elif mag == 1.0:
                body = mono
            else:
                body = f"{mag!r}*{mono}"
            if not pieces:
                pieces.append(("-" if c < 0 else "") + body)
            else:
                pieces.append(("- " if c < 0 else "+ ") + body)
        lines.append(f"{name} -> {' '.join(pieces) if pieces else '0'}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------- analysis

def eval_map(f: PolyMap, x) -> np.ndarray:
    """Evaluate ``f`` at a point (shape ``(n,)``) or a batch (shape ``(N, n)``).

    Overflow is not trapped: escaping orbits produce inf/nan, which callers
    read as divergence.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != f.dim:
        raise ValueError(f"point has dimension {x.shape[-1]}, map has {f.dim}")
    out = np.zeros(x.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        for i, (E, C) in enumerate(f._arrays):
            acc = np.zeros(x.shape[:-1])
            for e, c in zip(E, C):
                term = np.full(x.shape[:-1], c)
                for k, ek in enumerate(e):
                    if ek:
                        term = term * x[..., k] ** int(ek)
                acc = acc + term
            out[..., i] = acc
    return out


def jacobian_at_zero(f: PolyMap) -> np.ndarray:
    """Matrix of the linear part: entry ``(i, k)`` is the coefficient of ``x_k`` in ``f_i``."""
    if not f.is_centered():
        raise NotCenteredAtOrigin(f"constant terms {f.constant_terms().tolist()} are not zero")
    J = np.zeros((f.dim, f.dim))
    for i, comp in enumerate(f.components):
        for exps, c in comp:
            if sum(exps) == 1:
                J[i, exps.index(1)] = c
    return J


def spectral_norm(A) -> float:
    """Largest singular value (Euclidean operator norm)."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def shift_to_origin(g: PolyMap, x0, tol: float | None = None) -> PolyMap:
    """Return ``f(y) = g(y + x0) - x0``, expanded exactly as a polynomial."""
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    if len(x0) != g.dim:
        raise ValueError("fixed point has the wrong dimension")
    if tol is None:
        tol = 1e-9 * (1.0 + float(np.linalg.norm(x0)))
    resid = float(np.linalg.norm(eval_map(g, x0) - x0))
    if not resid <= tol:
        raise FixedPointMismatch(resid, tol)
    if not np.any(x0):
        return g
    comps = []
    for i, comp in enumerate(g.components):
        acc: dict[tuple, float] = {}
        for exps, c in comp:
            # prod_k (y_k + x0_k)^{a_k}, expanded one variable at a time
            partial = {(): c}
            for k, a in enumerate(exps):
                nxt = {}
                for key, v in partial.items():
                    for b in range(a + 1):
                        w = v * math.comb(a, b) * x0[k] ** (a - b)
                        nk = key + (b,)
                        nxt[nk] = nxt.get(nk, 0.0) + w
                partial = nxt
            for key, v in partial.items():
                acc[key] = acc.get(key, 0.0) + v
        zero = (0,) * g.dim
        acc[zero] = acc.get(zero, 0.0) - x0[i]
        scale = 1.0 + max((abs(v) for v in acc.values()), default=0.0)
        if abs(acc[zero]) < 1e-12 * scale:
            acc[zero] = 0.0
        comps.append(acc)
    return PolyMap.from_dicts(comps, g.var_names)
