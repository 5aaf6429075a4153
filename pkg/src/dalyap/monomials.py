"""Graded-lex enumeration and ranking of exponent multi-indices."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def layer_exponents(n: int, m: int) -> np.ndarray:
    """All ``j`` with ``|j| = m``, in graded-lex order: ``(m,0,..)`` first."""
    if n == 1:
        return np.array([[m]], dtype=np.int64)
    rows = []
    for a in range(m, -1, -1):
        sub = layer_exponents(n - 1, m - a)
        rows.append(np.column_stack([np.full(len(sub), a, dtype=np.int64), sub]))
    return np.vstack(rows)


def grlex_order(exps: np.ndarray) -> np.ndarray:
    """Permutation sorting rows of ``exps`` by degree, then lex-descending."""
    exps = np.asarray(exps)
    if len(exps) == 0:
        return np.zeros(0, dtype=np.int64)
    keys = [-exps[:, i] for i in range(exps.shape[1] - 1, -1, -1)]
    keys.append(exps.sum(axis=1))
    return np.lexsort(keys)


class MonomialIndex:
    """Flat graded-lex numbering of all monomials of degree ``<= p``."""

    def __init__(self, n: int, p: int):
        self.n = n
        self.p = p
        layers = [layer_exponents(n, m) for m in range(p + 1)]
        self.offsets = np.zeros(p + 2, dtype=np.int64)
        self.offsets[1:] = np.cumsum([len(layer) for layer in layers])
        self.exps = np.vstack(layers)
        self.degree = self.exps.sum(axis=1)
        self.size = len(self.exps)
        self._radix = (p + 1) ** np.arange(n, dtype=np.int64)
        keys = self.exps @ self._radix
        self._sorter = np.argsort(keys)
        self._sorted_keys = keys[self._sorter]

    def layer(self, m: int) -> slice:
        return slice(int(self.offsets[m]), int(self.offsets[m + 1]))

    def rank(self, exps: np.ndarray) -> np.ndarray:
        """Flat indices of the given exponent rows (all must have degree <= p)."""
        exps = np.atleast_2d(np.asarray(exps, dtype=np.int64))
        if exps.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        if np.any(exps < 0) or np.any(exps.sum(axis=1) > self.p):
            raise IndexError("exponent outside the index")
        keys = exps @ self._radix
        pos = np.searchsorted(self._sorted_keys, keys)
        return self._sorter[pos]

    def shift_map(self, a) -> tuple[np.ndarray, np.ndarray]:
        """``(src, dst)`` with ``exps[dst] = exps[src] + a`` for all fitting ``src``."""
        a = np.asarray(a, dtype=np.int64)
        src = np.nonzero(self.degree + a.sum() <= self.p)[0]
        dst = self.rank(self.exps[src] + a)
        return src, dst


@lru_cache(maxsize=16)
def monomial_index(n: int, p: int) -> MonomialIndex:
    return MonomialIndex(n, p)
