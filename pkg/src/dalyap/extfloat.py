"""Extended-exponent floating point.

Coefficients of high-degree Lyapunov embryos grow like ``r**-p`` and leave
the double range long before ``p`` reaches a few thousand, while the powers
``|x - c|**p`` they multiply shrink just as fast.  Both are held here as a
double mantissa with an unbounded integer exponent:

    value = sign * mantissa * 2**exponent,   1 <= mantissa < 2

:class:`ExtFloat` is the scalar; :class:`ExtArray` is the vectorised numpy
form used by the series kernels (signed mantissa array + int64 exponents).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Union

import numpy as np

__all__ = ["ExtFloat", "ExtArray", "ZERO_EXP"]

# exponent stored for zero entries of an ExtArray; far below any real value
ZERO_EXP = -(2**60)
# alignment shifts beyond this flush the smaller operand to zero
_MAX_SHIFT = 1100

Number = Union[int, float, "ExtFloat"]


@total_ordering
@dataclass(frozen=True, slots=True)
class ExtFloat:
    """Scalar ``sign * mantissa * 2**exponent`` in canonical form."""

    sign: int
    mantissa: float
    exponent: int

    def __post_init__(self) -> None:
        if self.sign == 0:
            if self.mantissa != 0.0 or self.exponent != 0:
                raise ValueError("zero must be stored as (0, 0.0, 0)")
        elif self.sign not in (-1, 1) or not (1.0 <= self.mantissa < 2.0):
            raise ValueError(f"non-canonical ExtFloat {self.sign}, {self.mantissa}, {self.exponent}")

    # ---------------------------------------------------------------- build
    @staticmethod
    def from_parts(m: float, e: int) -> "ExtFloat":
        """Normalise ``m * 2**e`` for an arbitrary finite double ``m``."""
        if m == 0.0:
            return _ZERO
        if not math.isfinite(m):
            raise ValueError(f"non-finite mantissa {m!r}")
        fr, de = math.frexp(abs(m))
        return ExtFloat(1 if m > 0 else -1, 2.0 * fr, int(e) + de - 1)

    @classmethod
    def from_float(cls, x: float) -> "ExtFloat":
        return cls.from_parts(float(x), 0)

    @classmethod
    def coerce(cls, x: Number) -> "ExtFloat":
        return x if isinstance(x, ExtFloat) else cls.from_float(float(x))

    @classmethod
    def from_log2(cls, log2abs: float, sign: int = 1) -> "ExtFloat":
        """Build from ``log2 |value|``; accurate to the precision of the log."""
        if sign == 0 or log2abs == -math.inf:
            return _ZERO
        e = math.floor(log2abs)
        return cls.from_parts(sign * 2.0 ** (log2abs - e), e)

    # ----------------------------------------------------------- inspection
    def is_zero(self) -> bool:
        return self.sign == 0

    def log2abs(self) -> float:
        if self.sign == 0:
            return -math.inf
        return self.exponent + math.log2(self.mantissa)

    def log(self) -> float:
        """Natural log of ``|self|``."""
        return self.log2abs() * math.log(2.0)

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.exponent > 1024:
            return self.sign * math.inf
        if self.exponent < -1100:
            return self.sign * 0.0
        return math.ldexp(self.sign * self.mantissa, self.exponent)

    def __bool__(self) -> bool:
        return self.sign != 0

    def __repr__(self) -> str:
        if self.sign == 0:
            return "ExtFloat(0)"
        if -1000 < self.exponent < 1000:
            return f"ExtFloat({float(self)!r})"
        l10 = self.log2abs() * math.log10(2.0)
        e10 = math.floor(l10)
        return f"ExtFloat({'-' if self.sign < 0 else ''}{10 ** (l10 - e10):.15g}e{e10})"

    # ----------------------------------------------------------- arithmetic
    def __neg__(self) -> "ExtFloat":
        if self.sign == 0:
            return self
        return ExtFloat(-self.sign, self.mantissa, self.exponent)

    def __abs__(self) -> "ExtFloat":
        if self.sign >= 0:
            return self
        return ExtFloat(1, self.mantissa, self.exponent)

    def __add__(self, other: Number) -> "ExtFloat":
        b = ExtFloat.coerce(other)
        a = self
        if a.sign == 0:
            return b
        if b.sign == 0:
            return a
        if a.exponent < b.exponent:
            a, b = b, a
        d = a.exponent - b.exponent
        if d > _MAX_SHIFT:
            return a
        s = a.sign * a.mantissa + math.ldexp(b.sign * b.mantissa, -d)
        return ExtFloat.from_parts(s, a.exponent)

    __radd__ = __add__

    def __sub__(self, other: Number) -> "ExtFloat":
        return self + (-ExtFloat.coerce(other))

    def __rsub__(self, other: Number) -> "ExtFloat":
        return ExtFloat.coerce(other) - self

    def __mul__(self, other: Number) -> "ExtFloat":
        b = ExtFloat.coerce(other)
        if self.sign == 0 or b.sign == 0:
            return _ZERO
        return ExtFloat.from_parts(self.sign * b.sign * self.mantissa * b.mantissa,
                                   self.exponent + b.exponent)

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> "ExtFloat":
        b = ExtFloat.coerce(other)
        if b.sign == 0:
            raise ZeroDivisionError("ExtFloat division by zero")
        if self.sign == 0:
            return _ZERO
        return ExtFloat.from_parts(self.sign * b.sign * self.mantissa / b.mantissa,
                                   self.exponent - b.exponent)

    def __rtruediv__(self, other: Number) -> "ExtFloat":
        return ExtFloat.coerce(other) / self

    def __pow__(self, k: int) -> "ExtFloat":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result, base = ExtFloat(1, 1.0, 0), self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def root(self, k: int) -> float:
        """``|self| ** (1/k)`` as a double (computed in the log domain)."""
        if self.sign == 0:
            return 0.0
        return 2.0 ** (self.log2abs() / k)

    # ----------------------------------------------------------- comparison
    def _key(self) -> tuple:
        if self.sign == 0:
            return (0, 0, 0.0)
        return (self.sign, self.sign * self.exponent, self.sign * self.mantissa)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, float)):
            other = ExtFloat.from_float(other)
        if not isinstance(other, ExtFloat):
            return NotImplemented
        return (self.sign, self.mantissa, self.exponent) == (other.sign, other.mantissa, other.exponent)

    def __lt__(self, other: Number) -> bool:
        return self._key() < ExtFloat.coerce(other)._key()

    def __hash__(self) -> int:
        return hash((self.sign, self.mantissa, self.exponent))

    # ------------------------------------------------------------ serialise
    def to_hex(self) -> str:
        return float.hex(self.mantissa)


_ZERO = ExtFloat(0, 0.0, 0)


def _normalize(m: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    fr, de = np.frexp(m)
    mant = 2.0 * fr
    exp = e + de.astype(np.int64) - 1
    return mant, np.where(mant == 0.0, ZERO_EXP, exp)


def _shift(m: np.ndarray, d: np.ndarray) -> np.ndarray:
    # d <= 0; clip keeps ldexp in int32 range and flushes far-below terms
    return np.ldexp(m, np.maximum(d, -_MAX_SHIFT).astype(np.int32))


class ExtArray:
    """Array of extended-exponent numbers (signed mantissa + int64 exponent).

    Entries with mantissa 0 are zeros and carry exponent ``ZERO_EXP``.
    """

    __slots__ = ("mant", "exp")

    def __init__(self, mant: np.ndarray, exp: np.ndarray, *, normalized: bool = False):
        mant = np.asarray(mant, dtype=np.float64)
        exp = np.asarray(exp, dtype=np.int64)
        if not normalized:
            mant, exp = _normalize(mant, np.broadcast_to(exp, mant.shape))
        self.mant = mant
        self.exp = exp

    # ---------------------------------------------------------------- build
    @classmethod
    def from_float(cls, x) -> "ExtArray":
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite value in ExtArray.from_float")
        return cls(x, np.zeros(x.shape, dtype=np.int64))

    @classmethod
    def zeros(cls, shape) -> "ExtArray":
        return cls(np.zeros(shape), np.full(shape, ZERO_EXP, dtype=np.int64), normalized=True)

    @classmethod
    def full(cls, shape, value: ExtFloat) -> "ExtArray":
        return cls(np.full(shape, value.sign * value.mantissa),
                   np.full(shape, value.exponent if value.sign else ZERO_EXP, dtype=np.int64),
                   normalized=True)

    @classmethod
    def from_scalars(cls, values: Iterable[ExtFloat]) -> "ExtArray":
        values = list(values)
        mant = np.array([v.sign * v.mantissa for v in values], dtype=np.float64)
        exp = np.array([v.exponent if v.sign else ZERO_EXP for v in values], dtype=np.int64)
        return cls(mant, exp, normalized=True)

    @classmethod
    def from_log2(cls, log2abs, sign) -> "ExtArray":
        log2abs = np.asarray(log2abs, dtype=np.float64)
        sign = np.asarray(sign, dtype=np.float64)
        finite = np.isfinite(log2abs) & (sign != 0)
        e = np.where(finite, np.floor(np.where(finite, log2abs, 0.0)), 0.0)
        m = np.where(finite, sign * np.exp2(np.where(finite, log2abs - e, 0.0)), 0.0)
        return cls(m, e.astype(np.int64))

    @classmethod
    def concatenate(cls, parts: Iterable["ExtArray"]) -> "ExtArray":
        parts = list(parts)
        return cls(np.concatenate([p.mant for p in parts]),
                   np.concatenate([p.exp for p in parts]), normalized=True)

    # ----------------------------------------------------------- container
    @property
    def shape(self) -> tuple:
        return self.mant.shape

    def __len__(self) -> int:
        return len(self.mant)

    def __getitem__(self, idx):
        m, e = self.mant[idx], self.exp[idx]
        if np.ndim(m) == 0:
            return ExtFloat.from_parts(float(m), int(e)) if m != 0 else _ZERO
        return ExtArray(m, e, normalized=True)

    def __setitem__(self, idx, value) -> None:
        if isinstance(value, ExtFloat):
            self.mant[idx] = value.sign * value.mantissa
            self.exp[idx] = value.exponent if value.sign else ZERO_EXP
        else:
            self.mant[idx] = value.mant
            self.exp[idx] = value.exp

    def copy(self) -> "ExtArray":
        return ExtArray(self.mant.copy(), self.exp.copy(), normalized=True)

    def reshape(self, *shape) -> "ExtArray":
        return ExtArray(self.mant.reshape(*shape), self.exp.reshape(*shape), normalized=True)

    def nonzero(self) -> np.ndarray:
        return self.mant != 0.0

    def to_scalars(self) -> list[ExtFloat]:
        return [self[i] for i in range(len(self))]

    # ----------------------------------------------------------- arithmetic
    def __neg__(self) -> "ExtArray":
        return ExtArray(-self.mant, self.exp, normalized=True)

    def __abs__(self) -> "ExtArray":
        return ExtArray(np.abs(self.mant), self.exp, normalized=True)

    def __mul__(self, other) -> "ExtArray":
        if isinstance(other, ExtArray):
            return ExtArray(self.mant * other.mant, self.exp + other.exp)
        b = ExtFloat.coerce(other)
        if b.sign == 0:
            return ExtArray.zeros(self.shape)
        return ExtArray(self.mant * (b.sign * b.mantissa), self.exp + b.exponent)

    __rmul__ = __mul__

    def __add__(self, other) -> "ExtArray":
        if not isinstance(other, ExtArray):
            other = ExtArray.full(self.shape, ExtFloat.coerce(other))
        e = np.maximum(self.exp, other.exp)
        m = _shift(self.mant, self.exp - e) + _shift(other.mant, other.exp - e)
        return ExtArray(m, e)

    __radd__ = __add__

    def __sub__(self, other) -> "ExtArray":
        return self + (-other)

    def iadd_at(self, idx, other: "ExtArray") -> None:
        """In-place ``self[idx] += other`` for a slice or unique index array."""
        e0, m0 = self.exp[idx], self.mant[idx]
        e = np.maximum(e0, other.exp)
        m = _shift(m0, e0 - e) + _shift(other.mant, other.exp - e)
        mant, exp = _normalize(m, e)
        self.mant[idx] = mant
        self.exp[idx] = exp

    # ----------------------------------------------------------- reduction
    def sum(self, axis=None):
        """Aligned sum; fixed (numpy pairwise) order, so deterministic.

        Returns an ExtFloat for a full reduction, otherwise an ExtArray.
        """
        if self.mant.size == 0:
            return _ZERO if axis is None else ExtArray.zeros(np.sum(self.mant, axis=axis).shape)
        E = np.max(self.exp, axis=axis, keepdims=True)
        s = np.sum(_shift(self.mant, self.exp - E), axis=axis, keepdims=True)
        if axis is None:
            return ExtFloat.from_parts(float(s.reshape(-1)[0]), int(E.reshape(-1)[0])) \
                if s.reshape(-1)[0] != 0 else _ZERO
        return ExtArray(np.squeeze(s, axis=axis), np.squeeze(E, axis=axis))

    def max_abs(self) -> ExtFloat:
        if self.mant.size == 0 or not np.any(self.mant):
            return _ZERO
        la = self.log2abs()
        i = int(np.argmax(la))
        return abs(self[i])

    # ----------------------------------------------------------- conversion
    def log2abs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.mant != 0.0, self.exp + np.log2(np.abs(self.mant)), -np.inf)

    def sign(self) -> np.ndarray:
        return np.sign(self.mant)

    def to_float(self) -> np.ndarray:
        """Convert to doubles; overflow gives +-inf, underflow gives 0."""
        e = np.clip(self.exp, -1200, 1100).astype(np.int32)
        with np.errstate(over="ignore"):
            return np.ldexp(self.mant, e)

    def __repr__(self) -> str:
        return f"ExtArray(shape={self.shape})"
