"""Extended-precision real scalars and the one hard primitive everything rests on:
evaluating exp(u) modulo 2*pi with a certified absolute error when exp(u) is
astronomically large.

Arithmetic is backed by MPFR (via gmpy2): every operation is correctly rounded,
so a result at precision P carries relative error at most 2**-P, well inside
the documented 2**(1-P) contract.  A ``BigReal`` is an immutable (value,
precision) pair; the stored value is an exact dyadic rational and comparisons
compare those exact values.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

__all__ = [
    "BigReal",
    "Frac",
    "PrecisionOverflow",
    "exp_mod_2pi",
    "required_bits",
    "precision_ceiling",
]

DEFAULT_PRECISION = 128
DEFAULT_CEILING = 1 << 22
SAFETY_MARGIN_BITS = 32

_number = (int, float, Fraction, type(mpfr(0)))


class PrecisionOverflow(RuntimeError):
    """Required working precision exceeds the configured ceiling."""


def precision_ceiling() -> int:
    """Precision ceiling in bits; override with EXPEXP_PRECISION_CEILING."""
    raw = os.environ.get("EXPEXP_PRECISION_CEILING")
    if raw is None:
        return DEFAULT_CEILING
    try:
        v = int(raw)
    except ValueError as exc:
        raise ValueError(f"EXPEXP_PRECISION_CEILING must be an integer, got {raw!r}") from exc
    if v < 64:
        raise ValueError("EXPEXP_PRECISION_CEILING must be at least 64")
    return v


def _ctx(prec: int):
    return gmpy2.context(precision=prec)


class BigReal:
    """Immutable arbitrary-precision real: exact dyadic value + declared precision.

    Arithmetic operators return a BigReal at the larger operand precision,
    correctly rounded (relative error <= 2**-P).  Comparisons are exact on the
    stored representations.  Instances are safe to share across threads.
    """

    __slots__ = ("_v", "_prec")

    def __init__(self, value, precision_bits: int | None = None):
        if isinstance(value, BigReal):
            prec = precision_bits or value._prec
            self._v = mpfr(value._v, prec)
            self._prec = prec
            return
        prec = precision_bits or DEFAULT_PRECISION
        if prec < 2:
            raise ValueError("precision_bits must be >= 2")
        if isinstance(value, str):
            with _ctx(prec):
                self._v = mpfr(value)
        elif isinstance(value, Fraction):
            with _ctx(prec):
                self._v = mpfr(gmpy2.mpq(value.numerator, value.denominator))
        elif isinstance(value, _number):
            self._v = mpfr(value, prec)
        else:
            raise TypeError(f"cannot build BigReal from {type(value).__name__}")
        if not gmpy2.is_finite(self._v):
            raise ValueError(f"BigReal must be finite, got {self._v}")
        self._prec = prec

    # -- construction helpers -------------------------------------------------

    @classmethod
    def _wrap(cls, raw: mpfr, prec: int) -> "BigReal":
        out = object.__new__(cls)
        out._v = raw
        out._prec = prec
        return out

    @classmethod
    def pi(cls, precision_bits: int) -> "BigReal":
        with _ctx(precision_bits):
            return cls._wrap(gmpy2.const_pi(), precision_bits)

    @classmethod
    def log2(cls, precision_bits: int) -> "BigReal":
        with _ctx(precision_bits):
            return cls._wrap(gmpy2.log(mpfr(2)), precision_bits)

    @classmethod
    def exp2(cls, e: int) -> "BigReal":
        """Exact power of two 2**e."""
        return cls._wrap(mpfr(gmpy2.mpfr(2)) ** e, max(2, DEFAULT_PRECISION))

    # -- representation -------------------------------------------------------

    @property
    def precision_bits(self) -> int:
        return self._prec

    @property
    def mantissa(self) -> int:
        m, _ = self._v.as_mantissa_exp()
        return int(m)

    @property
    def exponent(self) -> int:
        _, e = self._v.as_mantissa_exp()
        return int(e)

    def raw(self) -> mpfr:
        """Underlying mpfr (immutable); for interop inside this package."""
        return self._v

    def with_precision(self, precision_bits: int) -> "BigReal":
        return BigReal(self, precision_bits)

    def as_fraction(self) -> Fraction:
        m, e = self._v.as_mantissa_exp()
        return Fraction(int(m)) * Fraction(2) ** int(e)

    def __float__(self) -> float:
        return float(self._v)

    def __int__(self) -> int:
        return int(self._v)

    def digits(self) -> int:
        # enough decimal digits to round-trip the stored value
        return int(self._prec * 0.30103) + 3

    def decimal(self) -> str:
        return mpfr_decimal(self._v, self._prec)

    def __str__(self) -> str:
        return self.decimal()

    def __repr__(self) -> str:
        return f"BigReal('{self.decimal()}', {self._prec})"

    def __hash__(self):
        return hash((self.mantissa, self.exponent))

    # -- exact comparisons ----------------------------------------------------

    def _cmp_other(self, other):
        if isinstance(other, BigReal):
            return other._v
        if isinstance(other, _number):
            return other
        return NotImplemented

    def __eq__(self, other):
        o = self._cmp_other(other)
        return NotImplemented if o is NotImplemented else self._v == o

    def __lt__(self, other):
        o = self._cmp_other(other)
        return NotImplemented if o is NotImplemented else self._v < o

    def __le__(self, other):
        o = self._cmp_other(other)
        return NotImplemented if o is NotImplemented else self._v <= o

    def __gt__(self, other):
        o = self._cmp_other(other)
        return NotImplemented if o is NotImplemented else self._v > o

    def __ge__(self, other):
        o = self._cmp_other(other)
        return NotImplemented if o is NotImplemented else self._v >= o

    # -- arithmetic (correctly rounded at max operand precision) --------------

    def _bin(self, other, fn):
        if isinstance(other, BigReal):
            prec = max(self._prec, other._prec)
            o = other._v
        elif isinstance(other, _number):
            prec = self._prec
            o = other
        else:
            return NotImplemented
        with _ctx(prec):
            return BigReal._wrap(fn(self._v, o), prec)

    def __add__(self, other):
        return self._bin(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._bin(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._bin(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._bin(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._bin(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._bin(other, lambda a, b: b / a)

    def __neg__(self):
        return BigReal._wrap(-self._v, self._prec)

    def __abs__(self):
        return BigReal._wrap(abs(self._v), self._prec)

    def __pow__(self, e: int):
        with _ctx(self._prec):
            return BigReal._wrap(self._v ** e, self._prec)

    # -- transcendental, correctly rounded at own precision -------------------

    def _un(self, fn, prec=None):
        prec = prec or self._prec
        with _ctx(prec):
            return BigReal._wrap(fn(self._v), prec)

    def exp(self, precision_bits: int | None = None) -> "BigReal":
        return self._un(gmpy2.exp, precision_bits)

    def log(self, precision_bits: int | None = None) -> "BigReal":
        return self._un(gmpy2.log, precision_bits)

    def sin(self, precision_bits: int | None = None) -> "BigReal":
        return self._un(gmpy2.sin, precision_bits)

    def cos(self, precision_bits: int | None = None) -> "BigReal":
        return self._un(gmpy2.cos, precision_bits)

    def sqrt(self, precision_bits: int | None = None) -> "BigReal":
        return self._un(gmpy2.sqrt, precision_bits)

    def atan2(self, x: "BigReal", precision_bits: int | None = None) -> "BigReal":
        prec = precision_bits or max(self._prec, x._prec)
        with _ctx(prec):
            return BigReal._wrap(gmpy2.atan2(self._v, x._v), prec)

    def is_zero(self) -> bool:
        return self._v == 0


def mpfr_decimal(v: mpfr, prec: int) -> str:
    """Decimal string with enough digits to round-trip prec bits."""
    ndig = int(prec * 0.30103) + 3
    ds, exp, _ = v.digits(10, ndig)
    neg = ds.startswith("-")
    if neg:
        ds = ds[1:]
    if not ds.strip("0"):
        return "0.0e+00"
    mant = ds[0] + "." + (ds[1:] or "0")
    return f"{'-' if neg else ''}{mant}e{exp - 1:+03d}"


# -- cached 2*pi --------------------------------------------------------------

_twopi_lock = threading.Lock()
_twopi_cache: mpfr | None = None
_twopi_prec = 0


def twopi(precision_bits: int) -> mpfr:
    """2*pi at >= precision_bits, grown lazily to the maximum width seen."""
    global _twopi_cache, _twopi_prec
    if _twopi_prec >= precision_bits:
        return _twopi_cache
    with _twopi_lock:
        if _twopi_prec < precision_bits:
            with _ctx(precision_bits):
                _twopi_cache = 2 * gmpy2.const_pi()
            _twopi_prec = precision_bits
    return _twopi_cache


# -- the certified primitive ---------------------------------------------------

def _ceil_div_ln2(u_num: float) -> int:
    """ceil(u / ln 2) for u > 0, safe against rounding of ln 2."""
    # 128-bit directed evaluation; ln2 rounded down makes the quotient an
    # upper estimate, so ceil never comes out low.
    with gmpy2.context(precision=128, round=gmpy2.RoundDown):
        ln2 = gmpy2.log(mpfr(2))
    with gmpy2.context(precision=128, round=gmpy2.RoundUp):
        q = mpfr(u_num) / ln2
    return int(gmpy2.ceil(q))


def required_bits(u, guard_bits: int) -> int:
    """Working precision that certifies exp_mod_2pi(u, guard_bits).

    ceil(max(u,0)/ln 2) + guard_bits + 32.  The fixed 32-bit margin absorbs
    the handful of rounding steps (one exp, one reduction, one division).
    Nondecreasing in u and in guard_bits.
    """
    if guard_bits < 1:
        raise ValueError("guard_bits must be positive")
    uv = u.raw() if isinstance(u, BigReal) else mpfr(u)
    if not gmpy2.is_finite(uv):
        raise ValueError("u must be finite")
    lead = 0 if uv <= 0 else _ceil_div_ln2(uv)
    return lead + guard_bits + SAFETY_MARGIN_BITS


@dataclass(frozen=True)
class Frac:
    """A residue in [0,1) with a certified absolute error bound.

    The bound must stay below 2**-8; a wider bound means the producing
    computation must be rerun at higher precision.
    """

    value: BigReal
    error_bound: BigReal

    def __post_init__(self):
        if not (0 <= self.value and self.value < 1):
            raise ValueError(f"Frac value {self.value} outside [0,1)")
        if self.error_bound < 0:
            raise ValueError("error_bound must be >= 0")
        if not self.error_bound < BigReal(Fraction(1, 256), 32):
            raise ValueError(
                f"error bound {float(self.error_bound):.3e} >= 2^-8; rerun at higher precision"
            )

    def __float__(self) -> float:
        return float(self.value)

    def circular_distance(self, other) -> float:
        """Distance on the circle, computed at full precision before the final
        float conversion (tiny margins survive; floats reach down to 2^-1022)."""
        prec = max(self.value.precision_bits, 64)
        with _ctx(prec):
            if isinstance(other, Frac):
                o = other.value.raw()
            elif isinstance(other, BigReal):
                o = other.raw()
            elif isinstance(other, Fraction):
                o = mpfr(gmpy2.mpq(other.numerator, other.denominator))
            else:
                o = mpfr(other)
            d = abs(self.value.raw() - o)
            d = gmpy2.fmod(d, mpfr(1))
            return float(min(d, 1 - d))

    def complement(self) -> "Frac":
        """Residue of the negated point: 1 - value (0 stays 0)."""
        if self.value.is_zero():
            return self
        return Frac(BigReal._wrap(1 - self.value.raw(), self.value.precision_bits),
                    self.error_bound)


def exp_mod_2pi(u, guard_bits: int = 48) -> Frac:
    """{exp(u) / 2pi} with absolute error at most 2**-guard_bits.

    u is taken as the exact dyadic rational it stores.  Working precision is
    selected by required_bits; raises PrecisionOverflow above the ceiling.
    """
    if guard_bits < 16:
        raise ValueError("guard_bits must be >= 16")
    prec = required_bits(u, guard_bits)
    ceiling = precision_ceiling()
    if prec > ceiling:
        raise PrecisionOverflow(
            f"exp_mod_2pi needs {prec} bits for u~{float(u.raw() if isinstance(u, BigReal) else u):.6g}, "
            f"ceiling is {ceiling}"
        )
    uv = u.raw() if isinstance(u, BigReal) else mpfr(u)
    tp = twopi(prec)
    with _ctx(prec):
        w = gmpy2.exp(uv)
        s = gmpy2.fmod(w, tp)
        if s < 0:
            s += tp
        f = s / tp
        if f >= 1:
            f = mpfr(0)
    # one exp + one fmod + one division, each <= 1 ulp of a value <= e^u:
    # absolute error <= 2^(ceil(u/ln2) + 3 - prec) = 2^(3 - guard - 32)
    err = BigReal._wrap(mpfr(2) ** (3 - guard_bits - SAFETY_MARGIN_BITS), 32)
    return Frac(BigReal._wrap(f, prec), err)
