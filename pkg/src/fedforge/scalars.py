"""Exact Gaussian rationals ``a + b*i`` with ``a, b`` in Q."""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational

from gmpy2 import mpq

__all__ = ["GaussianRational", "ZERO", "ONE", "I", "as_scalar", "parse_scalar"]


def _q(value) -> mpq:
    if isinstance(value, mpq):
        return value
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, (int, Rational)):
        return mpq(value)
    if isinstance(value, str):
        return mpq(value.strip())
    raise TypeError(f"cannot coerce {value!r} to an exact rational")


def _fmt_q(q: mpq) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


class GaussianRational:
    """Element of Q[i]; immutable, hashable, always reduced (mpq normalizes)."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", _q(re))
        object.__setattr__(self, "im", _q(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    @classmethod
    def _raw(cls, re: mpq, im: mpq) -> "GaussianRational":
        obj = object.__new__(cls)
        object.__setattr__(obj, "re", re)
        object.__setattr__(obj, "im", im)
        return obj

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def __eq__(self, other) -> bool:
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Rational, type(mpq()))):
            return self.im == 0 and self.re == other
        if isinstance(other, complex):
            return self.re == other.real and self.im == other.imag
        return NotImplemented

    def __hash__(self) -> int:
        if self.im == 0:
            return hash(Fraction(int(self.re.numerator), int(self.re.denominator)))
        return hash((self.re, self.im))

    def __repr__(self) -> str:
        return f"GaussianRational({_fmt_q(self.re)!r}, {_fmt_q(self.im)!r})"

    def __str__(self) -> str:
        return self.render()

    def render(self) -> str:
        """``p/q``, ``r/s*i`` or ``p/q+r/s*i`` (the fixture format)."""
        if self.im == 0:
            return _fmt_q(self.re)
        im = "i" if self.im == 1 else ("-i" if self.im == -1 else f"{_fmt_q(self.im)}*i")
        if self.re == 0:
            return im
        sign = "" if im.startswith("-") else "+"
        return f"{_fmt_q(self.re)}{sign}{im}"

    def __add__(self, other):
        o = _operand(other)
        if o is None:
            return NotImplemented
        return GaussianRational._raw(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = _operand(other)
        if o is None:
            return NotImplemented
        return GaussianRational._raw(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = _operand(other)
        return NotImplemented if o is None else o - self

    def __neg__(self):
        return GaussianRational._raw(-self.re, -self.im)

    def __mul__(self, other):
        if not isinstance(other, GaussianRational):
            if isinstance(other, int):
                return GaussianRational._raw(self.re * other, self.im * other)
            other = _operand(other)
            if other is None:
                return NotImplemented
        a, b, c, d = self.re, self.im, other.re, other.im
        if b == 0:
            return GaussianRational._raw(a * c, a * d)
        if d == 0:
            return GaussianRational._raw(a * c, b * c)
        return GaussianRational._raw(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def conjugate(self) -> "GaussianRational":
        return GaussianRational._raw(self.re, -self.im)

    def __truediv__(self, other):
        o = _operand(other)
        if o is None:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conjugate()
        return GaussianRational._raw(num.re / den, num.im / den)

    def __rtruediv__(self, other):
        return as_scalar(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("only integer powers")
        if k < 0:
            return ONE / (self ** (-k))
        out = ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def is_real(self) -> bool:
        return self.im == 0


def _operand(value):
    try:
        return as_scalar(value)
    except TypeError:
        return None


def as_scalar(value) -> GaussianRational:
    if isinstance(value, GaussianRational):
        return value
    if isinstance(value, complex):
        return GaussianRational(Fraction(value.real), Fraction(value.imag))
    return GaussianRational._raw(_q(value), mpq(0))


_SCALAR_RE = re.compile(
    r"""^\s*
    (?:(?P<re>[+-]?\d+(?:/\d+)?)(?!\s*\*?\s*i))?
    \s*
    (?:(?P<im>[+-]?\s*(?:\d+(?:/\d+)?)?)\s*\*?\s*i)?
    \s*$""",
    re.VERBOSE,
)


def parse_scalar(text: str) -> GaussianRational:
    """Parse ``"p/q"``, ``"p/q+r/s i"``, ``"r/s*i"``, ``"-i"`` and similar."""
    m = _SCALAR_RE.match(text)
    if not m or (m.group("re") is None and m.group("im") is None):
        raise ValueError(f"malformed coefficient {text!r}")
    re_part = mpq(m.group("re").lstrip("+")) if m.group("re") else mpq(0)
    im_txt = m.group("im")
    if im_txt is None:
        im_part = mpq(0)
    else:
        im_txt = im_txt.replace(" ", "")
        if im_txt in ("", "+"):
            im_part = mpq(1)
        elif im_txt == "-":
            im_part = mpq(-1)
        else:
            im_part = mpq(im_txt.lstrip("+"))
    return GaussianRational._raw(re_part, im_part)


ZERO = GaussianRational(0, 0)
ONE = GaussianRational(1, 0)
I = GaussianRational(0, 1)
