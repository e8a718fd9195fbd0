"""Exact complex rationals (Gaussian rationals) used as symbol coefficients."""
from fractions import Fraction
from numbers import Rational


def _frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


class CQ:
    """Immutable ``re + i*im`` with ``Fraction`` parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", _frac(re))
        object.__setattr__(self, "im", _frac(im))

    def __setattr__(self, name, value):
        raise AttributeError("CQ is immutable")

    @classmethod
    def coerce(cls, x):
        if isinstance(x, CQ):
            return x
        if isinstance(x, complex):
            raise TypeError("floating complex values are not exact; pass CQ")
        return cls(x, 0)

    def __add__(self, other):
        o = CQ.coerce(other)
        return CQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return CQ(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-CQ.coerce(other))

    def __rsub__(self, other):
        return CQ.coerce(other) - self

    def __mul__(self, other):
        o = CQ.coerce(other)
        return CQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = CQ.coerce(other)
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("CQ division by zero")
        return CQ((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, other):
        return CQ.coerce(other) / self

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out, base = CQ(1), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conj(self):
        return CQ(self.re, -self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = CQ.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"CQ({self.re}, {self.im})"


I = CQ(0, 1)
ONE = CQ(1)
ZERO = CQ(0)

# i**k for k mod 4
I_POWERS = (CQ(1), CQ(0, 1), CQ(-1), CQ(0, -1))
