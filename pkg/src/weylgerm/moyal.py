"""Exact Weyl algebra on polynomial phase-space symbols.

Symbols are polynomials in ``q1..qn, p1..pn`` whose coefficients are
polynomials in a formal Planck constant ``h`` with exact complex-rational
coefficients.  The Moyal product is evaluated in closed form (the
bidifferential series terminates on polynomials), so associativity and
commutator identities hold exactly.

Two sign conventions are supported:

* ``"operator"`` (default): ``q*p - p*q = i h``, matching ``p = -i h d/dq``.
* ``"paper"``: the opposite sign, ``q*p - p*q = -i h``.

The Poisson bracket is normalised to ``{q, p} = 1`` in both.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from ._cq import CQ, I_POWERS
from .errors import ParseError

__all__ = [
    "PolySymbol",
    "ExpLinear",
    "OmegaConvention",
    "CONVENTIONS",
    "poisson",
    "star",
    "commutator",
    "star_exp_linear",
    "weyl_order_polynomial",
    "parse_symbol",
    "format_symbol",
]

CONVENTIONS = ("operator", "paper")
MAX_N = 8
MAX_DEGREE = 64


def _sign(convention: str) -> int:
    if convention == "operator":
        return 1
    if convention == "paper":
        return -1
    raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


@dataclass(frozen=True)
class OmegaConvention:
    """Sign of the symplectic tensor used by the star product.

    ``omega(i, j, n)`` returns the entry ``w^{ij}`` for phase-space
    coordinates ordered ``(q1..qn, p1..pn)``.
    """

    sign: str = "operator"

    def __post_init__(self):
        _sign(self.sign)

    @property
    def s(self) -> int:
        return _sign(self.sign)

    def omega(self, i: int, j: int, n: int) -> int:
        base = int(i == j - n) - int(i - n == j)
        # star(f, g) = exp(-(i h / 2) w^{ij} d_i d'_j) with this w
        return -base if self.sign == "operator" else base


class PolySymbol:
    """Polynomial symbol in ``(q, p)`` with coefficients polynomial in ``h``.

    ``terms`` maps ``(exponents, h_power)`` to a nonzero :class:`CQ`, where
    ``exponents`` is a length-``2n`` tuple ordered ``(q1..qn, p1..pn)``.
    """

    __slots__ = ("n", "_terms", "_hash")

    def __init__(self, n: int, terms: Mapping | Iterable = ()):
        if not 1 <= n <= MAX_N:
            raise ValueError(f"n must be in 1..{MAX_N}, got {n}")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for (exps, hp), c in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != 2 * n:
                raise ValueError(f"exponent vector {exps} has wrong length for n={n}")
            if any(e < 0 for e in exps) or hp < 0:
                raise ValueError("exponents must be non-negative")
            if any(e > MAX_DEGREE for e in exps):
                raise ValueError(f"degree per variable above {MAX_DEGREE} rejected")
            key = (exps, int(hp))
            acc[key] = acc.get(key, CQ(0)) + CQ.coerce(c)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "_terms", {k: v for k, v in acc.items() if v})
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("PolySymbol is immutable")

    # constructors -----------------------------------------------------
    @classmethod
    def zero(cls, n: int = 1) -> PolySymbol:
        return cls(n)

    @classmethod
    def const(cls, c, n: int = 1) -> PolySymbol:
        return cls(n, {((0,) * (2 * n), 0): c})

    @classmethod
    def q(cls, i: int = 1, n: int = 1) -> PolySymbol:
        e = [0] * (2 * n)
        e[i - 1] = 1
        return cls(n, {(tuple(e), 0): 1})

    @classmethod
    def p(cls, i: int = 1, n: int = 1) -> PolySymbol:
        e = [0] * (2 * n)
        e[n + i - 1] = 1
        return cls(n, {(tuple(e), 0): 1})

    @classmethod
    def h(cls, n: int = 1) -> PolySymbol:
        return cls(n, {((0,) * (2 * n), 1): 1})

    @classmethod
    def monomial(cls, qexps: Sequence[int], pexps: Sequence[int], coef=1, hpow: int = 0) -> PolySymbol:
        n = len(qexps)
        return cls(n, {(tuple(qexps) + tuple(pexps), hpow): coef})

    # access -----------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        """Total degree in the phase-space variables (``-1`` for zero)."""
        return max((sum(e) for e, _ in self._terms), default=-1)

    def hbar_degree(self) -> int:
        return max((hp for _, hp in self._terms), default=-1)

    def hbar_order(self) -> int:
        """Lowest power of ``h`` present (``-1`` for zero)."""
        return min((hp for _, hp in self._terms), default=-1)

    def hbar_part(self, k: int) -> PolySymbol:
        return PolySymbol(self.n, {(e, 0): c for (e, hp), c in self._terms.items() if hp == k})

    def embed(self, n: int) -> PolySymbol:
        """Same symbol viewed in ``n >= self.n`` degrees of freedom."""
        if n < self.n:
            raise ValueError("cannot embed into fewer degrees of freedom")
        pad = (0,) * (n - self.n)
        return PolySymbol(n, {(e[: self.n] + pad + e[self.n:] + pad, hp): c
                              for (e, hp), c in self._terms.items()})

    # arithmetic -------------------------------------------------------
    def _check(self, other: PolySymbol):
        if not isinstance(other, PolySymbol):
            raise TypeError(f"expected PolySymbol, got {type(other).__name__}")
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: n={self.n} vs n={other.n}")

    def _lift(self, other):
        if isinstance(other, PolySymbol):
            self._check(other)
            return other
        return PolySymbol.const(CQ.coerce(other), self.n)

    def __add__(self, other):
        o = self._lift(other)
        return PolySymbol(self.n, list(self._terms.items()) + list(o._terms.items()))

    __radd__ = __add__

    def __neg__(self):
        return PolySymbol(self.n, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        """Commutative (pointwise) product."""
        if not isinstance(other, PolySymbol):
            c = CQ.coerce(other)
            return PolySymbol(self.n, {k: v * c for k, v in self._terms.items()})
        self._check(other)
        out = []
        for (e1, h1), c1 in self._terms.items():
            for (e2, h2), c2 in other._terms.items():
                out.append(((tuple(a + b for a, b in zip(e1, e2)), h1 + h2), c1 * c2))
        return PolySymbol(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = PolySymbol.const(1, self.n)
        for _ in range(k):
            out = out * self
        return out

    def conj(self) -> PolySymbol:
        """Complex conjugation of coefficients (``h`` is real)."""
        return PolySymbol(self.n, {k: v.conj() for k, v in self._terms.items()})

    def diff(self, var: int) -> PolySymbol:
        """Derivative along phase-space coordinate ``var`` (0-based, q's first)."""
        out = []
        for (e, hp), c in self._terms.items():
            if e[var]:
                e2 = list(e)
                e2[var] -= 1
                out.append(((tuple(e2), hp), c * e[var]))
        return PolySymbol(self.n, out)

    def __eq__(self, other):
        if not isinstance(other, PolySymbol):
            if isinstance(other, (int, Fraction, CQ)):
                return self == PolySymbol.const(other, self.n)
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.n, frozenset(self._terms.items()))))
        return self._hash

    # numerics ---------------------------------------------------------
    def numeric_terms(self, hbar: float) -> list:
        """``[(exponents, complex coefficient)]`` with ``h`` substituted."""
        acc: dict = {}
        for (e, hp), c in self._terms.items():
            acc[e] = acc.get(e, 0j) + complex(c) * hbar ** hp
        return [(e, c) for e, c in acc.items() if c != 0]

    def __call__(self, q, p, hbar: float):
        """Evaluate at phase-space point(s); ``q``/``p`` are length-``n`` sequences."""
        q = [q] if self.n == 1 and not hasattr(q, "__len__") else list(q)
        p = [p] if self.n == 1 and not hasattr(p, "__len__") else list(p)
        total = 0j
        for e, c in self.numeric_terms(hbar):
            term = c
            for k in range(self.n):
                term = term * q[k] ** e[k] * p[k] ** e[self.n + k]
            total = total + term
        return total

    def __repr__(self):
        return f"PolySymbol({format_symbol(self)!r}, n={self.n})"

    def __str__(self):
        return format_symbol(self)


# ---------------------------------------------------------------------
# brackets and products


def poisson(f: PolySymbol, g: PolySymbol) -> PolySymbol:
    """Poisson bracket with ``{q_i, p_i} = 1``."""
    f._check(g)
    n = f.n
    out = PolySymbol.zero(n)
    for i in range(n):
        out = out + f.diff(i) * g.diff(n + i) - f.diff(n + i) * g.diff(i)
    return out


def _falling(x: int, r: int) -> int:
    return math.perm(x, r) if r <= x else 0


@lru_cache(maxsize=200_000)
def _star1(a: int, b: int, c: int, d: int, s: int) -> tuple:
    """``(q^a p^b) * (q^c p^d)`` in one degree of freedom.

    Returns ``((k, coefficient), ...)``: the order-``k`` term is
    ``coefficient * h^k * q^(a+c-k) p^(b+d-k)``.
    """
    out = []
    for k in range(min(a + b, c + d) + 1):
        acc = 0
        for j in range(k + 1):
            acc += (math.comb(k, j) * (-1) ** j * _falling(a, k - j) * _falling(b, j)
                    * _falling(d, k - j) * _falling(c, j))
        if acc:
            # (i s / 2)^k / k!
            coef = I_POWERS[k % 4] * Fraction(acc * s ** k, 2 ** k * math.factorial(k))
            out.append((k, coef))
    return tuple(out)


def star(f: PolySymbol, g: PolySymbol, convention: str = "operator") -> PolySymbol:
    """Moyal product ``f * g`` evaluated exactly.

    The bidifferential operator factorises over conjugate pairs
    ``(q_i, p_i)``, so monomial products reduce to cached one-dimensional
    tables.
    """
    f._check(g)
    s = _sign(convention)
    n = f.n
    acc: dict = {}
    for (e1, h1), c1 in f._terms.items():
        for (e2, h2), c2 in g._terms.items():
            partial = {((), 0): c1 * c2}
            for i in range(n):
                table = _star1(e1[i], e1[n + i], e2[i], e2[n + i], s)
                qsum, psum = e1[i] + e2[i], e1[n + i] + e2[n + i]
                nxt: dict = {}
                for (qp, hp), c in partial.items():
                    for k, ck in table:
                        key = (qp + ((qsum - k, psum - k),), hp + k)
                        nxt[key] = nxt.get(key, CQ(0)) + c * ck
                partial = nxt
            for (qp, hp), c in partial.items():
                exps = tuple(x for x, _ in qp) + tuple(y for _, y in qp)
                key = (exps, hp + h1 + h2)
                acc[key] = acc.get(key, CQ(0)) + c
    return PolySymbol(n, acc)


def commutator(f: PolySymbol, g: PolySymbol, convention: str = "operator") -> PolySymbol:
    return star(f, g, convention) - star(g, f, convention)


# ---------------------------------------------------------------------
# exponentials of linear forms


@dataclass(frozen=True)
class ExpLinear:
    """``scalar * exp((i/h) * phase) * exp((i/h) * (a.p + b.q))``.

    ``phase`` is an exact rational; the central factor of the Heisenberg
    group multiplication lands there, so products stay exact.
    """

    n: int
    a: tuple
    b: tuple
    scalar: CQ = CQ(1)
    phase: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(Fraction(x) for x in self.a))
        object.__setattr__(self, "b", tuple(Fraction(x) for x in self.b))
        object.__setattr__(self, "scalar", CQ.coerce(self.scalar))
        object.__setattr__(self, "phase", Fraction(self.phase))
        if len(self.a) != self.n or len(self.b) != self.n:
            raise ValueError("a and b must have length n")
        if not self.scalar:
            raise ValueError("ExpLinear scalar must be nonzero")

    @classmethod
    def one(cls, n: int = 1) -> ExpLinear:
        return cls(n, (0,) * n, (0,) * n)

    def value(self, q, p, hbar: float) -> complex:
        import cmath

        lin = sum(float(ai) * pi for ai, pi in zip(self.a, p)) + sum(float(bi) * qi for bi, qi in zip(self.b, q))
        return complex(self.scalar) * cmath.exp(1j * (float(self.phase) + lin) / hbar)


def star_exp_linear(u: ExpLinear, v: ExpLinear, convention: str = "operator") -> ExpLinear:
    """Heisenberg-group product ``e^X * e^Y = e^(X+Y) e^([X,Y]/2)``."""
    if u.n != v.n:
        raise ValueError(f"dimension mismatch: n={u.n} vs n={v.n}")
    s = _sign(convention)
    # [X, Y] = (i s / h) (a_u . b_v - b_u . a_v)
    cross = sum(x * y for x, y in zip(u.a, v.b)) - sum(x * y for x, y in zip(u.b, v.a))
    return ExpLinear(
        u.n,
        tuple(x + y for x, y in zip(u.a, v.a)),
        tuple(x + y for x, y in zip(u.b, v.b)),
        u.scalar * v.scalar,
        u.phase + v.phase + s * cross / 2,
    )


# ---------------------------------------------------------------------
# ordered words

_GEN = re.compile(r"([qp])(\d+)")


def _generator(name: str, n: int) -> PolySymbol:
    m = _GEN.fullmatch(name.strip())
    if not m:
        raise ValueError(f"unknown generator {name!r}; expected q<k> or p<k>")
    k = int(m.group(2))
    if not 1 <= k <= n:
        raise ValueError(f"generator index {k} out of range for n={n}")
    return PolySymbol.q(k, n) if m.group(1) == "q" else PolySymbol.p(k, n)


def weyl_order_polynomial(word, n: int | None = None, convention: str = "operator") -> PolySymbol:
    """Weyl symbol of an ordered operator product.

    ``word`` is either a sequence of generator names (``["q1", "p1"]`` or
    the string ``"q1 p1"``) read left to right, or a linear combination
    ``[(coefficient, word), ...]``.
    """
    if isinstance(word, str):
        word = word.split()
    word = list(word)
    if word and isinstance(word[0], tuple):
        combos = word
    else:
        combos = [(1, word)]
    if n is None:
        idx = [int(_GEN.fullmatch(g.strip()).group(2)) for _, w in combos
               for g in (w.split() if isinstance(w, str) else w)]
        n = max(idx, default=1)
    total = PolySymbol.zero(n)
    for coef, w in combos:
        if isinstance(w, str):
            w = w.split()
        prod = PolySymbol.const(1, n)
        for g in w:
            prod = star(prod, _generator(g, n), convention)
        total = total + prod * CQ.coerce(coef)
    return total


# ---------------------------------------------------------------------
# text grammar:  (3/2)*i*h^2*q1^2*p2 + ...


def _fmt_rational(r: Fraction) -> str:
    r = abs(r)
    return str(r.numerator) if r.denominator == 1 else f"({r.numerator}/{r.denominator})"


def _sort_key(item):
    (e, hp), _ = item
    return (-sum(e), tuple(-x for x in e), hp)


def format_symbol(f: PolySymbol) -> str:
    """Canonical text; ``parse_symbol(format_symbol(f)) == f``."""
    pieces = []
    for (e, hp), c in sorted(f._terms.items(), key=_sort_key):
        factors = []
        if hp:
            factors.append("h" if hp == 1 else f"h^{hp}")
        for k in range(f.n):
            if e[k]:
                factors.append(f"q{k + 1}" + ("" if e[k] == 1 else f"^{e[k]}"))
        for k in range(f.n):
            if e[f.n + k]:
                factors.append(f"p{k + 1}" + ("" if e[f.n + k] == 1 else f"^{e[f.n + k]}"))
        for part, imag in ((c.re, False), (c.im, True)):
            if not part:
                continue
            body = []
            if abs(part) != 1:
                body.append(_fmt_rational(part))
            if imag:
                body.append("i")
            body += factors
            text = "*".join(body) if body else "1"
            pieces.append(("-" if part < 0 else "+", text))
    if not pieces:
        return "0"
    out = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
    for sgn, text in pieces[1:]:
        out += f" {sgn} {text}"
    return out


_TOKEN = re.compile(r"\s*(?:(\d+)|([qp])(\d+)|(h)|(i)|([-+*/^()]))")


def _tokenize(text: str):
    pos, toks = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[start]!r}", start)
        start = m.start() + (len(m.group(0)) - len(m.group(0).lstrip()))
        if m.group(1):
            toks.append(("int", int(m.group(1)), start))
        elif m.group(2):
            toks.append(("var", (m.group(2), int(m.group(3))), start))
        elif m.group(4):
            toks.append(("h", None, start))
        elif m.group(5):
            toks.append(("i", None, start))
        else:
            toks.append((m.group(6), None, start))
        pos = m.end()
    toks.append(("end", None, len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def take(self, kind):
        tok = self.toks[self.k]
        if tok[0] != kind:
            what = "end of input" if tok[0] == "end" else repr(tok[0] if tok[1] is None else tok[1])
            raise ParseError(f"expected {kind!r}, found {what}", tok[2])
        self.k += 1
        return tok

    def exponent(self) -> int:
        if self.peek()[0] == "^":
            self.take("^")
            return self.take("int")[1]
        return 1

    def factor(self, term):
        kind, val, pos = self.peek()
        if kind == "int":
            self.take("int")
            term["coef"] *= val
        elif kind == "(":
            self.take("(")
            neg = False
            if self.peek()[0] in "+-":
                neg = self.take(self.peek()[0])[0] == "-"
            num = self.take("int")[1]
            den = 1
            if self.peek()[0] == "/":
                self.take("/")
                den = self.take("int")[1]
                if den == 0:
                    raise ParseError("zero denominator", self.toks[self.k - 1][2])
            self.take(")")
            term["coef"] *= Fraction(-num if neg else num, den)
        elif kind == "i":
            self.take("i")
            term["imag"] += 1
        elif kind == "h":
            self.take("h")
            term["h"] += self.exponent()
        elif kind == "var":
            self.take("var")
            letter, idx = val
            if idx < 1:
                raise ParseError("variable index must be >= 1", pos)
            term["vars"].append((letter, idx, self.exponent()))
        else:
            what = "end of input" if kind == "end" else repr(kind)
            raise ParseError(f"expected a factor, found {what}", pos)

    def term(self):
        term = {"coef": Fraction(1), "imag": 0, "h": 0, "vars": []}
        self.factor(term)
        while self.peek()[0] == "*":
            self.take("*")
            self.factor(term)
        return term

    def parse(self):
        terms = []
        sign = 1
        if self.peek()[0] in "+-":
            sign = -1 if self.take(self.peek()[0])[0] == "-" else 1
        while True:
            t = self.term()
            t["coef"] *= sign
            terms.append(t)
            kind = self.peek()[0]
            if kind == "end":
                break
            if kind not in "+-":
                raise ParseError(f"expected '+' or '-', found {kind!r}", self.peek()[2])
            sign = -1 if self.take(kind)[0] == "-" else 1
        return terms


def parse_symbol(text: str, n: int | None = None) -> PolySymbol:
    """Parse the canonical text grammar; ``n`` defaults to the largest index used."""
    if text.strip() == "0":
        return PolySymbol.zero(n or 1)
    terms = _Parser(text).parse()
    used = max((idx for t in terms for _, idx, _ in t["vars"]), default=1)
    if n is None:
        n = used
    elif used > n:
        raise ParseError(f"variable index {used} exceeds n={n}", 0)
    out = []
    for t in terms:
        e = [0] * (2 * n)
        for letter, idx, power in t["vars"]:
            e[idx - 1 if letter == "q" else n + idx - 1] += power
        out.append(((tuple(e), t["h"]), I_POWERS[t["imag"] % 4] * t["coef"]))
    return PolySymbol(n, out)
