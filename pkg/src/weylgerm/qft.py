"""One-mode (0+1 dimensional) field theory: the anharmonic oscillator
``H = p^2/2 + m^2 u^2/2 + g u^4/4!`` treated with the Weyl-algebra
machinery of free fields.

Mode algebra
    ``u(t) = u+ exp(i m t) + u- exp(-i m t)`` with ``[u-, u+] = kappa hbar``,
    ``kappa = 1/(2m)``.  ``u+`` carries positive frequency under
    ``f~(w) = int exp(-i w t) f(t) dt``.  Polynomials are stored in vacuum
    normal order ``u+^a u-^b``, so the vacuum functional (``<u+ * F> =
    <F * u-> = 0``) keeps the constant term.

Kernels (Fourier convention ``D(t) = (2 pi)^-1 int exp(-i w t) D~(w) dw``)
    ``D_PV(t) = -sin(m|t|)/(2m)`` for ``PV 1/(w^2 - m^2)``,
    ``D_c(t) = -i exp(-i m|t|)/(2m)`` for ``1/(w^2 - m^2 + i0)``,
    ``G_ret(t) = theta(t) sin(m t)/m`` (classical retarded response).

Diagrams
    4-valent multigraphs with ``N`` vertices and ``L`` external legs.
    ``M`` is the number of permutations of vertices, edges and edge ends
    that preserve the graph and fix every external leg.
"""
from __future__ import annotations

import cmath
import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from ._cq import CQ
from .errors import ConvergenceError

__all__ = [
    "ModePolynomial",
    "mode_star",
    "mode_commutator",
    "vacuum_average",
    "mode_field",
    "green_function",
    "wick_pairings",
    "Propagator0p1",
    "D_pv",
    "D_feynman",
    "G_retarded",
    "numeric_D_pv",
    "numeric_D_feynman",
    "numeric_D_ieps",
    "Diagram",
    "enumerate_diagrams",
    "wick_labeled_count",
    "brute_force_wick_counts",
    "integrand_pairing_count",
    "total_pairing_count",
    "evaluate_diagram",
    "diagram_records",
    "free_solution",
    "classical_picard",
    "quantum_tree_coefficient",
    "tree_series_vs_classical",
    "SCHEMA_VERSION",
    "labeled_key",
    "dump_records",
]

SCHEMA_VERSION = 1
MAX_N = 4
MAX_L = 8


# ---------------------------------------------------------------------
# mode algebra


def _exact(x):
    return isinstance(x, (int, Fraction, CQ))


def _coef(x):
    """Exact coefficients become CQ; anything else complex."""
    if isinstance(x, CQ):
        return x
    if isinstance(x, (int, Fraction)):
        return CQ.coerce(x)
    return complex(x)


def _mul(a, b):
    if isinstance(a, CQ) and isinstance(b, CQ):
        return a * b
    return complex(a) * complex(b)


def _add(a, b):
    if isinstance(a, CQ) and isinstance(b, CQ):
        return a + b
    return complex(a) + complex(b)


def _is_zero(c):
    return (not c) if isinstance(c, CQ) else c == 0


class ModePolynomial:
    """Polynomial in ``u+, u-`` and formal ``hbar``; keys ``(a, b, hpow)`` mean
    ``hbar^hpow u+^a u-^b``.  ``kappa`` is ``[u-, u+] / hbar``."""

    __slots__ = ("_terms", "kappa")

    def __init__(self, terms=None, kappa=Fraction(1, 2)):
        acc: dict = {}
        for key, c in dict(terms or {}).items():
            a, b, h = (int(k) for k in key)
            if min(a, b, h) < 0:
                raise ValueError("exponents must be non-negative")
            c = _coef(c)
            acc[(a, b, h)] = _add(acc[(a, b, h)], c) if (a, b, h) in acc else c
        self._terms = {k: v for k, v in acc.items() if not _is_zero(v)}
        self.kappa = kappa if _exact(kappa) else float(kappa)

    @classmethod
    def for_mass(cls, m, terms=None):
        m = Fraction(m) if isinstance(m, (int, Fraction)) else float(m)
        if m <= 0:
            raise ValueError("mass must be positive")
        return cls(terms, Fraction(1) / (2 * m) if isinstance(m, Fraction) else 1 / (2 * m))

    @classmethod
    def const(cls, c, kappa=Fraction(1, 2)):
        return cls({(0, 0, 0): c}, kappa)

    @classmethod
    def u_plus(cls, kappa=Fraction(1, 2)):
        return cls({(1, 0, 0): 1}, kappa)

    @classmethod
    def u_minus(cls, kappa=Fraction(1, 2)):
        return cls({(0, 1, 0): 1}, kappa)

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def _same(self, other):
        if isinstance(other, ModePolynomial):
            if other.kappa != self.kappa:
                raise ValueError("mode polynomials with different kappa")
            return other
        return ModePolynomial.const(other, self.kappa)

    def __add__(self, other):
        other = self._same(other)
        t = dict(self._terms)
        for k, v in other._terms.items():
            t[k] = _add(t[k], v) if k in t else v
        return ModePolynomial(t, self.kappa)

    __radd__ = __add__

    def __neg__(self):
        return ModePolynomial({k: _mul(v, CQ.coerce(-1)) if isinstance(v, CQ) else -v
                               for k, v in self._terms.items()}, self.kappa)

    def __sub__(self, other):
        return self + (-self._same(other))

    def __rsub__(self, other):
        return self._same(other) - self

    def scale(self, c):
        c = _coef(c)
        return ModePolynomial({k: _mul(v, c) for k, v in self._terms.items()}, self.kappa)

    def __mul__(self, other):
        """Star product (the only product defined on the algebra)."""
        if isinstance(other, ModePolynomial):
            return mode_star(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, k: int):
        out = ModePolynomial.const(1, self.kappa)
        for _ in range(k):
            out = mode_star(out, self)
        return out

    def __eq__(self, other):
        if not isinstance(other, ModePolynomial):
            other = ModePolynomial.const(other, self.kappa)
        return self.kappa == other.kappa and self._terms == other._terms

    def __hash__(self):
        return hash((frozenset(self._terms.items()), self.kappa))

    def isclose(self, other, tol=1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(complex(self._terms.get(k, 0)) - complex(other._terms.get(k, 0))) <= tol for k in keys)

    def __repr__(self):
        parts = []
        for (a, b, h), c in sorted(self._terms.items()):
            parts.append(f"({c})*h^{h}*u+^{a}*u-^{b}")
        return " + ".join(parts) or "0"


@lru_cache(maxsize=None)
def _normal_coeffs(b: int, c: int) -> tuple:
    """``u-^b * u+^c = sum_j coeff_j (kappa hbar)^j u+^(c-j) u-^(b-j)``."""
    return tuple(math.comb(b, j) * math.comb(c, j) * math.factorial(j) for j in range(min(b, c) + 1))


def mode_star(f: ModePolynomial, g: ModePolynomial) -> ModePolynomial:
    """Associative product with ``[u-, u+] = kappa hbar``, result in normal order."""
    g = f._same(g)
    kap = f.kappa
    kap_c = CQ.coerce(kap) if _exact(kap) else complex(kap)
    out: dict = {}
    for (a, b, h), x in f._terms.items():
        for (c, d, k), y in g._terms.items():
            xy = _mul(x, y)
            for j, w in enumerate(_normal_coeffs(b, c)):
                coef = _mul(xy, CQ.coerce(w) if isinstance(xy, CQ) else w)
                if j:
                    coef = _mul(coef, kap_c ** j if isinstance(kap_c, CQ) else kap_c ** j)
                key = (a + c - j, b + d - j, h + k + j)
                out[key] = _add(out[key], coef) if key in out else coef
    return ModePolynomial(out, kap)


def mode_commutator(f: ModePolynomial, g: ModePolynomial) -> ModePolynomial:
    return mode_star(f, g) - mode_star(g, f)


def vacuum_average(f: ModePolynomial, hbar=None):
    """Constant part of the normal-ordered form.

    Without ``hbar`` returns ``{hpow: coefficient}``; with it, the value.
    """
    out: dict = {}
    for (a, b, h), c in f._terms.items():
        if a == 0 and b == 0:
            out[h] = _add(out[h], c) if h in out else c
    if hbar is None:
        return out
    return sum((complex(c) * hbar ** h for h, c in out.items()), 0j)


def mode_field(t: float, m: float, kappa=None) -> ModePolynomial:
    """``u(t) = u+ exp(i m t) + u- exp(-i m t)``."""
    kappa = (1 / (2 * m)) if kappa is None else kappa
    if t == 0:
        return ModePolynomial({(1, 0, 0): 1, (0, 1, 0): 1}, kappa)
    return ModePolynomial({(1, 0, 0): cmath.exp(1j * m * t), (0, 1, 0): cmath.exp(-1j * m * t)}, kappa)


def green_function(times, m: float, hbar: float) -> complex:
    """``<T u(t_1) * ... * u(t_N)>`` with the latest time leftmost."""
    times = [float(t) for t in times]
    if len(times) % 2:
        return 0j
    prod = ModePolynomial.const(1, 1 / (2 * m))
    for t in sorted(times, reverse=True):
        prod = mode_star(prod, mode_field(t, m))
    return vacuum_average(prod, hbar)


def wick_pairings(items):
    """All perfect pairings of ``items`` (list of tuples of pairs)."""
    items = list(items)
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in wick_pairings(rest[:i] + rest[i + 1:]):
            yield ((first, other),) + tail


# ---------------------------------------------------------------------
# propagators


def D_pv(t, m: float):
    """Inverse transform of ``PV 1/(w^2 - m^2)``: ``-sin(m|t|)/(2m)``."""
    return -np.sin(m * np.abs(t)) / (2 * m)


def D_feynman(t, m: float):
    """Inverse transform of ``1/(w^2 - m^2 + i0)``: ``-i exp(-i m|t|)/(2m)``."""
    return -1j * np.exp(-1j * m * np.abs(t)) / (2 * m)


def G_retarded(t, m: float):
    """Retarded solution kernel of ``u'' + m^2 u = f``: ``theta(t) sin(m t)/m``."""
    t = np.asarray(t, dtype=float)
    return np.where(t > 0, np.sin(m * t) / m, 0.0)


@dataclass(frozen=True)
class Propagator0p1:
    m: float
    kind: str = "PV"  # "PV", "Feynman" or "retarded"

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass must be positive")
        if self.kind not in ("PV", "Feynman", "retarded"):
            raise ValueError(f"unknown propagator kind {self.kind!r}")

    def __call__(self, t):
        if self.kind == "PV":
            return D_pv(t, self.m)
        if self.kind == "Feynman":
            return D_feynman(t, self.m)
        # -G_ret is the retarded Green function with the same sign as D
        return -G_retarded(t, self.m)


def numeric_D_pv(t: float, m: float, cutoff: float | None = None) -> float:
    """``(2 pi)^-1 PV int cos(w t)/(w^2 - m^2) dw`` by weighted adaptive quadrature."""
    t = abs(float(t))
    lam = cutoff or 4 * m + 10.0
    # on [0, lam]: PV int cos(wt)/(w+m) / (w-m)
    head, _ = integrate.quad(lambda w: math.cos(w * t) / (w + m), 0.0, lam,
                             weight="cauchy", wvar=m, epsabs=1e-13, epsrel=1e-13, limit=400)
    if t == 0:
        tail = math.log((lam + m) / (lam - m)) / (2 * m)
    else:
        tail, _ = integrate.quad(lambda w: 1.0 / (w * w - m * m), lam, np.inf,
                                 weight="cos", wvar=t, epsabs=1e-13, limlst=200)
    return (head + tail) / math.pi


def numeric_D_feynman(t: float, m: float) -> complex:
    """``1/(x + i0) = PV 1/x - i pi delta(x)``: the PV quadrature plus the mass-shell term."""
    return numeric_D_pv(t, m) - 1j * math.cos(m * t) / (2 * m)


def _D_eps(t: float, m: float, eps: float) -> complex:
    t = abs(float(t))
    w0 = math.sqrt(m * m)
    width = eps / (2 * m)
    lam = 4 * m + 10.0
    pts = sorted({w0 - 50 * width, w0 - width, w0, w0 + width, w0 + 50 * width})
    pts = [p for p in pts if 0 < p < lam]

    def f(w):
        return math.cos(w * t) / complex(w * w - m * m, eps)

    head = integrate.quad(f, 0.0, lam, points=pts, limit=2000, epsabs=1e-14, epsrel=1e-13, complex_func=True)[0]
    if t == 0:
        tail = integrate.quad(lambda w: 1 / complex(w * w - m * m, eps), lam, np.inf,
                              complex_func=True, epsabs=1e-14)[0]
    else:
        re = integrate.quad(lambda w: ((w * w - m * m) / ((w * w - m * m) ** 2 + eps * eps)), lam, np.inf,
                            weight="cos", wvar=t, epsabs=1e-14, limlst=200)[0]
        im = integrate.quad(lambda w: (-eps / ((w * w - m * m) ** 2 + eps * eps)), lam, np.inf,
                            weight="cos", wvar=t, epsabs=1e-14, limlst=200)[0]
        tail = complex(re, im)
    return (head + tail) / math.pi


def numeric_D_ieps(t: float, m: float, eps0: float = 2e-2, levels: int = 4) -> complex:
    """Feynman kernel from finite-``eps`` quadratures, Richardson-extrapolated to ``eps -> 0``."""
    T = [[_D_eps(t, m, eps0 / 2 ** k)] for k in range(levels)]
    for j in range(1, levels):
        for k in range(j, levels):
            T[k].append((2 ** j * T[k][j - 1] - T[k - 1][j - 1]) / (2 ** j - 1))
    return complex(T[-1][-1])


# ---------------------------------------------------------------------
# diagrams


@dataclass(frozen=True)
class Diagram:
    """``edges[(v, w)]`` (``v < w``) multiplicities; ``loops[v]``; ``external[v]``."""

    N: int
    edges: tuple  # tuple of ((v, w), multiplicity) with v < w, sorted
    loops: tuple
    external: tuple

    def __post_init__(self):
        if len(self.loops) != self.N or len(self.external) != self.N:
            raise ValueError("loops and external need one entry per vertex")
        val = [2 * self.loops[v] + self.external[v] for v in range(self.N)]
        for (v, w), k in self.edges:
            if not 0 <= v < w < self.N or k <= 0:
                raise ValueError(f"bad edge {(v, w)} x {k}")
            val[v] += k
            val[w] += k
        if any(x != 4 for x in val):
            raise ValueError(f"every vertex must have valence 4, got {val}")

    @classmethod
    def from_matrix(cls, mult, loops, external) -> Diagram:
        N = len(loops)
        edges = tuple(((v, w), int(mult[v][w])) for v in range(N) for w in range(v + 1, N) if mult[v][w])
        return cls(N, edges, tuple(int(x) for x in loops), tuple(int(x) for x in external))

    def matrix(self) -> list:
        M = [[0] * self.N for _ in range(self.N)]
        for (v, w), k in self.edges:
            M[v][w] = M[w][v] = k
        return M

    @property
    def L(self) -> int:
        return sum(self.external)

    @property
    def internal_edges(self) -> int:
        return sum(k for _, k in self.edges) + sum(self.loops)

    @property
    def hbar_power(self) -> int:
        return self.internal_edges - self.N

    def components(self) -> int:
        parent = list(range(self.N))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for (v, w), _ in self.edges:
            parent[find(v)] = find(w)
        return len({find(v) for v in range(self.N)})

    def loop_number(self) -> int:
        return self.internal_edges - self.N + self.components()

    def is_tree(self) -> bool:
        return self.loop_number() == 0

    def _key(self, perm) -> tuple:
        M = self.matrix()
        N = self.N
        return (tuple(self.external[perm[i]] for i in range(N)),
                tuple(self.loops[perm[i]] for i in range(N)),
                tuple(M[perm[i]][perm[j]] for i in range(N) for j in range(i + 1, N)))

    def canonical(self) -> tuple:
        return min(self._key(p) for p in itertools.permutations(range(self.N)))

    def vertex_automorphisms(self) -> list:
        base = self._key(tuple(range(self.N)))
        return [p for p in itertools.permutations(range(self.N)) if self._key(p) == base]

    def symmetry_factor(self) -> int:
        """``|K| prod(m_vw!) prod(l_v! 2^l_v)``; ``K`` fixes every vertex with external legs."""
        K = [p for p in self.vertex_automorphisms()
             if all(p[v] == v for v in range(self.N) if self.external[v])]
        out = len(K)
        for _, k in self.edges:
            out *= math.factorial(k)
        for lv in self.loops:
            out *= math.factorial(lv) * 2 ** lv
        return out

    def to_record(self) -> dict:
        return {"vertices": self.N,
                "edges": [[v, w, k] for (v, w), k in self.edges] + [[v, v, lv] for v, lv in enumerate(self.loops) if lv],
                "external": list(self.external)}


def _canonical_diagram(d: Diagram) -> Diagram:
    ext, loops, upper = d.canonical()
    N = d.N
    M = [[0] * N for _ in range(N)]
    it = iter(upper)
    for i in range(N):
        for j in range(i + 1, N):
            M[i][j] = M[j][i] = next(it)
    return Diagram.from_matrix(M, loops, ext)


def enumerate_diagrams(N: int, L: int) -> list:
    """All isomorphism classes ``[(Diagram, M)]`` with ``N`` vertices and ``L`` legs."""
    if N < 0 or L < 0 or (4 * N - L) % 2 or 4 * N < L:
        raise ValueError("need 4N - L even and non-negative")
    if N > MAX_N or L > MAX_L:
        raise ValueError(f"size cap exceeded (N <= {MAX_N}, L <= {MAX_L})")
    if N == 0:
        return [] if L else [(Diagram(0, (), (), ()), 1)]
    pairs = [(v, w) for v in range(N) for w in range(v + 1, N)]
    seen = {}

    def ext_splits(v, left):
        if v == N - 1:
            if left <= 4:
                yield (left,)
            return
        for e in range(min(4, left) + 1):
            for rest in ext_splits(v + 1, left - e):
                yield (e,) + rest

    for ext in ext_splits(0, L):
        rem = [4 - e for e in ext]

        def fill(k, rem, chosen):
            if k == len(pairs):
                if all(r % 2 == 0 for r in rem):
                    loops = tuple(r // 2 for r in rem)
                    M = [[0] * N for _ in range(N)]
                    for (v, w), x in zip(pairs, chosen):
                        M[v][w] = M[w][v] = x
                    d = _canonical_diagram(Diagram.from_matrix(M, loops, ext))
                    key = d.canonical()
                    if key not in seen:
                        seen[key] = d
                return
            v, w = pairs[k]
            for x in range(min(rem[v], rem[w]) + 1):
                rem2 = list(rem)
                rem2[v] -= x
                rem2[w] -= x
                fill(k + 1, rem2, chosen + [x])

        fill(0, rem, [])
    out = [(d, d.symmetry_factor()) for _, d in sorted(seen.items())]
    return out


def wick_labeled_count(d: Diagram) -> Fraction:
    """Wick pairings (labelled external legs) producing ``d``: ``4!^N N! / M``."""
    return Fraction(math.factorial(4) ** d.N * math.factorial(d.N), d.symmetry_factor())


def integrand_pairing_count(d: Diagram) -> Fraction:
    """Ways to pick ``L`` of the ``4N`` vertex fields as legs and pair the rest into ``d``."""
    aut = len(d.vertex_automorphisms())
    K = sum(1 for p in d.vertex_automorphisms() if all(p[v] == v for v in range(d.N) if d.external[v]))
    denom = d.symmetry_factor() * math.prod(math.factorial(e) for e in d.external) * aut
    return Fraction(math.factorial(4) ** d.N * math.factorial(d.N) * K, denom)


def total_pairing_count(N: int, L: int) -> int:
    """``binom(4N, L) (4N - L - 1)!!``."""
    r = 4 * N - L
    dfact = math.prod(range(r - 1, 0, -2)) if r > 0 else 1
    return math.comb(4 * N, L) * dfact


def brute_force_wick_counts(N: int, L: int, max_points: int = 14) -> Counter:
    """Enumerate every pairing of ``4N`` vertex fields with ``L`` labelled legs.

    Returns a counter keyed by the canonical labelled graph (legs as
    ``("x", j)`` points, which may only pair with vertex fields).
    """
    if 4 * N + L > max_points:
        raise ValueError("too many points for brute force")
    slots = [("v", v, s) for v in range(N) for s in range(4)]
    legs = [("x", j) for j in range(L)]
    counts: Counter = Counter()

    def pair_all(items):
        if not items:
            yield ()
            return
        first, rest = items[0], items[1:]
        for i, other in enumerate(rest):
            if first[0] == "x" and other[0] == "x":
                continue
            for tail in pair_all(rest[:i] + rest[i + 1:]):
                yield ((first, other),) + tail

    for pairing in pair_all(legs + slots):
        mult = [[0] * N for _ in range(N)]
        loops = [0] * N
        attach = [[] for _ in range(N)]
        for a, b in pairing:
            if a[0] == "x" or b[0] == "x":
                x, v = (a, b) if a[0] == "x" else (b, a)
                attach[v[1]].append(x[1])
            elif a[1] == b[1]:
                loops[a[1]] += 1
            else:
                mult[a[1]][b[1]] += 1
                mult[b[1]][a[1]] += 1
        key = min(
            (tuple(tuple(sorted(attach[p[i]])) for i in range(N)),
             tuple(loops[p[i]] for i in range(N)),
             tuple(mult[p[i]][p[j]] for i in range(N) for j in range(i + 1, N)))
            for p in itertools.permutations(range(N)))
        counts[key] += 1
    return counts


def labeled_key(d: Diagram, labels=None) -> tuple:
    """Canonical labelled key of ``d`` with legs numbered in vertex order."""
    N = d.N
    if labels is None:
        labels, j = [], 0
        for v in range(N):
            labels.append(tuple(range(j, j + d.external[v])))
            j += d.external[v]
    M = d.matrix()
    return min(
        (tuple(tuple(sorted(labels[p[i]])) for i in range(N)),
         tuple(d.loops[p[i]] for i in range(N)),
         tuple(M[p[i]][p[j]] for i in range(N) for j in range(i + 1, N)))
        for p in itertools.permutations(range(N)))


# ---------------------------------------------------------------------
# diagram evaluation


def _nested_quad(f, N, a, b, tol, kinks=True):
    """``int_[a,b]^N f(t_1..t_N)`` by nested adaptive quadrature, breakpoints at coincident times."""
    def inner(k, fixed):
        if k == N:
            return f(*fixed)
        pts = [x for x in fixed if a < x < b] if kinks else None
        val, err = integrate.quad(lambda s: inner(k + 1, fixed + (s,)), a, b, points=pts or None,
                                  epsabs=tol, epsrel=tol, limit=200, complex_func=True)
        return val
    return inner(0, ())


def evaluate_diagram(d: Diagram, m: float, hbar: float, g: float, t_window,
                     kind: str = "PV", external_times=None, u_ext=None, tol: float = 1e-9) -> complex:
    """Value of one diagram: ``g^N / M`` times the product of

    * ``(i hbar)^-1`` per vertex,
    * ``-i hbar D(t_i - t_j)`` per internal edge (``D(0)`` for a loop),
    * ``u_ext(t_v)`` per external leg at vertex ``v`` (default 1), or
      ``-i hbar D(t_v - s_j)`` when ``external_times`` ``s_j`` are given,

    with every vertex time integrated over ``t_window``.  Non-convergence
    (doubling the tolerance changes the value by more than ``100 tol``)
    raises :class:`ConvergenceError`.
    """
    a, b = (float(x) for x in t_window)
    if not b > a:
        raise ValueError("empty time window")
    D = Propagator0p1(m, kind)
    M = d.symmetry_factor()
    N = d.N
    if external_times is not None and len(external_times) != d.L:
        raise ValueError("one external time per leg")
    leg_vertex = [v for v in range(N) for _ in range(d.external[v])]
    u_ext = u_ext or (lambda t: 1.0)
    edge_list = [(v, w, k) for (v, w), k in d.edges]
    loop_fac = complex(-1j * hbar * D(0.0))

    def integrand(*ts):
        val = complex((1 / (1j * hbar)) ** N)
        for v, w, k in edge_list:
            val *= complex(-1j * hbar * D(ts[v] - ts[w])) ** k
        for v in range(N):
            val *= loop_fac ** d.loops[v]
        if external_times is None:
            for v in leg_vertex:
                val *= u_ext(ts[v])
        else:
            for v, s in zip(leg_vertex, external_times):
                val *= complex(-1j * hbar * D(ts[v] - s))
        return val

    pref = g ** N / M
    if N == 0:
        return complex(pref)
    v1 = _nested_quad(integrand, N, a, b, tol)
    v2 = _nested_quad(integrand, N, a, b, tol / 10)
    if abs(v1 - v2) > 100 * tol * max(1.0, abs(v2)):
        raise ConvergenceError(f"diagram quadrature unstable: {v1} vs {v2}")
    return complex(pref * v2)


def diagram_records(N: int, L: int, m: float, hbar: float, g: float, t_window,
                    kind: str = "PV", evaluate: bool = True) -> list:
    """JSON-ready records ``{vertices, edges, external, M, value_re, value_im, hbar_power}``."""
    out = []
    for d, M in enumerate_diagrams(N, L):
        rec = d.to_record()
        rec["M"] = M
        rec["hbar_power"] = d.hbar_power
        if evaluate:
            v = evaluate_diagram(d, m, hbar, g, t_window, kind)
            rec["value_re"], rec["value_im"] = float(v.real), float(v.imag)
        else:
            rec["value_re"] = rec["value_im"] = None
        out.append(rec)
    return out


def dump_records(records, fh) -> None:
    json.dump({"schema_version": SCHEMA_VERSION, "diagrams": records}, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------
# tree approximation


def free_solution(u0: float, v0: float, m: float):
    """``u(t) = u0 cos(m t) + (v0/m) sin(m t)``."""
    return lambda t: u0 * np.cos(m * np.asarray(t)) + v0 / m * np.sin(m * np.asarray(t))


def classical_picard(order: int, m: float, u0: float, v0: float, t: float,
                     coupling_sign: int = -1, n_grid: int = 4001) -> list:
    """g-expansion coefficients ``[c_0(t), ..., c_order(t)]`` of ``u(t)`` for
    ``u'' + m^2 u = coupling_sign * g u^3 / 3!`` by Picard iteration on the
    truncated series.

    Each iterate uses ``sin(m(t-s)) = sin(mt)cos(ms) - cos(mt)sin(ms)`` and
    cumulative Simpson integration on a uniform grid.
    """
    s = np.linspace(0.0, t, n_grid)
    series = [free_solution(u0, v0, m)(s)] + [np.zeros_like(s) for _ in range(order)]
    cs, sn = np.cos(m * s), np.sin(m * s)
    for _ in range(order):
        new = [series[0]]
        for k in range(1, order + 1):
            # g^(k-1) coefficient of u^3 from the current series
            src = np.zeros_like(s)
            for i in range(k):
                for j in range(k - i):
                    l_ = k - 1 - i - j
                    src = src + series[i] * series[j] * series[l_]
            src = coupling_sign * src / 6
            I1 = integrate.cumulative_simpson(cs * src, x=s, initial=0.0)
            I2 = integrate.cumulative_simpson(sn * src, x=s, initial=0.0)
            new.append((sn * I1 - cs * I2) / m)
        series = new
    return [float(c[-1]) for c in series]


@lru_cache(maxsize=None)
def _retarded_from_modes(m: float) -> tuple:
    """``[u(s), u(t)] / (i hbar)`` from the mode algebra: coefficients of
    ``exp(i m (t - s))`` and ``exp(-i m (t - s))``."""
    kap = 1 / (2 * m)
    up = ModePolynomial.u_plus(kap)
    um = ModePolynomial.u_minus(kap)
    c = vacuum_average(mode_commutator(um, up))  # [u-, u+] = kappa hbar
    k = complex(c.get(1, 0))
    # [u(s), u(t)] = k hbar (exp(-im s + im t) - exp(im s - im t))
    return (k / 1j, -k / 1j)


def _kernel(m: float):
    cp, cm = _retarded_from_modes(m)

    def K(tau):
        tau = np.asarray(tau, dtype=float)
        val = (cp * np.exp(1j * m * tau) + cm * np.exp(-1j * m * tau)).real
        return np.where(tau > 0, val, 0.0)
    return K


def _gl(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def quantum_tree_coefficient(order: int, m: float, u0: float, v0: float, t: float,
                             nodes: int = 48) -> float:
    """g^order coefficient of ``u(t)`` from loopless (rooted-tree) diagrams at ``hbar^0``.

    Each vertex carries ``-g`` (``(i hbar)^-1`` times the coupling, with the
    ``i hbar`` of the commutator attached to its outgoing edge), each edge
    the kernel ``[u(s), u(t)]/(i hbar)`` taken from the mode algebra, each
    leg the free solution, and the tree the weight ``1/M`` of its rooted
    symmetry group: ``1/3!`` for the single vertex, ``1/(2! 3!)`` for the chain.
    """
    if order == 0:
        return float(free_solution(u0, v0, m)(t))
    K = _kernel(m)
    uf = free_solution(u0, v0, m)
    if order == 1:
        s, w = _gl(0.0, t, nodes)
        return float(-1 / 6 * np.sum(w * K(t - s) * uf(s) ** 3))
    if order == 2:
        s, w = _gl(0.0, t, nodes)
        inner = np.empty_like(s)
        for i, si in enumerate(s):
            r, wr = _gl(0.0, si, nodes)
            inner[i] = np.sum(wr * K(si - r) * uf(r) ** 3)
        return float((+1) / 12 * np.sum(w * K(t - s) * uf(s) ** 2 * inner))
    raise ValueError("order must be 0, 1 or 2")


def tree_series_vs_classical(order: int, m: float, g: float, u0: float, v0: float, t: float,
                             coupling_sign: int = -1):
    """``(quantum_tree, classical, |difference|)`` for the ``g^order`` term of ``u(t)``.

    ``coupling_sign=-1`` is the classical equation belonging to the
    interaction ``+g u^4/4!``; ``+1`` flips the sign of the cubic force.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    q = quantum_tree_coefficient(order, m, u0, v0, t) * g ** order
    c = classical_picard(order, m, u0, v0, t, coupling_sign)[order] * g ** order
    return q, c, abs(q - c)
