import random
from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from weylgerm.moyal import PolySymbol
from weylgerm.symplectic import SymplecticBlock

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

_rational = st.fractions(min_value=-3, max_value=3, max_denominator=4)


@st.composite
def poly_symbols(draw, n=None, max_degree=6, max_terms=4, max_hpow=1):
    """Random polynomial symbols with rational coefficients."""
    n = draw(st.integers(1, 3)) if n is None else n
    k = draw(st.integers(1, max_terms))
    terms = {}
    for _ in range(k):
        deg = draw(st.integers(0, max_degree))
        cuts = sorted(draw(st.lists(st.integers(0, deg), min_size=2 * n - 1, max_size=2 * n - 1)))
        exps = tuple(b - a for a, b in zip([0] + cuts, cuts + [deg]))
        hp = draw(st.integers(0, max_hpow))
        terms[(exps, hp)] = (draw(_rational), draw(_rational))
    from weylgerm._cq import CQ
    return PolySymbol(n, {k_: CQ(re, im) for k_, (re, im) in terms.items()})


def random_poly(rng: random.Random, n: int, max_degree: int = 6, max_terms: int = 4) -> PolySymbol:
    from weylgerm._cq import CQ
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        deg = rng.randint(0, max_degree)
        cuts = sorted(rng.randint(0, deg) for _ in range(2 * n - 1))
        exps = tuple(b - a for a, b in zip([0] + cuts, cuts + [deg]))
        terms[(exps, rng.randint(0, 1))] = CQ(Fraction(rng.randint(-9, 9), rng.randint(1, 5)),
                                              Fraction(rng.randint(-9, 9), rng.randint(1, 5)))
    return PolySymbol(n, terms)


def random_quadratic(rng: random.Random, n: int) -> PolySymbol:
    """Real quadratic form plus linear and constant parts."""
    terms = {}
    for i in range(2 * n):
        for j in range(i, 2 * n):
            e = [0] * (2 * n)
            e[i] += 1
            e[j] += 1
            terms[(tuple(e), 0)] = Fraction(rng.randint(-5, 5), rng.randint(1, 3))
        e = [0] * (2 * n)
        e[i] = 1
        terms[(tuple(e), 0)] = Fraction(rng.randint(-5, 5), rng.randint(1, 3))
    terms[((0,) * (2 * n), 0)] = Fraction(rng.randint(-5, 5))
    return PolySymbol(n, terms)


def random_symplectic(rng: np.random.Generator, n: int) -> SymplecticBlock:
    """Product of a shear, a linear map and a rotation-type block."""
    B = rng.normal(size=(n, n))
    B = (B + B.T) / 2
    A = rng.normal(size=(n, n)) + 2 * np.eye(n)
    S = rng.normal(size=(n, n))
    S = (S + S.T) / 4
    E, Z = np.eye(n), np.zeros((n, n))
    shear = SymplecticBlock(E, B, Z, E)
    lin = SymplecticBlock(A, Z, Z, np.linalg.inv(A.T))
    low = SymplecticBlock(E, Z, S, E)
    return shear @ lin @ low


def random_siegel(rng: np.random.Generator, n: int) -> np.ndarray:
    X = rng.normal(size=(n, n))
    Y = rng.normal(size=(n, n))
    return (X + X.T) / 2 + 1j * (Y @ Y.T + 0.2 * np.eye(n))


# acceptance reporting: one line per criterion in the terminal summary
_CRITERIA: dict = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    key = (mark.args[0], mark.kwargs.get("companion"))
    ok = call.excinfo is None
    _CRITERIA[key] = _CRITERIA.get(key, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, companion), ok in sorted(_CRITERIA.items(), key=lambda kv: (kv[0][0], kv[0][1] or "")):
        label = f"criterion {num}" + (f" [{companion}]" if companion else "")
        terminalreporter.write_line(f"{label}: {'PASS' if ok else 'FAIL'}")
