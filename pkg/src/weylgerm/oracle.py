"""Grid quantum mechanics in one dimension: the reference every semiclassical
result is checked against.

Wavefunctions live on a periodic FFT grid.  Momentum operators are
spectral, Weyl-quantised polynomials are applied through the symmetric
(McCoy) ordering

    Op(q^a p^b) = 2^-a sum_k binom(a, k) q^k p^b q^(a-k),

and Schrodinger evolution uses Strang splitting for ``T(p) + V(q)`` or
the exact exponential of the discretised Hermitian operator otherwise.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, GridError
from .moyal import PolySymbol

__all__ = [
    "Grid1D",
    "WavefunctionGrid",
    "EDGE_TOL",
    "check_edge_decay",
    "fourier_h",
    "apply_p_power",
    "apply_weyl_op",
    "weyl_matrix",
    "evolve_schrodinger",
    "weil_generator_act",
    "l2_error",
    "write_grid_csv",
    "read_grid_csv",
]

EDGE_TOL = 1e-12
MAX_WEYL_DEGREE = 8


@dataclass(frozen=True)
class Grid1D:
    """``N`` points ``x_min + j dx`` with ``dx = (x_max - x_min) / N``; periodic."""

    x_min: float
    x_max: float
    N: int

    def __post_init__(self):
        if self.N < 64 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 64, got {self.N}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @classmethod
    def symmetric(cls, half_width: float, N: int) -> Grid1D:
        """Grid ``[-L, L)`` (the origin is the point ``j = N/2``)."""
        return cls(-half_width, half_width, N)

    @classmethod
    def self_dual(cls, N: int, hbar: float) -> Grid1D:
        """Symmetric grid that ``fourier_h`` maps onto itself: ``dx^2 = 2 pi hbar / N``."""
        dx = math.sqrt(2 * math.pi * hbar / N)
        return cls.symmetric(N * dx / 2, N)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.N

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.N)

    def momenta(self, hbar: float) -> np.ndarray:
        """Momentum of each FFT mode (``numpy.fft`` ordering)."""
        return 2 * math.pi * hbar * np.fft.fftfreq(self.N, self.dx)

    def dual(self, hbar: float) -> Grid1D:
        dp = 2 * math.pi * hbar / (self.N * self.dx)
        if abs(dp - self.dx) <= 1e-12 * self.dx and abs(self.x_min + self.x_max) <= 1e-12 * self.dx:
            return self
        return Grid1D.symmetric(self.N * dp / 2, self.N)


@dataclass(frozen=True)
class WavefunctionGrid:
    grid: Grid1D
    values: np.ndarray
    hbar: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.N,):
            raise ValueError(f"values must have shape ({self.grid.N},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("wavefunction values must be finite")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def norm(self) -> float:
        return float(np.sqrt(self.grid.dx * np.sum(np.abs(self.values) ** 2)))

    def inner(self, other: WavefunctionGrid) -> complex:
        """``<self, other>`` (antilinear in ``self``)."""
        _check_compatible(self, other)
        return complex(self.grid.dx * np.vdot(self.values, other.values))

    def normalized(self) -> WavefunctionGrid:
        return self.with_values(self.values / self.norm())

    def with_values(self, values) -> WavefunctionGrid:
        return WavefunctionGrid(self.grid, values, self.hbar)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def _check_compatible(a: WavefunctionGrid, b: WavefunctionGrid):
    if a.grid != b.grid:
        raise ValueError("wavefunctions live on different grids")
    if a.hbar != b.hbar:
        raise ValueError(f"hbar mismatch: {a.hbar} vs {b.hbar}")


def check_edge_decay(psi: WavefunctionGrid, tol: float = EDGE_TOL, width: int = 4) -> float:
    """Raise :class:`GridError` unless ``|psi|`` at the edges is below ``tol * max|psi|``."""
    a = np.abs(psi.values)
    peak = a.max()
    if peak == 0:
        return 0.0
    edge = max(a[:width].max(), a[-width:].max()) / peak
    if edge > tol:
        raise GridError(f"wavefunction does not decay at the grid edges (relative {edge:.2e} > {tol:.0e})")
    return float(edge)


# ---------------------------------------------------------------------
# Fourier transform and operators


def fourier_h(psi: WavefunctionGrid, edge_tol: float = EDGE_TOL) -> WavefunctionGrid:
    """``(2 pi hbar)^-1/2 int exp(-i p y / hbar) psi(y) dy`` on the dual grid.

    The dual grid is symmetric with spacing ``2 pi hbar / (N dx)``.  The
    Gaussian ``exp(-x^2 / 2 hbar)`` is mapped to itself, and applying the
    transform twice to data on a symmetric grid gives ``psi(-x)``.
    """
    check_edge_decay(psi, edge_tol)
    g, h = psi.grid, psi.hbar
    dual = g.dual(h)
    N, dx, dp = g.N, g.dx, dual.dx
    j = np.arange(N)
    pmin, xmin = dual.x_min, g.x_min
    pre = psi.values * np.exp(-1j * pmin * dx * j / h)
    out = np.fft.fft(pre) * np.exp(-1j * dp * xmin * j / h) * np.exp(-1j * pmin * xmin / h)
    out *= dx / math.sqrt(2 * math.pi * h)
    res = WavefunctionGrid(dual, out, h)
    try:
        check_edge_decay(res, edge_tol)
    except GridError as exc:
        raise GridError(f"hbar incompatible with the grid's Nyquist range: {exc}") from None
    return res


def apply_p_power(values: np.ndarray, grid: Grid1D, hbar: float, b: int) -> np.ndarray:
    """``(-i hbar d/dx)^b`` applied spectrally along axis 0."""
    if b == 0:
        return values
    k = grid.momenta(hbar) ** b
    if values.ndim > 1:
        k = k[:, None]
    return np.fft.ifft(k * np.fft.fft(values, axis=0), axis=0)


def _apply_numeric(terms, values, grid, hbar):
    x = grid.x[:, None] if values.ndim > 1 else grid.x
    out = np.zeros_like(values, dtype=complex)
    for (a, b), c in terms:
        acc = np.zeros_like(values, dtype=complex)
        for k in range(a + 1):
            inner = apply_p_power(x ** (a - k) * values, grid, hbar, b)
            acc += math.comb(a, k) * x ** k * inner
        out += c * acc / 2 ** a
    return out


def _numeric_1d(phi: PolySymbol, hbar: float):
    if phi.n != 1:
        raise ValueError("the grid oracle handles one degree of freedom only")
    if phi.degree() > MAX_WEYL_DEGREE:
        raise ValueError(f"symbol degree {phi.degree()} exceeds the cap {MAX_WEYL_DEGREE}")
    return [((e[0], e[1]), c) for e, c in phi.numeric_terms(hbar)]


def apply_weyl_op(phi: PolySymbol, psi: WavefunctionGrid, edge_tol: float = 1e-8) -> WavefunctionGrid:
    """Weyl quantisation of a one-dimensional polynomial symbol applied to ``psi``."""
    terms = _numeric_1d(phi, psi.hbar)
    check_edge_decay(psi, edge_tol)
    return psi.with_values(_apply_numeric(terms, np.asarray(psi.values), psi.grid, psi.hbar))


def weyl_matrix(phi: PolySymbol, grid: Grid1D, hbar: float) -> np.ndarray:
    """Dense matrix of the discretised Weyl operator (columns = images of unit vectors)."""
    terms = _numeric_1d(phi, hbar)
    return _apply_numeric(terms, np.eye(grid.N, dtype=complex), grid, hbar)


# ---------------------------------------------------------------------
# time evolution


def _separable_parts(H):
    """``(T(p), V(q))`` vectorised callables if ``H`` has no mixed terms, else ``None``."""
    sep = getattr(H, "separable", None)
    if isinstance(sep, tuple):
        return sep
    symbol = H if isinstance(H, PolySymbol) else getattr(H, "symbol", None)
    if symbol is None:
        raise TypeError("H must be a PolySymbol or expose .separable / .symbol")
    for e, _hp in symbol.terms:
        if e[0] and e[1]:
            return None
    return _split_polynomial(symbol)


def _split_polynomial(symbol: PolySymbol):
    def kinetic(p, hbar):
        return sum((c * p ** e[1] for e, c in symbol.numeric_terms(hbar) if e[0] == 0 and e[1] > 0),
                   np.zeros_like(p, dtype=complex))

    def potential(q, hbar):
        return sum((c * q ** e[0] for e, c in symbol.numeric_terms(hbar) if e[1] == 0),
                   np.zeros_like(q, dtype=complex))

    return kinetic, potential


def _strang(psi: WavefunctionGrid, kinetic, potential, t: float, steps: int) -> np.ndarray:
    g, h = psi.grid, psi.hbar
    dt = t / steps
    V = np.real_if_close(potential(g.x, h))
    T = np.real_if_close(kinetic(g.momenta(h), h))
    if np.iscomplexobj(V) or np.iscomplexobj(T):
        raise ValueError("Hamiltonian is not real")
    half = np.exp(-0.5j * dt * V / h)
    full = np.exp(-1j * dt * T / h)
    v = np.array(psi.values)
    for _ in range(steps):
        v = half * v
        v = np.fft.ifft(full * np.fft.fft(v))
        v = half * v
    return v


def _exact_dense(psi: WavefunctionGrid, symbol: PolySymbol, t: float) -> np.ndarray:
    Hm = weyl_matrix(symbol, psi.grid, psi.hbar)
    if np.max(np.abs(Hm - Hm.conj().T)) > 1e-8 * max(1.0, np.max(np.abs(Hm))):
        raise ValueError("discretised Hamiltonian is not Hermitian (complex symbol?)")
    w, U = np.linalg.eigh(0.5 * (Hm + Hm.conj().T))
    return U @ (np.exp(-1j * t * w / psi.hbar) * (U.conj().T @ psi.values))


def evolve_schrodinger(H, psi0: WavefunctionGrid, t: float, steps: int | None = None,
                       tol: float | None = None, return_error: bool = False,
                       edge_tol: float = 1e-10):
    """Solve ``i hbar psi_t = H psi`` up to time ``t``.

    ``H`` is a one-dimensional :class:`PolySymbol` or an object exposing
    ``separable = (T(p, hbar), V(q, hbar))`` or ``symbol``.  Separable
    Hamiltonians use ``steps`` Strang steps; the discretisation error is
    estimated by repeating with ``2 * steps``.  Other Hamiltonians use
    the exact exponential of the Hermitian grid operator (error 0 in
    time).  With ``tol`` a larger error estimate raises
    :class:`ConvergenceError`.
    """
    check_edge_decay(psi0, edge_tol)
    if t == 0:
        return (psi0, 0.0) if return_error else psi0
    parts = _separable_parts(H)
    if parts is None:
        symbol = H if isinstance(H, PolySymbol) else H.symbol
        out = psi0.with_values(_exact_dense(psi0, symbol, t))
        err = 0.0
    else:
        kinetic, potential = parts
        if steps is None:
            steps = max(16, int(math.ceil(abs(t) / 1e-3)))
        coarse = _strang(psi0, kinetic, potential, t, steps)
        fine = _strang(psi0, kinetic, potential, t, 2 * steps)
        err = float(np.sqrt(psi0.grid.dx * np.sum(np.abs(fine - coarse) ** 2)))
        out = psi0.with_values(fine)
    if tol is not None and err > tol:
        raise ConvergenceError(f"step halving changed the result by {err:.2e} > {tol:.2e}")
    check_edge_decay(out, edge_tol)
    return (out, err) if return_error else out


# ---------------------------------------------------------------------
# metaplectic generators on the grid


def _spectral_eval(psi: WavefunctionGrid, y: np.ndarray) -> np.ndarray:
    g = psi.grid
    c = np.fft.fft(psi.values) / g.N
    kappa = 2 * math.pi * np.fft.fftfreq(g.N, g.dx)
    nyq = g.N // 2
    c = c.copy()
    # split the Nyquist mode symmetrically so the interpolant is real for real data
    c_nyq = c[nyq]
    c[nyq] = 0.5 * c_nyq
    phase = np.exp(1j * np.outer(y - g.x_min, kappa))
    out = phase @ c + 0.5 * c_nyq * np.exp(-1j * kappa[nyq] * (y - g.x_min))
    inside = (y >= g.x_min) & (y < g.x_max)
    return np.where(inside, out, 0.0)


def weil_generator_act(kind: str, psi: WavefunctionGrid, param: float | None = None) -> WavefunctionGrid:
    """Grid action of the generators of the metaplectic group.

    * ``"shear"``: multiply by ``exp(i B x^2 / 2 hbar)`` (``Z -> Z + B``).
    * ``"linear"``: ``sqrt(A) psi(A x)`` with ``A > 0`` (``Z -> A^2 Z``).
    * ``"fourier"``: :func:`fourier_h`, phase fixed so the ``Z = i`` Gaussian is invariant.
    """
    if kind == "shear":
        B = 0.0 if param is None else float(param)
        return psi.with_values(psi.values * np.exp(0.5j * B * psi.x ** 2 / psi.hbar))
    if kind == "linear":
        A = 1.0 if param is None else float(param)
        if A <= 0:
            raise ValueError("linear generator needs A > 0 on the grid")
        check_edge_decay(psi, 1e-10)
        if A == 1.0:
            return psi
        res = psi.with_values(math.sqrt(A) * _spectral_eval(psi, A * psi.x))
        try:
            check_edge_decay(res, 1e-10)
        except GridError as exc:
            raise GridError(f"resampled wavefunction leaves the grid: {exc}") from None
        return res
    if kind == "fourier":
        return fourier_h(psi)
    raise ValueError(f"unknown generator kind {kind!r}")


def l2_error(psi1: WavefunctionGrid, psi2: WavefunctionGrid, mod_global_phase: bool = False) -> float:
    """``min_theta ||psi1 - exp(i theta) psi2||`` (``theta = 0`` unless ``mod_global_phase``)."""
    _check_compatible(psi1, psi2)
    v2 = psi2.values
    if mod_global_phase:
        ov = np.vdot(v2, psi1.values)
        if ov != 0:
            v2 = v2 * (ov / abs(ov))
    return float(np.sqrt(psi1.grid.dx * np.sum(np.abs(psi1.values - v2) ** 2)))


# ---------------------------------------------------------------------
# CSV snapshots


def write_grid_csv(path, psi: WavefunctionGrid, column: str = "x") -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([column, "re_psi", "im_psi"])
        for x, v in zip(psi.x, psi.values):
            w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])


def read_grid_csv(path, hbar: float) -> WavefunctionGrid:
    rows = list(csv.reader(Path(path).open()))
    data = np.array([[float(c) for c in r] for r in rows[1:]])
    x = data[:, 0]
    N = len(x)
    dx = (x[-1] - x[0]) / (N - 1)
    grid = Grid1D(float(x[0]), float(x[0] + N * dx), N)
    return WavefunctionGrid(grid, data[:, 1] + 1j * data[:, 2], hbar)
