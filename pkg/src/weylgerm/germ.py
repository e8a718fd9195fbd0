"""Gaussian packets, their semiclassical and exact propagation, and the
one-dimensional canonical operator.

A packet is

    psi(q) = c exp((i/hbar) (1/2 (q-q0) Z (q-q0) + p0 (q-q0) + S)),

with ``Im Z > 0``.  Along a classical trajectory the centre follows the
flow, ``S`` gains the action, ``Z`` is moved by the Moebius action of the
tangent block and ``c`` is divided by the continuously tracked
``sqrt(det(C Z + D))``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .dynamics import HamiltonianSpec, StepControl, integrate_flow, riccati_integrate
from .errors import CausticError, ConvergenceError, GridError, LagrangianError
from .oracle import Grid1D, WavefunctionGrid, fourier_h
from .symplectic import (
    SiegelMatrix,
    branch_track,
    maslov_index,
    moebius_act,
    quadratic_flow,
)

__all__ = [
    "GaussianPacket",
    "LagrangianCurve",
    "propagate_packet",
    "exact_quadratic_propagate",
    "packet_to_grid",
    "packet_fourier",
    "transport_amplitude",
    "canonical_superpose",
    "stationary_phase_reconstruct",
    "reconstruct_wkb",
    "flow_curve",
    "closed_curve_index",
    "packet_history",
    "write_packet_csv",
    "PACKET_CSV_COLUMNS",
]

COVERAGE_SIGMAS = 4.0  # half-width, in standard deviations of |psi|^2
FOCAL_TOL = 1e-6


@dataclass(frozen=True)
class GaussianPacket:
    Z: SiegelMatrix
    q0: np.ndarray
    p0: np.ndarray
    S: float = 0.0
    c: complex = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        Z = self.Z if isinstance(self.Z, SiegelMatrix) else SiegelMatrix(self.Z)
        n = Z.n
        q0 = np.asarray(self.q0, dtype=float).reshape(n).copy()
        p0 = np.asarray(self.p0, dtype=float).reshape(n).copy()
        q0.setflags(write=False)
        p0.setflags(write=False)
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if complex(self.c) == 0:
            raise ValueError("packet amplitude must be nonzero")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "S", float(self.S))
        object.__setattr__(self, "c", complex(self.c))

    @property
    def n(self) -> int:
        return self.Z.n

    @classmethod
    def normalized(cls, Z, q0, p0, hbar: float = 1.0, S: float = 0.0) -> GaussianPacket:
        pkt = cls(Z, q0, p0, S, 1.0, hbar)
        return replace(pkt, c=1.0 / pkt.norm())

    def norm(self) -> float:
        """Analytic L2 norm ``|c| (pi hbar)^(n/4) det(Im Z)^(-1/4)``."""
        d = np.linalg.det(self.Z.Z.imag)
        return abs(self.c) * (math.pi * self.hbar) ** (self.n / 4) * d ** -0.25

    def __call__(self, q) -> np.ndarray:
        """Evaluate at points ``q`` (shape ``(m,)`` for n=1 or ``(m, n)``)."""
        q = np.asarray(q, dtype=float)
        if self.n == 1 and (q.ndim <= 1):
            x = q - self.q0[0]
            z = self.Z.Z[0, 0]
            ph = 0.5 * z * x * x + self.p0[0] * x + self.S
        else:
            x = q.reshape(-1, self.n) - self.q0
            ph = 0.5 * np.einsum("mi,ij,mj->m", x, self.Z.Z, x) + x @ self.p0 + self.S
        return self.c * np.exp(1j * ph / self.hbar)

    def sigma(self) -> float:
        """Standard deviation of ``|psi|^2`` (n = 1)."""
        return math.sqrt(self.hbar / (4 * self.Z.Z[0, 0].imag))

    def isclose(self, other: GaussianPacket, tol: float = 1e-10) -> bool:
        return (np.allclose(self.Z.Z, other.Z.Z, atol=tol, rtol=0)
                and np.allclose(self.q0, other.q0, atol=tol, rtol=0)
                and np.allclose(self.p0, other.p0, atol=tol, rtol=0)
                and abs(self.c * np.exp(1j * self.S / self.hbar)
                        - other.c * np.exp(1j * other.S / other.hbar)) <= tol * max(1.0, abs(self.c))
                and self.hbar == other.hbar)


# ---------------------------------------------------------------------
# propagation


@dataclass(frozen=True)
class PropagationDetails:
    trajectory: object
    metaplectic: object
    germs: list = field(repr=False)


def propagate_packet(H: HamiltonianSpec, pkt: GaussianPacket, t0: float, t1: float,
                     control: StepControl | None = None, germ: str = "moebius",
                     return_details: bool = False):
    """Thawed-Gaussian (complex-germ) propagation from ``t0`` to ``t1``.

    ``germ="riccati"`` integrates the germ equation instead of applying the
    tangent blocks; both agree to integrator tolerance.
    """
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    if pkt.n != H.n:
        raise ValueError("packet and Hamiltonian dimensions differ")
    traj = integrate_flow(H, pkt.q0, pkt.p0, t0, t1, control)
    mp = branch_track(traj.path, pkt.Z)
    if germ == "moebius":
        Zs = [moebius_act(b, pkt.Z) for b in traj.blocks]
    elif germ == "riccati":
        Zs = [z for _, z in riccati_integrate(traj, H, pkt.Z)]
    else:
        raise ValueError(f"unknown germ integrator {germ!r}")
    q, p, S, _ = traj.final()
    out = GaussianPacket(Zs[-1], q, p, pkt.S + S, pkt.c / mp.sqrt_value, pkt.hbar)
    if return_details:
        return out, PropagationDetails(traj, mp, Zs)
    return out


def _as_matrix(x, n=None):
    m = np.atleast_2d(np.asarray(x, dtype=float))
    if n is not None and m.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix")
    return m


def exact_quadratic_propagate(a, b, c, pkt: GaussianPacket, t: float) -> GaussianPacket:
    """Exact evolution under ``H = q.a.q/2 + q.b.p + p.c.p/2`` (Weyl quantised).

    The packet is written as ``c exp((i/hbar)(q.Z.q/2 + l.q + kappa))`` with
    complex ``l``; the block ``M = exp(t [[-b, -a], [c, b^T]])`` maps

        Z -> (A Z + B)(C Z + D)^-1,   l -> (C Z + D)^-T l,
        kappa -> kappa - l.(C Z + D)^-1 C l / 2,   c -> c / sqrt(det(C Z + D)),

    the square root continued from 1 along ``s in [0, t]``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    n = pkt.n
    a, b, c_ = _as_matrix(a, n), _as_matrix(b, n), _as_matrix(c, n)
    if t == 0:
        return pkt
    Z = pkt.Z.Z
    h = pkt.hbar
    l = pkt.p0 - Z @ pkt.q0
    kappa = 0.5 * pkt.q0 @ Z @ pkt.q0 - pkt.p0 @ pkt.q0 + pkt.S
    m = max(8, int(math.ceil(8 * t))) + 1
    times = np.linspace(0.0, t, m)
    mp = branch_track(lambda s: quadratic_flow(a, b, c_, s), pkt.Z, times=times)
    M = quadratic_flow(a, b, c_, t)
    W = M.C @ Z + M.D
    Z1 = np.linalg.solve(W.T, (M.A @ Z + M.B).T).T
    Z1 = 0.5 * (Z1 + Z1.T)
    l1 = np.linalg.solve(W.T, l)
    kappa1 = kappa - 0.5 * l @ np.linalg.solve(W, M.C @ l)
    # back to centre form
    q1 = -np.linalg.solve(Z1.imag, l1.imag)
    p1 = l1.real + Z1.real @ q1
    S1 = kappa1 - 0.5 * q1 @ Z1 @ q1 + p1 @ q1
    amp = pkt.c / mp.sqrt_value * np.exp(-S1.imag / h)
    return GaussianPacket(SiegelMatrix(Z1), q1, p1, float(S1.real), amp, h)


def packet_to_grid(pkt: GaussianPacket, grid: Grid1D) -> WavefunctionGrid:
    """Sample a one-dimensional packet; the grid must cover +-4 sigma of ``|psi|^2``."""
    if pkt.n != 1:
        raise ValueError("grid sampling is one-dimensional")
    s = pkt.sigma()
    lo, hi = pkt.q0[0] - COVERAGE_SIGMAS * s, pkt.q0[0] + COVERAGE_SIGMAS * s
    if lo < grid.x_min or hi > grid.x_max - grid.dx:
        raise GridError(f"grid [{grid.x_min}, {grid.x_max}) does not cover the packet [{lo:.3g}, {hi:.3g}]")
    return WavefunctionGrid(grid, pkt(grid.x), pkt.hbar)


def packet_fourier(pkt: GaussianPacket) -> GaussianPacket:
    """The packet in the momentum representation (n = 1), same convention as ``fourier_h``.

    ``Z -> -1/Z``, centre ``(p0, -q0)``, ``S -> S - p0 q0``, ``c -> c sqrt(i/Z)``.
    """
    if pkt.n != 1:
        raise NotImplementedError("momentum representation implemented for n = 1")
    z = pkt.Z.Z[0, 0]
    q0, p0 = pkt.q0[0], pkt.p0[0]
    return GaussianPacket(SiegelMatrix.scalar(-1 / z), [p0], [-q0], pkt.S - p0 * q0,
                          pkt.c * np.sqrt(1j / z), pkt.hbar)


def transport_amplitude(path, Z_real_graph, k: int | None = None, **maslov_kw) -> complex:
    """Amplitude factor ``exp(-i pi k / 2) / sqrt|det dq(t)/dq(0)|`` on a real graph.

    ``path`` is a :class:`Trajectory` or list of ``(t, SymplecticBlock)``;
    ``k`` defaults to the path's Maslov index.
    """
    samples = path.path if hasattr(path, "path") else list(path)
    Zr = _as_matrix(Z_real_graph)
    last = samples[-1][1]
    det = float(np.linalg.det(last.C @ Zr + last.D))
    if abs(det) <= 1e-12:
        raise CausticError("endpoint of the transport lies on a caustic")
    if k is None:
        k = maslov_index(samples, Zr, **maslov_kw) if len(samples) > 1 else 0
    return complex(np.exp(-0.5j * math.pi * k) / math.sqrt(abs(det)))


# ---------------------------------------------------------------------
# Lagrangian curves (n = 1)


@dataclass(frozen=True)
class LagrangianCurve:
    """A family of packets ``A(alpha) exp((i/hbar)(S + p0 (q-q0) + Zf (q-q0)^2 / 2))``.

    The envelope in the scaled variable ``x = (q - q0)/sqrt(hbar)`` is
    ``f(alpha, x) = A(alpha) exp(i Zf(alpha) x^2 / 2)``.  Construction checks
    ``dS/dalpha = p0 dq0/dalpha`` to ``curve_tol``.
    """

    alpha: np.ndarray
    q0: np.ndarray
    p0: np.ndarray
    S: np.ndarray
    Zf: np.ndarray
    amp: np.ndarray
    curve_tol: float = 1e-3
    closed: bool = False

    def __post_init__(self):
        al = np.asarray(self.alpha, dtype=float)
        m = al.shape[0]
        if al.ndim != 1 or m < 4 or np.any(np.diff(al) <= 0):
            raise ValueError("alpha must be a strictly increasing array with at least 4 samples")
        arrs = {}
        for name, dt in (("q0", float), ("p0", float), ("S", float), ("Zf", complex), ("amp", complex)):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=dt), (m,)).copy()
            v.setflags(write=False)
            arrs[name] = v
        if np.any(arrs["Zf"].imag <= 0):
            raise ValueError("envelope germs must have positive imaginary part")
        al.setflags(write=False)
        object.__setattr__(self, "alpha", al)
        for k, v in arrs.items():
            object.__setattr__(self, k, v)
        r41 = self.eq41_residual()
        if r41 > self.curve_tol:
            raise LagrangianError(f"|dS/dalpha - p0 dq0/dalpha| = {r41:.3e} exceeds curve_tol {self.curve_tol:g}")

    @classmethod
    def graph(cls, S_func, dS_func, alpha, amp_func, Zf=1j, **kw) -> LagrangianCurve:
        """The graph ``p = S'(q)`` parametrised by ``q0 = alpha``."""
        al = np.asarray(alpha, dtype=float)
        return cls(al, al, dS_func(al), S_func(al), np.full(al.shape, Zf, dtype=complex), amp_func(al), **kw)

    def _derivs(self):
        if self.closed:
            # periodic samples: the last sample is not repeated
            return _periodic_grad(self.q0, self.alpha), _periodic_grad(self.p0, self.alpha)
        return (np.gradient(self.q0, self.alpha, edge_order=2),
                np.gradient(self.p0, self.alpha, edge_order=2))

    def eq41_residual(self) -> float:
        """``max |dS/dalpha - p0 dq0/dalpha|`` (second-order differences)."""
        Q, _ = self._derivs()
        if self.closed:
            # S is multivalued on a loop; continue it past the last sample
            jump = 3 * self.S[-1] - 3 * self.S[-2] + self.S[-3] - self.S[0]
            dS = _periodic_grad(self.S, self.alpha, jump)
        else:
            dS = np.gradient(self.S, self.alpha, edge_order=2)
        return float(np.max(np.abs(dS - self.p0 * Q)))

    def loop_action(self) -> float:
        """``oint p0 dq0`` over a closed curve (the jump of ``S`` after one turn)."""
        if not self.closed:
            raise ValueError("curve is not closed")
        m = len(self.alpha)
        period = self.alpha[-1] - self.alpha[0] + (self.alpha[1] - self.alpha[0])
        if np.ptp(np.diff(self.alpha)) > 1e-9 * period:
            Q = _periodic_grad(self.q0, self.alpha)
            return float(np.sum(self.p0 * Q * _trapezoid_weights(self.alpha, True)))
        k = 2j * math.pi * np.fft.fftfreq(m, period / m)
        Q = np.fft.ifft(k * np.fft.fft(self.q0)).real
        return float(np.sum(self.p0 * Q) * period / m)

    def eq42_residual(self) -> float:
        """Antisymmetrised ``P_i Q_i' - P_i' Q_i`` sum; identically 0 for one parameter."""
        Q, P = self._derivs()
        return float(np.max(np.abs(P * Q - P * Q)))

    def tangents(self):
        return self._derivs()

    def packet(self, k: int, hbar: float) -> GaussianPacket:
        return GaussianPacket(SiegelMatrix.scalar(self.Zf[k]), [self.q0[k]], [self.p0[k]],
                              self.S[k], self.amp[k], hbar)


def _period_fix(alpha):
    fix = np.zeros_like(alpha)
    period = alpha[-1] - alpha[0] + (alpha[1] - alpha[0])
    fix[0] = period
    fix[-1] = period
    return fix


def _periodic_grad(v, alpha, jump: float = 0.0):
    right, left = np.roll(v, -1), np.roll(v, 1)
    right[-1] += jump
    left[0] -= jump
    return (right - left) / (np.roll(alpha, -1) - np.roll(alpha, 1) + _period_fix(alpha))


def _trapezoid_weights(alpha, closed=False):
    d = np.diff(alpha)
    w = np.zeros_like(alpha)
    w[:-1] += d / 2
    w[1:] += d / 2
    if closed:
        gap = alpha[1] - alpha[0]
        w[0] += gap / 2
        w[-1] += gap / 2
    return w


def _superpose(curve, idx, hbar, x, chunk=256):
    w = _trapezoid_weights(curve.alpha[idx], curve.closed)
    out = np.zeros(x.shape, dtype=complex)
    for s in range(0, len(idx), chunk):
        sl = idx[s:s + chunk]
        dx = x[None, :] - curve.q0[sl, None]
        ph = curve.S[sl, None] + curve.p0[sl, None] * dx + 0.5 * curve.Zf[sl, None] * dx * dx
        out += (w[s:s + chunk, None] * curve.amp[sl, None] * np.exp(1j * ph / hbar)).sum(axis=0)
    return out / math.sqrt(hbar)


def canonical_superpose(curve: LagrangianCurve, hbar: float, grid: Grid1D,
                        quad_tol: float = 1e-8) -> WavefunctionGrid:
    """Trapezoid quadrature over ``alpha`` of the packet family, measure ``dalpha / sqrt(hbar)``.

    The result is recomputed on every other ``alpha`` sample; a relative L2
    change above ``quad_tol`` raises :class:`ConvergenceError`.
    """
    x = grid.x
    m = len(curve.alpha)
    full = _superpose(curve, np.arange(m), hbar, x)
    half_idx = np.arange(0, m, 2)
    if not curve.closed and half_idx[-1] != m - 1:
        half_idx = np.append(half_idx, m - 1)
    if curve.closed and m % 2:
        raise ValueError("closed curves need an even number of samples for the doubling check")
    half = _superpose(curve, half_idx, hbar, x)
    scale = max(np.sqrt(np.sum(np.abs(full) ** 2)), 1e-300)
    change = float(np.sqrt(np.sum(np.abs(full - half) ** 2)) / scale)
    if change > quad_tol:
        raise ConvergenceError(f"alpha quadrature not converged: halving the resolution changes the result by {change:.2e}")
    return WavefunctionGrid(grid, full, hbar)


def _splines(curve: LagrangianCurve):
    kw = {"bc_type": "periodic"} if curve.closed else {}
    if curve.closed:
        period = curve.alpha[-1] - curve.alpha[0] + (curve.alpha[1] - curve.alpha[0])
        al = np.append(curve.alpha, curve.alpha[0] + period)

        def ext(v):
            return np.append(v, v[0])
    else:
        al = curve.alpha

        def ext(v):
            return v
    return {name: CubicSpline(al, ext(getattr(curve, name)), **kw)
            for name in ("q0", "p0", "S", "Zf", "amp")}


def stationary_phase_reconstruct(curve: LagrangianCurve, alpha0: float, hbar: float,
                                 splines=None):
    """Leading term ``(S, a)`` of the superposition at ``q = q0(alpha0)``.

    ``a = A / |Q| * sqrt(2 pi i / (Zf - P/Q))`` with ``Q = dq0/dalpha`` and
    ``P = dp0/dalpha``, the closed form of the Fresnel-Gaussian integral.
    """
    sp = splines or _splines(curve)
    Q = float(sp["q0"](alpha0, 1))
    P = float(sp["p0"](alpha0, 1))
    if abs(Q) <= FOCAL_TOL * max(1.0, abs(P)):
        raise CausticError(f"focal point at alpha={alpha0:.6g}: dq0/dalpha = {Q:.2e}")
    zf = complex(sp["Zf"](alpha0))
    A = complex(sp["amp"](alpha0))
    a = A / abs(Q) * np.sqrt(2j * math.pi / (zf - P / Q))
    return float(sp["S"](alpha0)), complex(a)


def _preimages(q0, x):
    """Sample intervals ``[k, k+1]`` where ``q0`` crosses each ``x``."""
    d = q0[None, :] - x[:, None]
    s = np.sign(d)
    hits = []
    for j in range(len(x)):
        idx = np.nonzero(s[j, :-1] * s[j, 1:] <= 0)[0]
        hits.append(idx)
    return hits


def reconstruct_wkb(curve: LagrangianCurve, hbar: float, grid: Grid1D,
                    representation: str = "q") -> WavefunctionGrid:
    """Sum of leading stationary-phase terms over every preimage of each grid point.

    With ``representation="p"`` the construction is carried out for the
    momentum-space curve and mapped back by the inverse transform, which
    stays regular where the curve has vertical tangents in ``(q, p)``.
    """
    if representation == "p":
        mcurve = momentum_curve(curve)
        dual = grid.dual(hbar)
        tilde = reconstruct_wkb(mcurve, hbar, dual, "q")
        back = fourier_h(tilde, edge_tol=1e-6)
        j = np.arange(grid.N)
        vals = back.values[(grid.N - j) % grid.N]
        if back.grid != grid:
            raise GridError("inverse transform requires a symmetric self-consistent grid")
        return WavefunctionGrid(grid, vals, hbar)
    if representation != "q":
        raise ValueError("representation must be 'q' or 'p'")
    sp = _splines(curve)
    x = grid.x
    out = np.zeros(x.shape, dtype=complex)
    hits = _preimages(curve.q0, x)
    for j, idx in enumerate(hits):
        for k in idx:
            q_a, q_b = curve.q0[k], curve.q0[k + 1]
            al = curve.alpha[k] if q_b == q_a else curve.alpha[k] + (x[j] - q_a) / (q_b - q_a) * (curve.alpha[k + 1] - curve.alpha[k])
            for _ in range(3):
                Q = float(sp["q0"](al, 1))
                if Q == 0:
                    break
                al = al - (float(sp["q0"](al)) - x[j]) / Q
            S, a = stationary_phase_reconstruct(curve, al, hbar, sp)
            out[j] += a * np.exp(1j * S / hbar)
    return WavefunctionGrid(grid, out, hbar)


def momentum_curve(curve: LagrangianCurve) -> LagrangianCurve:
    """The packet family after ``fourier_h``: see :func:`packet_fourier`."""
    z = curve.Zf
    return LagrangianCurve(curve.alpha, curve.p0, -curve.q0, curve.S - curve.p0 * curve.q0,
                           -1 / z, curve.amp * np.sqrt(1j / z), curve.curve_tol, curve.closed)


def flow_curve(curve: LagrangianCurve, H: HamiltonianSpec, t: float,
               control: StepControl | None = None) -> LagrangianCurve:
    """Move every packet of the family along the Hamilton flow for time ``t``."""
    q, p, S, Z, A = [], [], [], [], []
    for k in range(len(curve.alpha)):
        pk = curve.packet(k, 1.0)
        out = propagate_packet(H, pk, 0.0, t, control)
        q.append(out.q0[0])
        p.append(out.p0[0])
        S.append(out.S)
        Z.append(out.Z.Z[0, 0])
        A.append(out.c)
    return LagrangianCurve(curve.alpha, q, p, S, Z, A, curve.curve_tol, curve.closed)


def closed_curve_index(curve: LagrangianCurve) -> int:
    """Maslov index of a closed curve: signed count of vertical tangents.

    Clockwise passage of the tangent line through the vertical counts +1,
    the orientation under which the harmonic flow of a horizontal line
    crosses its first caustic with index +1.
    """
    if not curve.closed:
        raise ValueError("curve is not closed")
    Q, P = curve.tangents()
    th = np.unwrap(np.append(np.arctan2(P, Q), math.atan2(P[0], Q[0])))
    return int(round(-(th[-1] - th[0]) / math.pi))


# ---------------------------------------------------------------------
# CSV history


PACKET_CSV_COLUMNS = ("t", "q0", "p0", "re_Z", "im_Z", "S", "re_amp", "im_amp", "maslov_phase")


def packet_history(H: HamiltonianSpec, pkt: GaussianPacket, t0: float, t1: float,
                   n_out: int = 11, control: StepControl | None = None) -> list:
    """Rows of :data:`PACKET_CSV_COLUMNS` at ``n_out`` equally spaced times (n = 1).

    ``maslov_phase`` is the accumulated argument of ``1/sqrt(det(C Z0 + D))``.
    """
    if pkt.n != 1:
        raise ValueError("history output is one-dimensional")
    times = np.linspace(t0, t1, n_out)
    traj = integrate_flow(H, pkt.q0, pkt.p0, t0, t1, control, t_eval=list(times))
    mp = branch_track(traj.path, pkt.Z)
    rows = []
    for t in times:
        i = int(np.argmin(np.abs(traj.t - t)))
        j = int(np.argmin(np.abs(mp.times - t)))
        Z = moebius_act(traj.blocks[i], pkt.Z).Z[0, 0]
        amp = pkt.c / mp.sqrt_at(j)
        rows.append({
            "t": float(t), "q0": float(traj.q[i, 0]), "p0": float(traj.p[i, 0]),
            "re_Z": float(Z.real), "im_Z": float(Z.imag), "S": float(pkt.S + traj.S[i]),
            "re_amp": float(amp.real), "im_amp": float(amp.imag),
            "maslov_phase": float(-0.5 * mp.args[j]),
        })
    return rows


def write_packet_csv(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(PACKET_CSV_COLUMNS))
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(r[k]) for k in PACKET_CSV_COLUMNS})
