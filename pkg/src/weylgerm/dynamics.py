"""Hamilton flow with action and monodromy, plus germ (Riccati) transport.

Phase-space blocks act on ``(p, q)`` perturbations:

    (dp, dq)(t) = [[A, B], [C, D]] (dp, dq)(0),

so the variational equation has generator ``[[-H_qp, -H_qq], [H_pp, H_pq]]``
with ``H_qp[i, j] = d2H / dq_i dp_j``.  The action obeys
``dS/dt = p . H_p - H`` with ``S(t0) = 0``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CausticError, EscapeError, NumericalError, StepUnderflowError
from .moyal import PolySymbol, parse_symbol
from .symplectic import PD_TOL, SiegelMatrix, SymplecticBlock, riccati_rhs, symplectify

__all__ = [
    "HamiltonianSpec",
    "StepControl",
    "Trajectory",
    "builtin_hamiltonian",
    "hamiltonian_from_text",
    "integrate_flow",
    "riccati_integrate",
    "jacobian_amplitude",
    "graph_jacobians",
]

_EPS = np.finfo(float).eps
FD_STEP = _EPS ** (1 / 3)
CAUSTIC_TOL = 1e-8
SYMPLECTIFY_AT = 1e-10


@dataclass(frozen=True)
class HamiltonianSpec:
    """A Hamiltonian ``H(t, p, q)`` with first and second derivatives.

    ``grad`` returns ``(H_p, H_q)``; ``hess`` returns ``(H_pp, H_pq, H_qq)``
    with ``H_pq[i, j] = d2H / dp_i dq_j``.  Missing derivatives are taken
    by central differences with step ``fd_step * max(1, |x|)``.
    """

    n: int
    func: Callable
    grad_func: Callable | None = None
    hess_func: Callable | None = None
    fd_step: float = FD_STEP
    symbol: PolySymbol | None = None
    separable: tuple | None = None
    name: str = "custom"
    time_independent: bool = True

    @property
    def derivative_mode(self) -> str:
        return "analytic" if self.grad_func is not None and self.hess_func is not None else "finite_difference"

    def __call__(self, t, p, q) -> float:
        return float(self.func(t, _vec(p, self.n), _vec(q, self.n)))

    def grad(self, t, p, q):
        p, q = _vec(p, self.n), _vec(q, self.n)
        if self.grad_func is not None:
            Hp, Hq = self.grad_func(t, p, q)
            return np.asarray(Hp, dtype=float).reshape(self.n), np.asarray(Hq, dtype=float).reshape(self.n)
        return self._fd_grad(t, p, q)

    def _fd_grad(self, t, p, q):
        n = self.n
        x = np.concatenate([p, q])
        g = np.empty(2 * n)
        for k in range(2 * n):
            h = self.fd_step * max(1.0, abs(x[k]))
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            g[k] = (self.func(t, xp[:n], xp[n:]) - self.func(t, xm[:n], xm[n:])) / (2 * h)
        return g[:n], g[n:]

    def hess(self, t, p, q):
        p, q = _vec(p, self.n), _vec(q, self.n)
        n = self.n
        if self.hess_func is not None:
            Hpp, Hpq, Hqq = (np.asarray(m, dtype=float).reshape(n, n) for m in self.hess_func(t, p, q))
            return Hpp, Hpq, Hqq
        # differentiate the gradient (analytic or not) once more
        x = np.concatenate([p, q])
        Hm = np.empty((2 * n, 2 * n))
        for k in range(2 * n):
            h = self.fd_step * max(1.0, abs(x[k]))
            if self.grad_func is None:
                h = _EPS ** 0.25 * max(1.0, abs(x[k]))
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            gp = np.concatenate(self.grad(t, xp[:n], xp[n:]))
            gm = np.concatenate(self.grad(t, xm[:n], xm[n:]))
            Hm[:, k] = (gp - gm) / (2 * h)
        Hm = 0.5 * (Hm + Hm.T)
        return Hm[:n, :n], Hm[:n, n:], Hm[n:, n:]

    def with_finite_differences(self, step: float | None = None) -> HamiltonianSpec:
        return HamiltonianSpec(self.n, self.func, None, None, step or self.fd_step, self.symbol,
                               self.separable, self.name + "[fd]", self.time_independent)

    @classmethod
    def from_symbol(cls, symbol: PolySymbol, name: str | None = None) -> HamiltonianSpec:
        """Classical Hamiltonian from the hbar-free part of a symbol (analytic derivatives)."""
        n = symbol.n
        principal = symbol.hbar_part(0)
        if any(c.im != 0 for c in principal.terms.values()):
            raise ValueError("Hamiltonian symbol must have real coefficients")
        dp = [principal.diff(n + i) for i in range(n)]
        dq = [principal.diff(i) for i in range(n)]
        dpp = [[d.diff(n + j) for j in range(n)] for d in dp]
        dpq = [[d.diff(j) for j in range(n)] for d in dp]
        dqq = [[d.diff(j) for j in range(n)] for d in dq]

        def ev(f, p, q):
            return f(q, p, 0.0).real

        def func(t, p, q):
            return ev(principal, p, q)

        def grad(t, p, q):
            return np.array([ev(f, p, q) for f in dp]), np.array([ev(f, p, q) for f in dq])

        def hess(t, p, q):
            return tuple(np.array([[ev(f, p, q) for f in row] for row in m]) for m in (dpp, dpq, dqq))

        mixed = any(any(e[:n]) and any(e[n:]) for e, _hp in symbol.terms)
        return cls(n, func, grad, hess, symbol=symbol, separable=None if mixed else "symbol",
                   name=name or str(symbol))


def _vec(x, n):
    return np.asarray(x, dtype=float).reshape(n)


def builtin_hamiltonian(name: str, param: float | None = None) -> HamiltonianSpec:
    """``free``: p^2/2; ``harmonic(w)``: (p^2 + w^2 q^2)/2; ``quartic(lam)``:
    p^2/2 + lam q^4/4; ``pendulum``: p^2/2 + 1 - cos q.  All with n = 1."""
    if name == "free":
        sym = parse_symbol("(1/2)*p1^2", 1)
        return HamiltonianSpec.from_symbol(sym, "free")
    if name == "harmonic":
        w = 1.0 if param is None else float(param)
        if w <= 0:
            raise ValueError("harmonic frequency must be positive")
        w2 = float(w) ** 2
        H = HamiltonianSpec(
            1,
            lambda t, p, q: 0.5 * (p[0] ** 2 + w2 * q[0] ** 2),
            lambda t, p, q: (np.array([p[0]]), np.array([w2 * q[0]])),
            lambda t, p, q: (np.eye(1), np.zeros((1, 1)), w2 * np.eye(1)),
            symbol=parse_symbol("(1/2)*p1^2", 1) + PolySymbol.q() ** 2 * PolySymbol.const(_frac(w2 / 2)),
            separable="symbol", name=f"harmonic({w:g})")
        return H
    if name == "quartic":
        lam = 1.0 if param is None else float(param)
        return HamiltonianSpec(
            1,
            lambda t, p, q: 0.5 * p[0] ** 2 + 0.25 * lam * q[0] ** 4,
            lambda t, p, q: (np.array([p[0]]), np.array([lam * q[0] ** 3])),
            lambda t, p, q: (np.eye(1), np.zeros((1, 1)), np.array([[3 * lam * q[0] ** 2]])),
            symbol=parse_symbol("(1/2)*p1^2", 1) + PolySymbol.q() ** 4 * PolySymbol.const(_frac(lam / 4)),
            separable="symbol", name=f"quartic({lam:g})")
    if name == "pendulum":
        sep = (lambda p, hbar: 0.5 * p ** 2, lambda q, hbar: 1.0 - np.cos(q))
        return HamiltonianSpec(
            1,
            lambda t, p, q: 0.5 * p[0] ** 2 + 1.0 - math.cos(q[0]),
            lambda t, p, q: (np.array([p[0]]), np.array([math.sin(q[0])])),
            lambda t, p, q: (np.eye(1), np.zeros((1, 1)), np.array([[math.cos(q[0])]])),
            separable=sep, name="pendulum")
    raise ValueError(f"unknown built-in Hamiltonian {name!r}")


def _frac(x: float):
    from fractions import Fraction
    return Fraction(x).limit_denominator(10 ** 12) if math.isfinite(x) else x


_BUILTIN_RE = re.compile(r"^\s*(free|harmonic|quartic|pendulum)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def hamiltonian_from_text(text: str, n: int = 1) -> HamiltonianSpec:
    """Built-in name such as ``harmonic(2)`` or a polynomial in the symbol grammar."""
    m = _BUILTIN_RE.match(text)
    if m:
        if n != 1:
            raise ValueError("built-in Hamiltonians have one degree of freedom")
        return builtin_hamiltonian(m.group(1), float(m.group(2)) if m.group(2) else None)
    return HamiltonianSpec.from_symbol(parse_symbol(text, n))


def oracle_hamiltonian(H: HamiltonianSpec):
    """What the grid oracle needs: ``.separable`` pair or ``.symbol``."""
    if isinstance(H.separable, tuple):
        return H
    if H.symbol is None:
        raise ValueError(f"Hamiltonian {H.name} has no quantum symbol for the grid oracle")
    return H.symbol


# ---------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class StepControl:
    tol: float = 1e-10
    h0: float | None = None
    h_min: float = 1e-12
    h_max: float = 0.1
    max_steps: int = 2_000_000
    escape_bound: float = 1e8
    method: str = "rk4"  # or "leapfrog" (fixed step h0, separable H only)


@dataclass(frozen=True)
class Trajectory:
    """Samples of the flow.  ``blocks[k]`` maps perturbations at ``t[0]`` to ``t[k]``."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    S: np.ndarray
    blocks: tuple
    H: HamiltonianSpec = field(repr=False)

    @property
    def n(self) -> int:
        return self.q.shape[1]

    def __len__(self):
        return len(self.t)

    @property
    def path(self) -> list:
        return list(zip(self.t.tolist(), self.blocks))

    def final(self):
        return self.q[-1], self.p[-1], float(self.S[-1]), self.blocks[-1]

    def energy(self) -> np.ndarray:
        return np.array([self.H(t, p, q) for t, p, q in zip(self.t, self.p, self.q)])


def _rhs(H: HamiltonianSpec, t, y, n):
    q, p = y[:n], y[n:2 * n]
    M = y[2 * n + 1:].reshape(2 * n, 2 * n)
    Hp, Hq = H.grad(t, p, q)
    Hpp, Hpq, Hqq = H.hess(t, p, q)
    K = np.block([[-Hpq.T, -Hqq], [Hpp, Hpq]])
    out = np.empty_like(y)
    out[:n] = Hp
    out[n:2 * n] = -Hq
    out[2 * n] = p @ Hp - H(t, p, q)
    out[2 * n + 1:] = (K @ M).ravel()
    return out


def _rk4(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _leapfrog(H, t, y, h, n):
    """Kick-drift-kick for ``H = T(p) + V(q)``, with the exact tangent map."""
    q, p, S = y[:n].copy(), y[n:2 * n].copy(), y[2 * n]
    M = y[2 * n + 1:].reshape(2 * n, 2 * n).copy()
    O, I, zero = np.zeros((n, n)), np.eye(n), np.zeros(n)

    def kick(q, p, M, S, dt, tt):
        _, Hq = H.grad(tt, p, q)
        _, _, Hqq = H.hess(tt, p, q)
        V = H(tt, zero, q) - H(tt, zero, zero)
        return p - dt * Hq, np.block([[I, -dt * Hqq], [O, I]]) @ M, S - dt * V

    p, M, S = kick(q, p, M, S, h / 2, t)
    Hp, _ = H.grad(t, p, q)
    Hpp, _, _ = H.hess(t, p, q)
    S = S + h * (p @ Hp - H(t, p, zero))
    q = q + h * Hp
    M = np.block([[I, O], [h * Hpp, I]]) @ M
    p, M, S = kick(q, p, M, S, h / 2, t + h)
    return np.concatenate([q, p, [S], M.ravel()])


def integrate_flow(H: HamiltonianSpec, q0, p0, t0: float, t1: float,
                   control: StepControl | None = None, t_eval=None) -> Trajectory:
    """Integrate Hamilton's equations, the action and the variational flow together.

    Every accepted step is sampled; ``t_eval`` forces steps to land on
    the given times as well.  Adaptive steps use step doubling with local
    extrapolation; the error per step is kept below
    ``tol * (1 + |y|)``.
    """
    control = control or StepControl()
    n = H.n
    q0, p0 = _vec(q0, n), _vec(p0, n)
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    y = np.concatenate([q0, p0, [0.0], np.eye(2 * n).ravel()])
    ts, ys = [t0], [y]
    if t1 == t0:
        return _pack(H, ts, ys, n)
    stops = sorted({float(s) for s in (t_eval or []) if t0 < s < t1} | {float(t1)})
    f = lambda t, y: _rhs(H, t, y, n)  # noqa: E731
    t = t0
    if control.method == "leapfrog":
        if H.separable is None:
            raise ValueError("leapfrog needs a separable Hamiltonian")
        h_nom = control.h0 or 1e-3
        for stop in stops:
            m = max(1, int(math.ceil((stop - t) / h_nom - 1e-12)))
            h = (stop - t) / m
            for _ in range(m):
                y = _leapfrog(H, t, y, h, n)
                t += h
                y = _maybe_symplectify(y, n)
                _check_escape(y, n, control, t)
                ts.append(t)
                ys.append(y)
            t = stop
        return _pack(H, ts, ys, n)
    if control.method != "rk4":
        raise ValueError(f"unknown integrator {control.method!r}")
    h = control.h0 or min(control.h_max, (t1 - t0) / 16, 1e-2)
    steps = 0
    for stop in stops:
        while t < stop:
            h = min(h, control.h_max, stop - t)
            # absorb a remainder too small to be a step of its own
            if stop - t - h <= 1e-12 * max(1.0, abs(stop)):
                h = stop - t
            last = h >= stop - t
            y_big = _rk4(f, t, y, h)
            y_half = _rk4(f, t + h / 2, _rk4(f, t, y, h / 2), h / 2)
            diff = (y_half - y_big) / 15
            scale = control.tol * (1 + np.abs(y_half))
            err = float(np.max(np.abs(diff) / scale))
            if not np.all(np.isfinite(y_half)):
                err = np.inf
            if err <= 1.0:
                t = stop if last else t + h
                y = _maybe_symplectify(y_half + diff, n)
                _check_escape(y, n, control, t)
                ts.append(t)
                ys.append(y)
                steps += 1
                if steps > control.max_steps:
                    raise NumericalError("maximum number of steps exceeded")
            fac = 0.9 * (1.0 / max(err, 1e-10)) ** 0.2
            h = h * min(4.0, max(0.2, fac))
            if h < control.h_min and t < stop:
                raise StepUnderflowError(f"step size {h:.2e} below minimum at t={t:.6g}")
    return _pack(H, ts, ys, n)


def _maybe_symplectify(y, n):
    M = y[2 * n + 1:].reshape(2 * n, 2 * n)
    blk = SymplecticBlock.from_matrix(M)
    if blk.defect() > SYMPLECTIFY_AT:
        y = y.copy()
        y[2 * n + 1:] = symplectify(blk).matrix.ravel()
    return y


def _check_escape(y, n, control, t):
    if not np.all(np.isfinite(y)) or np.max(np.abs(y[:2 * n])) > control.escape_bound:
        raise EscapeError(f"trajectory left the bound {control.escape_bound:g} at t={t:.6g}")


def _pack(H, ts, ys, n):
    Y = np.array(ys)
    blocks = tuple(SymplecticBlock.from_matrix(row[2 * n + 1:].reshape(2 * n, 2 * n)) for row in Y)
    return Trajectory(np.array(ts), Y[:, :n].copy(), Y[:, n:2 * n].copy(), Y[:, 2 * n].copy(), blocks, H)


# ---------------------------------------------------------------------
# germ transport


def _riccati_full(H, t, y, n):
    q, p = y[:n].real, y[n:2 * n].real
    Z = y[2 * n:].reshape(n, n)
    Hp, Hq = H.grad(t, p, q)
    Hpp, Hpq, Hqq = H.hess(t, p, q)
    out = np.empty_like(y)
    out[:n] = Hp
    out[n:2 * n] = -Hq
    out[2 * n:] = riccati_rhs(Hqq, Hpq.T, Hpp, Z).ravel()
    return out


def riccati_integrate(traj: Trajectory, H: HamiltonianSpec, Z0, tol: float = 1e-11) -> list:
    """Solve the germ equation ``Z' = -(Z H_pp Z + H_qp Z + Z H_pq + H_qq)``.

    The centre is re-integrated jointly with ``Z`` by adaptive RK4 that
    lands on every trajectory sample, so the result does not use the
    block data.  Returns ``[(t, SiegelMatrix)]`` at the sample times.
    """
    Z0 = Z0 if isinstance(Z0, SiegelMatrix) else SiegelMatrix(Z0)
    n = H.n
    y = np.concatenate([traj.q[0], traj.p[0], Z0.Z.ravel()]).astype(complex)
    f = lambda t, y: _riccati_full(H, t, y, n)  # noqa: E731
    out = [(float(traj.t[0]), Z0)]
    h = None
    for t0, t1 in zip(traj.t[:-1], traj.t[1:]):
        t = float(t0)
        h = (t1 - t0) if h is None else h
        while t < t1:
            h = min(h, t1 - t)
            if t1 - t - h <= 1e-12 * max(1.0, abs(t1)):
                h = t1 - t
            big = _rk4(f, t, y, h)
            fine = _rk4(f, t + h / 2, _rk4(f, t, y, h / 2), h / 2)
            diff = (fine - big) / 15
            err = float(np.max(np.abs(diff) / (tol * (1 + np.abs(fine)))))
            if not np.all(np.isfinite(fine)):
                err = np.inf
            if err <= 1.0:
                t = float(t1) if h >= t1 - t else t + h
                y = fine + diff
            h *= min(4.0, max(0.2, 0.9 * max(err, 1e-10) ** -0.2))
            if h < 1e-14 * max(1.0, abs(t)):
                raise StepUnderflowError(f"germ integration step underflow at t={t:.6g}")
        Z = y[2 * n:].reshape(n, n)
        Z = 0.5 * (Z + Z.T)
        if np.min(np.linalg.eigvalsh(Z.imag)) <= -PD_TOL:
            raise NumericalError(f"Im Z lost positive definiteness at t={t1:.6g}")
        try:
            out.append((float(t1), SiegelMatrix(Z)))
        except ValueError as exc:
            raise NumericalError(f"germ left the Siegel half-space at t={t1:.6g}: {exc}") from None
    return out


def graph_jacobians(traj: Trajectory, Z_graph=None) -> np.ndarray:
    """``det(C Z + D)`` at every sample, i.e. ``det dq(t)/dq(0)`` on the graph ``p = Z q``."""
    n = traj.n
    Zg = np.zeros((n, n)) if Z_graph is None else np.atleast_2d(np.asarray(Z_graph, dtype=float))
    return np.array([np.linalg.det(b.C @ Zg + b.D) for b in traj.blocks])


def jacobian_amplitude(traj: Trajectory, Z_graph=None) -> complex:
    """``1 / sqrt(det dq(t)/dq(0))`` at the last sample, continued from 1.

    ``Z_graph`` is the real symmetric matrix of the initial Lagrangian graph
    ``p = Z q`` (default 0).  A vanishing or sign-changing determinant is a
    focal point and raises :class:`CausticError`; use the Maslov-index
    machinery in :mod:`weylgerm.germ` past it.
    """
    dets = graph_jacobians(traj, Z_graph)
    bad = np.nonzero(dets <= CAUSTIC_TOL)[0]
    if bad.size:
        tc = traj.t[bad[0]]
        raise CausticError(f"focal point: det dq(t)/dq(0) = {dets[bad[0]]:.3e} at t={tc:.6g}")
    return complex(1.0 / math.sqrt(dets[-1]))
