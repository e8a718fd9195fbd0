"""Linear symplectic geometry: Sp(2n, R), the Siegel half-plane, metaplectic
square-root branches and the Maslov index.

Blocks act on phase-space vectors ordered ``(p, q)``::

    p' = A p + B q
    q' = C p + D q

so the Lagrangian graph ``p = Z q`` is carried to ``p = Z' q`` with
``Z' = (A Z + B)(C Z + D)^{-1}``.  The Hamiltonian flow of the quadratic
Hamiltonian ``H = q.a.q/2 + q.b.p + p.c.p/2`` is
``exp(t [[-b, -a], [c, b^T]])``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm, logm

from .errors import (BranchError, CausticError, InconclusiveError,
                     SymplecticDefectError)

__all__ = [
    "PD_TOL",
    "SYM_TOL",
    "MAX_ARG_STEP",
    "MASLOV_SIGN",
    "SymplecticBlock",
    "SiegelMatrix",
    "RealLagrangian",
    "MetaplecticPath",
    "J",
    "is_symplectic",
    "symplectify",
    "moebius_act",
    "riccati_rhs",
    "quadratic_flow",
    "branch_track",
    "maslov_index",
    "weil_generator_matrix",
]

PD_TOL = 1e-12
SYM_TOL = 1e-8
# largest accepted change of arg det(CZ+D) between consecutive samples
MAX_ARG_STEP = math.pi / 2
# k is defined by exp(MASLOV_SIGN * i pi k / 2) = sqrt|det(CZ+D)| / sqrt_value;
# frozen against grid propagation (half a harmonic period gives k = +1)
MASLOV_SIGN = -1


def J(n: int) -> np.ndarray:
    E = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, E], [-E, Z]])


def _frozen(x, dtype=float) -> np.ndarray:
    a = np.array(x, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SymplecticBlock:
    """Real ``2n x 2n`` matrix ``[[A, B], [C, D]]`` acting on ``(p, q)``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        blocks = [np.atleast_2d(np.asarray(x, dtype=float)) for x in (self.A, self.B, self.C, self.D)]
        n = blocks[0].shape[0]
        if any(b.shape != (n, n) for b in blocks):
            raise ValueError("A, B, C, D must all be n x n")
        for name, b in zip("ABCD", blocks):
            object.__setattr__(self, name, _frozen(b))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    @classmethod
    def from_matrix(cls, M) -> SymplecticBlock:
        M = np.asarray(M, dtype=float)
        n = M.shape[0] // 2
        if M.shape != (2 * n, 2 * n):
            raise ValueError("matrix must be 2n x 2n")
        return cls(M[:n, :n], M[:n, n:], M[n:, :n], M[n:, n:])

    @classmethod
    def identity(cls, n: int = 1) -> SymplecticBlock:
        return cls.from_matrix(np.eye(2 * n))

    @classmethod
    def rotation(cls, theta: float, n: int = 1) -> SymplecticBlock:
        """Harmonic flow (``a = c = E``, ``b = 0``) at time ``theta``."""
        E = np.eye(n)
        c, s = math.cos(theta), math.sin(theta)
        return cls(c * E, -s * E, s * E, c * E)

    def __matmul__(self, other: SymplecticBlock) -> SymplecticBlock:
        return SymplecticBlock.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> SymplecticBlock:
        # M^{-1} = -J M^T J for symplectic M
        Jn = J(self.n)
        return SymplecticBlock.from_matrix(-Jn @ self.matrix.T @ Jn)

    def defect(self) -> float:
        Jn = J(self.n)
        return float(np.max(np.abs(self.matrix @ Jn @ self.matrix.T - Jn)))

    def jacobian(self, Z) -> np.ndarray:
        """``C Z + D`` (complex if ``Z`` is)."""
        Z = _as_matrix(Z)
        return self.C @ Z + self.D


def _as_matrix(Z) -> np.ndarray:
    if isinstance(Z, (SiegelMatrix, RealLagrangian)):
        return Z.Z
    return np.atleast_2d(np.asarray(Z))


@dataclass(frozen=True)
class SiegelMatrix:
    """Complex symmetric ``Z`` with positive-definite imaginary part."""

    Z: np.ndarray
    pd_tol: float = PD_TOL

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=complex))
        if Z.shape[0] != Z.shape[1]:
            raise ValueError("Z must be square")
        scale = max(1.0, float(np.max(np.abs(Z))))
        if np.max(np.abs(Z - Z.T)) > 1e-9 * scale:
            raise ValueError("Z must be symmetric")
        # keep the upper triangle as the source of truth
        Z = np.triu(Z) + np.triu(Z, 1).T
        eig = np.linalg.eigvalsh(Z.imag)
        if eig.min() <= self.pd_tol:
            raise ValueError(f"Im Z is not positive definite (min eigenvalue {eig.min():.3e})")
        object.__setattr__(self, "Z", _frozen(Z, complex))

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @classmethod
    def scalar(cls, z: complex) -> SiegelMatrix:
        return cls(np.array([[z]]))


@dataclass(frozen=True)
class RealLagrangian:
    """Boundary point of the half-plane: real symmetric ``Z`` (graph ``p = Z q``)."""

    Z: np.ndarray

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        if Z.shape[0] != Z.shape[1] or np.max(np.abs(Z - Z.T), initial=0) > 1e-12:
            raise ValueError("Z must be real symmetric")
        Z = np.triu(Z) + np.triu(Z, 1).T
        object.__setattr__(self, "Z", _frozen(Z))

    @property
    def n(self) -> int:
        return self.Z.shape[0]


@dataclass(frozen=True)
class MetaplecticPath:
    """Branch-tracked lift of a path in Sp(2n, R).

    ``accumulated_arg`` is the continuous change of ``arg det(C Z0 + D)``
    since the first sample; ``sqrt_value`` the continuous square root of
    the final determinant, principal at the first sample.  ``times``,
    ``dets`` and ``args`` record every sample actually used (including
    refinement points).
    """

    samples: tuple
    ref_Z: object
    accumulated_arg: float
    sqrt_value: complex
    times: np.ndarray = field(repr=False, default=None)
    dets: np.ndarray = field(repr=False, default=None)
    args: np.ndarray = field(repr=False, default=None)

    @property
    def final_block(self) -> SymplecticBlock:
        return self.samples[-1][1]

    def sqrt_at(self, k: int) -> complex:
        """Tracked square root at recorded sample ``k``."""
        d0 = self.dets[0]
        return np.sqrt(d0) * math.sqrt(abs(self.dets[k]) / abs(d0)) * np.exp(0.5j * self.args[k])


# ---------------------------------------------------------------------


def is_symplectic(M: SymplecticBlock, tol: float = SYM_TOL) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return M.defect() <= tol


def symplectify(M: SymplecticBlock, max_defect: float = 1e-3) -> SymplecticBlock:
    """Project a nearly symplectic block back onto the group.

    Uses the Newton iteration ``M <- (M + J M^{-T} J^{-1}) / 2`` whose fixed
    points are exactly the symplectic matrices; the correction is first
    order in the defect.
    """
    d = M.defect()
    if d >= max_defect:
        raise SymplecticDefectError(f"symplectic defect {d:.3e} too large to project (limit {max_defect})")
    if d == 0.0:
        return M
    n = M.n
    Jn = J(n)
    X = M.matrix
    for _ in range(50):
        X = 0.5 * (X - Jn @ np.linalg.inv(X).T @ Jn)
        if np.max(np.abs(X @ Jn @ X.T - Jn)) <= 1e-14:
            break
    return SymplecticBlock.from_matrix(X)


def moebius_act(M: SymplecticBlock, Z):
    """``(A Z + B)(C Z + D)^{-1}``.

    Siegel input gives a :class:`SiegelMatrix`; real input a
    :class:`RealLagrangian` (raising :class:`CausticError` if ``C Z + D``
    is singular).
    """
    Zm = _as_matrix(Z)
    W = M.C @ Zm + M.D
    scale = max(1.0, float(np.max(np.abs(W))))
    if abs(np.linalg.det(W)) <= 1e-14 * scale ** M.n:
        raise CausticError("C Z + D is singular")
    out = np.linalg.solve(W.T, (M.A @ Zm + M.B).T).T
    out = 0.5 * (out + out.T)
    if isinstance(Z, RealLagrangian) or not np.iscomplexobj(Zm):
        return RealLagrangian(out.real)
    return SiegelMatrix(out)


def riccati_rhs(a, b, c, Z) -> np.ndarray:
    """Right-hand side ``-(Z c Z + b Z + Z b^T + a)`` of the germ equation."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if np.max(np.abs(a - a.T), initial=0) > 1e-12 or np.max(np.abs(c - c.T), initial=0) > 1e-12:
        raise ValueError("a and c must be symmetric")
    Zm = _as_matrix(Z)
    out = -(Zm @ c @ Zm + b @ Zm + Zm @ b.T + a)
    return 0.5 * (out + out.T)


def quadratic_flow(a, b, c, t: float) -> SymplecticBlock:
    """``exp(t [[-b, -a], [c, b^T]])`` for ``H = q.a.q/2 + q.b.p + p.c.p/2``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    gen = np.block([[-b, -a], [c, b.T]])
    return SymplecticBlock.from_matrix(expm(t * gen))


# ---------------------------------------------------------------------
# branch tracking


def _wrap(x: float) -> float:
    return (x + math.pi) % (2 * math.pi) - math.pi


def _interpolator(path):
    """Return ``block_at(t)`` for refinement between samples.

    Between sampled blocks ``M_k, M_{k+1}`` the path is continued along
    ``M_k exp(s log(M_k^{-1} M_{k+1}))``, which stays in the group.
    """
    if callable(path):
        return path
    times = np.array([t for t, _ in path])
    blocks = [m for _, m in path]
    logs: dict = {}

    def block_at(t):
        k = int(np.searchsorted(times, t, side="right") - 1)
        k = min(max(k, 0), len(times) - 2)
        t0, t1 = times[k], times[k + 1]
        if t == t0:
            return blocks[k]
        if t == t1:
            return blocks[k + 1]
        if k not in logs:
            rel = blocks[k].inverse().matrix @ blocks[k + 1].matrix
            L = logm(rel)
            if np.max(np.abs(np.imag(L))) > 1e-8:
                raise BranchError(f"cannot interpolate between samples at t={t0} and t={t1}; refine the path")
            logs[k] = np.real(L)
        s = (t - t0) / (t1 - t0)
        return SymplecticBlock.from_matrix(blocks[k].matrix @ expm(s * logs[k]))

    return block_at


def branch_track(path, Z0, refine: bool = True, times: Sequence[float] | None = None,
                 max_depth: int = 48) -> MetaplecticPath:
    """Continuously track ``sqrt(det(C(t) Z0 + D(t)))`` along a path.

    ``path`` is a list of ``(t, SymplecticBlock)`` or a callable
    ``t -> SymplecticBlock`` (then ``times`` lists the base samples).
    With ``refine`` the interval between samples is bisected until every
    step changes ``arg det`` by at most :data:`MAX_ARG_STEP`; otherwise a
    larger step raises :class:`BranchError`.
    """
    if callable(path):
        if times is None:
            raise ValueError("times are required for a callable path")
        samples = [(float(t), path(float(t))) for t in times]
    else:
        samples = [(float(t), m) for t, m in path]
    if not samples:
        raise ValueError("empty path")
    if any(t1 <= t0 for (t0, _), (t1, _) in zip(samples, samples[1:])):
        raise ValueError("path times must be strictly increasing")
    Zm = _as_matrix(Z0)
    block_at = _interpolator(path if callable(path) else samples)

    def det_of(M):
        return complex(np.linalg.det(M.C @ Zm + M.D))

    t_list = [samples[0][0]]
    d_list = [det_of(samples[0][1])]
    if d_list[0] == 0:
        raise CausticError("det(C Z0 + D) vanishes at the first sample")
    arg_list = [0.0]

    def advance(t0, d0, t1, d1, depth):
        step = _wrap(np.angle(d1) - np.angle(d0))
        if abs(step) <= MAX_ARG_STEP and d1 != 0:
            t_list.append(t1)
            d_list.append(d1)
            arg_list.append(arg_list[-1] + step)
            return
        if not refine:
            raise BranchError(f"arg det jumps by {abs(step):.3f} between t={t0} and t={t1}; refine the path")
        if depth >= max_depth:
            raise BranchError(f"branch refinement failed near t={t0} (determinant passes through 0?)")
        tm = 0.5 * (t0 + t1)
        dm = det_of(block_at(tm))
        advance(t0, d0, tm, dm, depth + 1)
        advance(tm, dm, t1, d1, depth + 1)

    for (t0, _), (t1, m1) in zip(samples, samples[1:]):
        advance(t0, d_list[-1], t1, det_of(m1), 0)

    d0, dN, acc = d_list[0], d_list[-1], arg_list[-1]
    sqrt_value = np.sqrt(d0) * math.sqrt(abs(dN) / abs(d0)) * np.exp(0.5j * acc)
    return MetaplecticPath(
        samples=tuple(samples),
        ref_Z=Z0,
        accumulated_arg=float(acc),
        sqrt_value=complex(sqrt_value),
        times=np.array(t_list),
        dets=np.array(d_list),
        args=np.array(arg_list),
    )


def maslov_index(path, Z_real, eps_schedule: Sequence[float] = (1e-2, 1e-3, 1e-4),
                 times: Sequence[float] | None = None, off_integer_tol: float = 0.05,
                 return_table: bool = False):
    """Maslov index of a path acting on the real Lagrangian graph ``Z_real``.

    For each ``eps`` the germ ``Z_real + i eps E`` is branch-tracked; ``k``
    is read from ``exp(-i pi k / 2) = sqrt|det(C Z + D)| / sqrt_value`` and
    must agree for the two smallest ``eps``.  Returns ``k`` in
    ``{-1, 0, 1, 2}`` (the representative of ``k mod 4`` nearest 0), and the
    per-``eps`` table ``[(eps, phase, k_raw)]`` if ``return_table``.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if len(eps_schedule) < 2 or any(e <= 0 for e in eps_schedule):
        raise ValueError("eps_schedule needs at least two positive values")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps_schedule must be strictly decreasing")
    Zr = np.atleast_2d(np.asarray(_as_matrix(Z_real), dtype=float))
    n = Zr.shape[0]
    final = path(times[-1]) if callable(path) else path[-1][1]
    det_real = float(np.linalg.det(final.C @ Zr + final.D))
    if abs(det_real) <= 1e-12:
        raise CausticError("endpoint lies on a caustic: det(C Z + D) = 0")
    table = []
    for eps in eps_schedule:
        tracked = branch_track(path, Zr + 1j * eps * np.eye(n), times=times)
        phase = float(np.angle(math.sqrt(abs(det_real)) / tracked.sqrt_value))
        k_raw = MASLOV_SIGN * 2.0 * phase / math.pi
        table.append((eps, phase, k_raw))
    ks = []
    for eps, phase, k_raw in table[-2:]:
        k = round(k_raw)
        if abs(k_raw - k) > off_integer_tol:
            raise InconclusiveError(f"phase at eps={eps} is {k_raw:.3f} quarter-turns, not an integer")
        ks.append(((k + 1) % 4) - 1)
    if ks[0] != ks[1]:
        raise InconclusiveError(f"Maslov index not stable over eps schedule: {table}")
    return (ks[-1], table) if return_table else ks[-1]


def weil_generator_matrix(kind: str, n: int = 1, matrix=None) -> SymplecticBlock:
    """Generators of Sp(2n, R): ``"shear"`` (symmetric B), ``"linear"`` (invertible A), ``"fourier"``."""
    E = np.eye(n)
    Zn = np.zeros((n, n))
    if kind == "shear":
        B = Zn if matrix is None else np.atleast_2d(np.asarray(matrix, dtype=float))
        if B.shape != (n, n) or np.max(np.abs(B - B.T), initial=0) > 1e-12:
            raise ValueError("shear requires a symmetric n x n matrix B")
        return SymplecticBlock(E, B, Zn, E)
    if kind == "linear":
        A = E if matrix is None else np.atleast_2d(np.asarray(matrix, dtype=float))
        if A.shape != (n, n) or abs(np.linalg.det(A)) < 1e-14:
            raise ValueError("linear requires an invertible n x n matrix A")
        return SymplecticBlock(A, Zn, Zn, np.linalg.inv(A.T))
    if kind == "fourier":
        return SymplecticBlock(Zn, -E, E, Zn)
    raise ValueError(f"unknown generator kind {kind!r}")
