import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import CubicSpline

from weylgerm.dynamics import (HamiltonianSpec, StepControl, builtin_hamiltonian, graph_jacobians,
                               hamiltonian_from_text, integrate_flow, jacobian_amplitude, riccati_integrate)
from weylgerm.errors import CausticError, EscapeError, StepUnderflowError
from weylgerm.moyal import parse_symbol
from weylgerm.symplectic import SiegelMatrix, is_symplectic, moebius_act

MIXED = "(1/2)*p1^2 + (1/3)*q1^2*p1 + (1/4)*q1^4"


class TestFlow:
    def test_free_particle(self):
        tr = integrate_flow(builtin_hamiltonian("free"), [0.0], [1.0], 0.0, 1.0)
        q, p, S, M = tr.final()
        assert abs(q[0] - 1) < 1e-12 and abs(p[0] - 1) < 1e-12 and abs(S - 0.5) < 1e-12
        # blocks act on (p, q): q(1) = q(0) + p(0)
        assert np.allclose(M.matrix, [[1, 0], [1, 1]], atol=1e-12)

    def test_harmonic_period(self):
        tr = integrate_flow(builtin_hamiltonian("harmonic", 1.0), [1.0], [0.0], 0.0, 2 * math.pi)
        q, p, S, M = tr.final()
        assert abs(q[0] - 1) < 1e-9 and abs(p[0]) < 1e-9
        assert abs(S) < 1e-9
        assert np.allclose(M.matrix, np.eye(2), atol=1e-9)

    def test_zero_length(self):
        tr = integrate_flow(builtin_hamiltonian("quartic", 1.0), [0.3], [0.2], 1.0, 1.0)
        assert len(tr) == 1 and tr.S[0] == 0
        assert np.array_equal(tr.blocks[0].matrix, np.eye(2))

    def test_quartic_long_run(self):
        tr = integrate_flow(builtin_hamiltonian("quartic", 1.0), [1.0], [0.5], 0.0, 10.0)
        E = tr.energy()
        assert np.max(np.abs(E - E[0])) <= 1e-8
        assert all(is_symplectic(b, 1e-8) for b in tr.blocks)

    def test_action_rate(self):
        H = hamiltonian_from_text(MIXED)
        tr = integrate_flow(H, [0.7], [-0.2], 0.0, 2.0, t_eval=list(np.linspace(0, 2, 401)))
        sp = CubicSpline(tr.t, tr.S)
        spq = CubicSpline(tr.t, tr.q[:, 0])
        k = slice(20, -20)
        lagr = np.array([p[0] * H.grad(t, p, q)[0][0] - H(t, p, q) for t, p, q in zip(tr.t, tr.p, tr.q)])
        assert np.max(np.abs(sp(tr.t, 1)[k] - lagr[k])) < 1e-6
        qdot = np.array([H.grad(t, p, q)[0][0] for t, p, q in zip(tr.t, tr.p, tr.q)])
        assert np.max(np.abs(spq(tr.t, 1)[k] - qdot[k])) < 1e-6

    def test_escape(self):
        H = hamiltonian_from_text("(1/2)*p1^2 - q1^4")
        with pytest.raises(EscapeError):
            integrate_flow(H, [1.0], [1.0], 0.0, 5.0, StepControl(escape_bound=1e3))

    def test_step_underflow(self):
        with pytest.raises(StepUnderflowError):
            integrate_flow(builtin_hamiltonian("quartic", 1.0), [3.0], [0.0], 0.0, 5.0,
                           StepControl(tol=1e-14, h_min=0.05))

    def test_leapfrog_agrees(self):
        H = builtin_hamiltonian("pendulum")
        a = integrate_flow(H, [1.0], [0.3], 0.0, 3.0)
        b = integrate_flow(H, [1.0], [0.3], 0.0, 3.0, StepControl(method="leapfrog", h0=5e-4))
        assert abs(a.q[-1, 0] - b.q[-1, 0]) < 1e-6
        assert abs(a.S[-1] - b.S[-1]) < 1e-6
        assert np.max(np.abs(a.blocks[-1].matrix - b.blocks[-1].matrix)) < 1e-6

    def test_finite_differences_agree(self):
        H = hamiltonian_from_text(MIXED)
        Hfd = H.with_finite_differences()
        assert Hfd.derivative_mode.startswith("finite")
        p, q = np.array([0.4]), np.array([-0.8])
        for x, y in zip(H.hess(0, p, q), Hfd.hess(0, p, q)):
            assert np.max(np.abs(x - y)) < 1e-6
        a = integrate_flow(H, [0.5], [0.1], 0.0, 1.0)
        b = integrate_flow(Hfd, [0.5], [0.1], 0.0, 1.0)
        assert np.max(np.abs(a.blocks[-1].matrix - b.blocks[-1].matrix)) < 1e-5


class TestGerm:
    def test_harmonic_fixed_point(self):
        H = builtin_hamiltonian("harmonic", 1.0)
        tr = integrate_flow(H, [1.0], [0.0], 0.0, 3.0, t_eval=list(np.linspace(0, 3, 7)))
        for _, Z in riccati_integrate(tr, H, SiegelMatrix.scalar(1j)):
            assert abs(Z.Z[0, 0] - 1j) < 1e-10

    def test_free_closed_form(self):
        H = builtin_hamiltonian("free")
        tr = integrate_flow(H, [0.0], [1.0], 0.0, 2.0, t_eval=list(np.linspace(0, 2, 9)))
        for t, Z in riccati_integrate(tr, H, SiegelMatrix.scalar(1j)):
            assert abs(Z.Z[0, 0] - 1j / (1 + 1j * t)) < 1e-10

    @settings(max_examples=15)
    @given(st.floats(-1.5, 1.5), st.floats(-1, 1), st.floats(0.2, 2.0), st.floats(-1, 1))
    def test_riccati_matches_moebius(self, q0, p0, im, re):
        H = hamiltonian_from_text(MIXED)
        tr = integrate_flow(H, [q0], [p0], 0.0, 2.0, t_eval=list(np.linspace(0, 2, 21)))
        Z0 = SiegelMatrix.scalar(complex(re, im))
        for (t, Z), blk in zip(riccati_integrate(tr, H, Z0), tr.blocks):
            ref = moebius_act(blk, Z0).Z
            assert abs(Z.Z[0, 0] - ref[0, 0]) <= 1e-7 * max(1.0, abs(ref[0, 0]))


class TestJacobian:
    def test_start(self):
        tr = integrate_flow(builtin_hamiltonian("free"), [0.0], [1.0], 0.0, 0.0)
        assert jacobian_amplitude(tr) == 1

    def test_free_graph(self):
        for t in (0.5, 1.0, 3.0):
            tr = integrate_flow(builtin_hamiltonian("free"), [0.0], [0.0], 0.0, t)
            assert abs(jacobian_amplitude(tr, [[1.0]]) - (1 + t) ** -0.5) < 1e-12

    def test_harmonic_focal_point(self):
        H = builtin_hamiltonian("harmonic", 1.0)
        tr = integrate_flow(H, [0.0], [0.0], 0.0, 1.5)
        assert abs(jacobian_amplitude(tr) - math.cos(1.5) ** -0.5) < 1e-10
        tr = integrate_flow(H, [0.0], [0.0], 0.0, 2.0, t_eval=[math.pi / 2])
        with pytest.raises(CausticError):
            jacobian_amplitude(tr)

    @pytest.mark.parametrize("text,q0,Zg", [(MIXED, 0.6, 0.3), ("pendulum", 0.4, 0.3)])
    def test_transport_residual(self, text, q0, Zg):
        """d ln a / dt = -(H_pp Z + H_pq) / 2 with the Weyl symbol (no extra H_pq/2 term)."""
        H = hamiltonian_from_text(text)
        ts = np.linspace(0, 1.5, 601)
        tr = integrate_flow(H, [q0], [Zg * q0], 0.0, 1.5, t_eval=list(ts))
        dets = graph_jacobians(tr, [[Zg]])
        assert np.all(dets > 0)
        log_a = -0.5 * np.log(dets)
        lhs = CubicSpline(tr.t, log_a)(tr.t, 1)
        rhs = []
        for t, p, q, blk in zip(tr.t, tr.p, tr.q, tr.blocks):
            Hpp, Hpq, _ = H.hess(t, p, q)
            Z = moebius_act(blk, np.array([[Zg]])).Z[0, 0]
            rhs.append(-0.5 * (Hpp[0, 0] * Z + Hpq[0, 0]))
        k = slice(10, -10)
        assert np.max(np.abs(lhs[k] - np.array(rhs)[k])) <= 1e-6
