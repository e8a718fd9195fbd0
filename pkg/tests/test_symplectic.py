import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weylgerm.errors import BranchError, CausticError, InconclusiveError, SymplecticDefectError
from weylgerm.oracle import Grid1D, WavefunctionGrid, evolve_schrodinger
from weylgerm.dynamics import builtin_hamiltonian, oracle_hamiltonian
from weylgerm.symplectic import (J, SiegelMatrix, SymplecticBlock, branch_track, is_symplectic, maslov_index,
                                 moebius_act, quadratic_flow, riccati_rhs, symplectify, weil_generator_matrix)

from conftest import random_siegel, random_symplectic

seeds = st.integers(0, 2 ** 32 - 1)


def rotation_path(theta_end, samples=65):
    return [(float(t), SymplecticBlock.rotation(t)) for t in np.linspace(0.0, theta_end, samples)]


class TestGroup:
    def test_identity_and_rotation(self):
        assert is_symplectic(SymplecticBlock.identity(3), 1e-14)
        for th in np.linspace(-7, 7, 29):
            assert is_symplectic(SymplecticBlock.rotation(th, 2), 1e-14)

    def test_scaling_is_not_symplectic(self):
        assert not is_symplectic(SymplecticBlock(2 * np.eye(1), 0, 0, np.eye(1)), 1e-6)

    def test_closure_exact_rational(self):
        # rational generators multiplied in exact arithmetic
        F = Fraction
        E = np.array([[F(1), F(0)], [F(0), F(1)]], dtype=object)
        O = np.zeros((2, 2), dtype=object) * F(0)
        B = np.array([[F(1, 2), F(-3, 7)], [F(-3, 7), F(2)]], dtype=object)
        A = np.array([[F(2), F(1, 3)], [F(0), F(1, 2)]], dtype=object)
        detA = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        Ainv_T = np.array([[A[1, 1], -A[1, 0]], [-A[0, 1], A[0, 0]]], dtype=object) / detA
        shear = np.block([[E, B], [O, E]])
        lin = np.block([[A, O], [O, Ainv_T]])
        four = np.block([[O, -E], [E, O]])
        Jx = np.block([[O, E], [-E, O]])
        M = shear.dot(lin).dot(four).dot(shear.T.dot(Jx).dot(shear.T) * -1)
        for X in (shear, lin, four, M):
            assert (X.dot(Jx).dot(X.T) == Jx).all()

    @given(seeds)
    def test_closure_float(self, seed):
        rng = np.random.default_rng(seed)
        M1, M2 = random_symplectic(rng, 3), random_symplectic(rng, 3)
        assert (M1 @ M2).defect() <= 1e-12 * max(1.0, np.abs((M1 @ M2).matrix).max() ** 2)

    def test_symplectify(self):
        R = SymplecticBlock.rotation(0.7, 2)
        assert symplectify(R).defect() <= R.defect() + 1e-16
        rng = np.random.default_rng(1)
        noisy = SymplecticBlock.from_matrix(R.matrix + 1e-6 * rng.normal(size=(4, 4)))
        fixed = symplectify(noisy)
        assert fixed.defect() <= 1e-12
        assert np.max(np.abs(fixed.matrix - noisy.matrix)) <= 1e-5
        with pytest.raises(SymplecticDefectError):
            symplectify(SymplecticBlock.from_matrix(np.eye(2) + 0.1 * np.ones((2, 2))))

    def test_generators(self):
        assert np.array_equal(weil_generator_matrix("shear", 2).matrix, np.eye(4))
        assert np.array_equal(weil_generator_matrix("linear", 2).matrix, np.eye(4))
        F = weil_generator_matrix("fourier", 2)
        assert np.array_equal((F @ F).matrix, -np.eye(4))
        with pytest.raises(ValueError):
            weil_generator_matrix("shear", 1, [[1, 2], [0, 1]][:1])
        with pytest.raises(ValueError):
            weil_generator_matrix("linear", 2, np.zeros((2, 2)))


class TestMoebius:
    def test_examples(self):
        Z = random_siegel(np.random.default_rng(0), 2)
        assert np.allclose(moebius_act(SymplecticBlock.identity(2), SiegelMatrix(Z)).Z, Z, atol=1e-15)
        for th in np.linspace(0, 6, 13):
            assert abs(moebius_act(SymplecticBlock.rotation(th), SiegelMatrix.scalar(1j)).Z[0, 0] - 1j) < 1e-14
        B = np.array([[1.0, 0.5], [0.5, -2.0]])
        sh = weil_generator_matrix("shear", 2, B)
        assert np.allclose(moebius_act(sh, SiegelMatrix(Z)).Z, Z + B, atol=1e-14)

    def test_caustic(self):
        with pytest.raises(CausticError):
            moebius_act(SymplecticBlock.rotation(math.pi / 2), np.zeros((1, 1)))

    @given(seeds, st.integers(1, 4))
    def test_functoriality(self, seed, n):
        rng = np.random.default_rng(seed)
        M1, M2 = random_symplectic(rng, n), random_symplectic(rng, n)
        Z = SiegelMatrix(random_siegel(rng, n))
        lhs = moebius_act(M1 @ M2, Z).Z
        rhs = moebius_act(M1, moebius_act(M2, Z)).Z
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.abs(lhs).max())

    def test_half_plane_preserved_500(self):
        rng = np.random.default_rng(500)
        for _ in range(500):
            n = int(rng.integers(1, 5))
            out = moebius_act(random_symplectic(rng, n), SiegelMatrix(random_siegel(rng, n))).Z
            assert np.linalg.eigvalsh(out.imag).min() > 0


class TestRiccati:
    def test_examples(self):
        assert np.all(riccati_rhs(0, 0, 0, np.array([[1j]])) == 0)
        assert abs(riccati_rhs(1, 0, 1, np.array([[1j]]))[0, 0]) == 0
        assert riccati_rhs(1, 0, 1, np.array([[2j]]))[0, 0] == 3
        with pytest.raises(ValueError):
            riccati_rhs([[1, 2], [0, 1]], 0, np.eye(2), np.eye(2) * 1j)

    @given(seeds)
    def test_matches_moebius_flow(self, seed):
        from scipy.integrate import solve_ivp
        rng = np.random.default_rng(seed)
        n = 2
        a = rng.normal(size=(n, n)); a = a + a.T
        c = rng.normal(size=(n, n)); c = c @ c.T + np.eye(n)
        b = rng.normal(size=(n, n)) * 0.5
        Z0 = random_siegel(rng, n)
        t = 0.4

        def f(_, y):
            return riccati_rhs(a, b, c, y.reshape(n, n)).ravel()

        sol = solve_ivp(f, (0, t), Z0.ravel(), rtol=1e-12, atol=1e-12, method="DOP853")
        ref = moebius_act(quadratic_flow(a, b, c, t), SiegelMatrix(Z0)).Z
        Zt = sol.y[:, -1].reshape(n, n)
        assert np.max(np.abs(Zt - ref)) <= 1e-8 * max(1.0, np.abs(ref).max())


class TestBranch:
    def test_identity_path(self):
        path = [(float(t), SymplecticBlock.identity()) for t in range(5)]
        mp = branch_track(path, SiegelMatrix.scalar(1j))
        assert mp.accumulated_arg == 0 and mp.sqrt_value == 1

    def test_rotation_full_and_quarter(self):
        mp = branch_track(rotation_path(2 * math.pi), SiegelMatrix.scalar(1j))
        assert abs(mp.sqrt_value - (-1)) < 1e-12
        mp = branch_track(rotation_path(math.pi / 2), SiegelMatrix.scalar(1j))
        assert abs(mp.sqrt_value - cmath.exp(1j * math.pi / 4)) < 1e-12

    def test_sqrt_squares_to_det(self):
        rng = np.random.default_rng(3)
        M = random_symplectic(rng, 2)
        Z0 = SiegelMatrix(random_siegel(rng, 2))
        path = lambda t: quadratic_flow(np.eye(2), 0.3 * np.eye(2), np.diag([1.0, 2.0]), t)
        mp = branch_track(path, Z0, times=np.linspace(0, 5, 11))
        det = np.linalg.det(path(5.0).jacobian(Z0))
        assert abs(mp.sqrt_value ** 2 - det) <= 1e-10 * abs(det)

    def test_unrefined_jump_raises(self):
        with pytest.raises(BranchError):
            branch_track(rotation_path(2 * math.pi, samples=3), SiegelMatrix.scalar(0.01j), refine=False)

    @given(seeds, st.floats(0.1, 0.9))
    def test_cocycle(self, seed, frac):
        rng = np.random.default_rng(seed)
        n = 2
        a = rng.normal(size=(n, n)); a = a @ a.T + np.eye(n)
        c = rng.normal(size=(n, n)); c = c @ c.T + np.eye(n)
        b = 0.3 * rng.normal(size=(n, n))
        T = 4.0
        T1 = frac * T
        flow = lambda t: quadratic_flow(a, b, c, t)
        Z0 = SiegelMatrix(random_siegel(rng, n))
        whole = branch_track(flow, Z0, times=np.linspace(0, T, 41))
        first = branch_track(flow, Z0, times=np.linspace(0, T1, 21))
        Z1 = moebius_act(flow(T1), Z0)
        second = branch_track(lambda t: flow(t - T1), Z1, times=np.linspace(T1, T, 21))
        prod = first.sqrt_value * second.sqrt_value
        assert abs(whole.sqrt_value - prod) <= 1e-9 * abs(prod)


class TestMaslov:
    def test_identity(self):
        path = [(0.0, SymplecticBlock.identity()), (1.0, SymplecticBlock.identity())]
        assert maslov_index(path, 0.0) == 0

    def test_full_rotation(self):
        k, table = maslov_index(rotation_path(2 * math.pi), 0.0, return_table=True)
        assert k == 2
        assert all(round(kr) % 4 == 2 for _, _, kr in table)

    def test_half_rotation_sign_matches_oracle(self):
        k = maslov_index(rotation_path(math.pi), 0.0)
        assert abs(k) == 1
        # grid check: U(pi) psi = exp(-i pi k / 2) psi(-x) for the harmonic flow
        hbar = 1.0
        grid = Grid1D.symmetric(20.0, 512)
        x = grid.x
        psi = WavefunctionGrid(grid, np.exp(-0.2 * (x - 1.5) ** 2 / (2 * hbar) + 0.3j * x), hbar)
        out = evolve_schrodinger(oracle_hamiltonian(builtin_hamiltonian("harmonic", 1.0)), psi, math.pi)
        mirrored = psi.with_values(np.exp(-0.2 * (-x - 1.5) ** 2 / (2 * hbar) - 0.3j * x))
        phase = mirrored.inner(out) / mirrored.inner(mirrored)
        assert abs(phase - cmath.exp(-0.5j * math.pi * k)) < 1e-6

    def test_stability_is_checked(self):
        with pytest.raises(ValueError):
            maslov_index(rotation_path(1.0), 0.0, eps_schedule=[1e-3])
        with pytest.raises(CausticError):
            maslov_index(rotation_path(math.pi / 2), 0.0)
