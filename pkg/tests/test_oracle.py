import cmath
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weylgerm.dynamics import builtin_hamiltonian, oracle_hamiltonian
from weylgerm.errors import ConvergenceError, GridError
from weylgerm.moyal import PolySymbol, parse_symbol, star
from weylgerm.oracle import (Grid1D, WavefunctionGrid, apply_p_power, apply_weyl_op, evolve_schrodinger,
                             fourier_h, l2_error, read_grid_csv, weil_generator_act, weyl_matrix, write_grid_csv)

from conftest import random_poly


def gaussian(grid, hbar, Z=1j, q0=0.0, p0=0.0):
    x = grid.x
    return WavefunctionGrid(grid, np.exp(1j / hbar * (0.5 * Z * (x - q0) ** 2 + p0 * (x - q0))), hbar)


def moments(psi):
    w = np.abs(psi.values) ** 2
    w = w / w.sum()
    m = np.sum(w * psi.x)
    return m, math.sqrt(np.sum(w * (psi.x - m) ** 2))


class TestFourier:
    def test_gaussian_fixed_point(self):
        g = Grid1D.self_dual(256, 1.0)
        psi = gaussian(g, 1.0)
        out = fourier_h(psi)
        assert out.grid == g
        assert np.max(np.abs(out.values - psi.values)) < 1e-10

    def test_width_product(self):
        hbar = 0.5
        g = Grid1D.symmetric(10.0, 1024)
        psi = gaussian(g, hbar, Z=25j, q0=1.0)
        _, sx = moments(psi)
        _, sp = moments(fourier_h(psi))
        assert abs(sx * sp - hbar / 2) < 1e-8

    def test_square_is_parity_and_fourth_power_identity(self):
        hbar = 0.7
        g = Grid1D.self_dual(512, hbar)
        psi = gaussian(g, hbar, Z=0.3 + 1.2j, q0=1.1, p0=-0.4)
        F2 = fourier_h(fourier_h(psi))
        parity = np.empty_like(psi.values)
        parity[0] = psi.values[0]  # -x_min lies outside [x_min, x_max); value is ~0 anyway
        parity[1:] = psi.values[1:][::-1]
        assert np.max(np.abs(F2.values - parity)) < 1e-10
        F4 = fourier_h(fourier_h(F2))
        assert np.max(np.abs(F4.values - psi.values)) < 1e-10

    def test_nyquist_violation(self):
        g = Grid1D.symmetric(10.0, 64)
        with pytest.raises(GridError):
            fourier_h(gaussian(g, 1.0, Z=400j))


class TestWeylOperators:
    hbar = 0.4
    grid = Grid1D.symmetric(12.0, 512)

    def smooth(self, k=0, shift=0.3):
        x = self.grid.x
        herm = np.polynomial.hermite.hermval(x, [0] * k + [1])
        return WavefunctionGrid(self.grid, herm * np.exp(-(x - shift) ** 2 / 2 + 0.5j * x), self.hbar)

    def test_q_multiplies(self):
        psi = self.smooth()
        out = apply_weyl_op(parse_symbol("q1"), psi)
        assert np.max(np.abs(out.values - self.grid.x * psi.values)) < 1e-12

    def test_qp_symbol(self):
        psi = self.smooth()
        x = self.grid.x
        dpsi = np.fft.ifft(1j * 2 * np.pi * np.fft.fftfreq(self.grid.N, self.grid.dx) * np.fft.fft(psi.values))
        expect = -1j * self.hbar * (x * dpsi + 0.5 * psi.values)
        out = apply_weyl_op(parse_symbol("q1*p1"), psi)
        assert np.max(np.abs(out.values - expect)) < 1e-9

    def test_homomorphism(self):
        rng = random.Random(11)
        for k in range(5):
            psi = self.smooth(k)
            for _ in range(4):
                f = random_poly(rng, 1, max_degree=2, max_terms=3)
                g = random_poly(rng, 1, max_degree=2, max_terms=3)
                lhs = apply_weyl_op(f, apply_weyl_op(g, psi)).values
                rhs = apply_weyl_op(star(f, g), psi).values
                assert np.max(np.abs(lhs - rhs)) <= 1e-8 * max(1.0, np.abs(rhs).max())

    def test_real_symbol_is_symmetric(self):
        phi = parse_symbol("q1^2*p1^2 + (1/3)*q1*p1^3 - 2*p1 + q1^4")
        a, b = self.smooth(1), self.smooth(2, shift=-0.5)
        lhs = a.inner(apply_weyl_op(phi, b))
        rhs = apply_weyl_op(phi, a).inner(b)
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))

    def test_weyl_matrix_is_hermitian_for_real_symbol(self):
        W = weyl_matrix(parse_symbol("q1*p1 + p1^2"), Grid1D.symmetric(5.0, 64), 1.0)
        assert np.max(np.abs(W - W.conj().T)) < 1e-10

    def test_degree_cap(self):
        with pytest.raises(ValueError):
            apply_weyl_op(parse_symbol("q1^5*p1^4"), self.smooth())


class TestEvolution:
    def test_free_particle_closed_form(self):
        g = Grid1D.symmetric(20.0, 512)
        psi0 = gaussian(g, 1.0)
        t = 1.5
        out = evolve_schrodinger(oracle_hamiltonian(builtin_hamiltonian("free")), psi0, t)
        Z = 1j / (1 + 1j * t)
        expect = np.exp(0.5j * Z * g.x ** 2) / cmath.sqrt(1 + 1j * t)
        assert np.max(np.abs(out.values - expect)) < 1e-10

    def test_harmonic_ground_state(self):
        g = Grid1D.symmetric(10.0, 256)
        psi0 = gaussian(g, 1.0)
        t = 2.3
        out, err = evolve_schrodinger(oracle_hamiltonian(builtin_hamiltonian("harmonic", 1.0)), psi0, t,
                                      return_error=True)
        assert np.max(np.abs(out.values - cmath.exp(-0.5j * t) * psi0.values)) < 1e-6
        assert err < 1e-6

    def test_zero_time(self):
        psi0 = gaussian(Grid1D.symmetric(10.0, 128), 1.0)
        assert evolve_schrodinger(parse_symbol("p1^2"), psi0, 0.0) is psi0

    @pytest.mark.parametrize("H", [parse_symbol("(1/2)*p1^2 + (1/4)*q1^4"),
                                   parse_symbol("(1/2)*p1^2 + (1/2)*q1^2 + (1/5)*q1*p1")])
    def test_unitarity(self, H):
        g = Grid1D.symmetric(8.0, 256)
        psi0 = gaussian(g, 0.5, q0=1.0).normalized()
        out = evolve_schrodinger(H, psi0, 1.0, edge_tol=1e-8)
        assert abs(out.norm() - 1.0) < 1e-10

    def test_halving_tolerance_enforced(self):
        g = Grid1D.symmetric(8.0, 256)
        psi0 = gaussian(g, 0.5, q0=1.0)
        with pytest.raises(ConvergenceError):
            evolve_schrodinger(parse_symbol("(1/2)*p1^2 + (1/4)*q1^4"), psi0, 1.0, steps=20, tol=1e-12)

    def test_grid_doubling_within_reported_error(self):
        H = oracle_hamiltonian(builtin_hamiltonian("quartic", 1.0))
        outs = []
        for N in (256, 512):
            g = Grid1D.symmetric(8.0, N)
            outs.append(evolve_schrodinger(H, gaussian(g, 0.3, q0=1.0), 1.0, return_error=True))
        (c, err), (f, _) = outs
        diff = np.sqrt(c.grid.dx * np.sum(np.abs(f.values[::2] - c.values) ** 2))
        assert diff <= max(err, 1e-12)


class TestGenerators:
    hbar = 0.5
    grid = Grid1D.self_dual(256, 0.5)

    def test_shear_zero(self):
        psi = gaussian(self.grid, self.hbar, Z=1j + 0.2)
        assert np.array_equal(weil_generator_act("shear", psi, 0.0).values, psi.values)

    def test_shear_adds(self):
        psi = gaussian(self.grid, self.hbar, Z=1j)
        out = weil_generator_act("shear", psi, 0.7)
        assert np.max(np.abs(out.values - gaussian(self.grid, self.hbar, Z=1j + 0.7).values)) < 1e-13

    @pytest.mark.parametrize("A", [0.8, 1.3])
    def test_linear_rescales(self, A):
        Z = 0.3 + 1.1j
        psi = gaussian(self.grid, self.hbar, Z=Z)
        out = weil_generator_act("linear", psi, A)
        expect = math.sqrt(A) * gaussian(self.grid, self.hbar, Z=A * A * Z).values
        assert np.max(np.abs(out.values - expect)) < 1e-9

    def test_fourier_fixed_point(self):
        psi = gaussian(self.grid, self.hbar)
        assert np.max(np.abs(weil_generator_act("fourier", psi).values - psi.values)) < 1e-10


class TestL2:
    grid = Grid1D.symmetric(5.0, 64)

    def test_examples(self):
        e = np.zeros(64, complex)
        e[3] = 1 / math.sqrt(self.grid.dx)
        f = np.zeros(64, complex)
        f[9] = 1 / math.sqrt(self.grid.dx)
        a, b = WavefunctionGrid(self.grid, e, 1.0), WavefunctionGrid(self.grid, f, 1.0)
        assert l2_error(a, a) == 0
        assert abs(l2_error(a, b) - math.sqrt(2)) < 1e-14

    @given(st.floats(-10, 10))
    def test_global_phase(self, phi):
        psi = gaussian(self.grid, 1.0, Z=2j)
        assert l2_error(psi * cmath.exp(1j * phi), psi, mod_global_phase=True) < 1e-12

    def test_mixing_hbar_rejected(self):
        with pytest.raises(ValueError):
            l2_error(gaussian(self.grid, 1.0, Z=2j), gaussian(self.grid, 0.5, Z=2j))


def test_csv_round_trip(tmp_path):
    psi = gaussian(Grid1D.symmetric(6.0, 64), 0.5, Z=1j + 0.1, q0=0.4)
    write_grid_csv(tmp_path / "psi.csv", psi)
    back = read_grid_csv(tmp_path / "psi.csv", 0.5)
    assert np.array_equal(back.values, psi.values)
    assert np.allclose(back.x, psi.x, atol=1e-13)
