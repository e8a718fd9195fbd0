"""Complex-germ packets against the grid Schrodinger solver.

Quadratic Hamiltonians are propagated exactly.  For the quartic
oscillator the packet error shrinks as h decreases.

Run: python3 demos/03_packet_vs_oracle.py
"""
import numpy as np

from weylgerm.cli import _quadratic_symbol
from weylgerm.dynamics import builtin_hamiltonian, oracle_hamiltonian
from weylgerm.germ import GaussianPacket, exact_quadratic_propagate, packet_to_grid, propagate_packet
from weylgerm.oracle import Grid1D, evolve_schrodinger, l2_error

grid = Grid1D.symmetric(8.0, 512)
a, b, c = 1.4, 0.3, 0.7
pkt = GaussianPacket.normalized(0.2 + 0.9j, [0.6], [-0.5], 0.2)
exact = evolve_schrodinger(_quadratic_symbol(a, b, c), packet_to_grid(pkt, grid), 1.0)
approx = packet_to_grid(exact_quadratic_propagate(a, b, c, pkt, 1.0), grid)
print(f"quadratic H, t=1: L2 distance to oracle = {l2_error(approx, exact, True):.2e}")

H = builtin_hamiltonian("quartic", 1.0)
grid = Grid1D.symmetric(6.0, 1024)
hbars, errs = [0.1, 0.05, 0.025], []
for hbar in hbars:
    pkt = GaussianPacket.normalized(1j, [1.0], [0.0], hbar)
    ref = evolve_schrodinger(oracle_hamiltonian(H), packet_to_grid(pkt, grid), 1.0)
    errs.append(l2_error(packet_to_grid(propagate_packet(H, pkt, 0.0, 1.0), grid), ref, True))
    print(f"quartic, h={hbar:<6g} L2 error (mod phase) = {errs[-1]:.4f}")
print(f"fitted order in h: {np.polyfit(np.log(hbars), np.log(errs), 1)[0]:.3f}")
