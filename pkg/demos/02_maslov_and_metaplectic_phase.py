"""Square-root branch tracking along the harmonic flow and the Maslov index.

A Gaussian with Z = i returns to itself after one period with amplitude
-1, which is the ground-state phase exp(-i E0 T / h).  A real Lagrangian
graph (Z real) picks up exp(-i pi k / 2) with k counted by the limit of
small imaginary regularisation.

Run: python3 demos/02_maslov_and_metaplectic_phase.py
"""
import math

import numpy as np

from weylgerm.dynamics import builtin_hamiltonian
from weylgerm.germ import GaussianPacket, propagate_packet
from weylgerm.symplectic import SymplecticBlock, branch_track, maslov_index

H = builtin_hamiltonian("harmonic", 1.0)
out = propagate_packet(H, GaussianPacket(1j, [0.0], [0.0], 0.0, 1.0, 0.5), 0.0, 2 * math.pi)
print(f"amplitude after one period: {complex(out.c):.10f}")

for frac, label in ((0.25, "quarter"), (0.5, "half"), (1.0, "full"), (1.5, "one and a half")):
    theta = 2 * math.pi * frac
    path = [(float(t), SymplecticBlock.rotation(t)) for t in np.linspace(0, theta, 129)]
    if frac == 0.25:
        # the real graph is vertical here, so only the regularised branch is meaningful
        tr = branch_track(path, 1e-3j)
        print(f"{label:>15} rotation: accumulated arg / pi = {tr.accumulated_arg / math.pi:+.4f}")
        continue
    k, table = maslov_index(path, 0.0, return_table=True)
    print(f"{label:>15} rotation: k = {k:+d}   raw values " + ", ".join(f"{kr:+.4f}" for _, _, kr in table))
