"""Superposing packets along a Lagrangian curve.

For the graph p = S'(q) of S = q^2/5 the packet superposition approaches
the WKB function exp(i S/h) a(q) as h shrinks.  A closed circle yields
the Maslov index 2 and loop action equal to the enclosed area.

Run: python3 demos/04_canonical_operator.py
"""
import math

import numpy as np

from weylgerm.germ import LagrangianCurve, canonical_superpose, closed_curve_index, reconstruct_wkb
from weylgerm.oracle import Grid1D, l2_error

grid = Grid1D.symmetric(8.0, 512)
for hbar in (0.1, 0.05, 0.025):
    step = math.sqrt(hbar) / 20
    alpha = np.arange(-7.0, 7.0 + step / 2, step)
    curve = LagrangianCurve.graph(lambda q: q * q / 5, lambda q: 2 * q / 5, alpha, lambda q: np.exp(-q * q / 2))
    err = l2_error(canonical_superpose(curve, hbar, grid), reconstruct_wkb(curve, hbar, grid))
    print(f"h={hbar:<6g} |superposition - WKB| = {err:.4f}   / sqrt(h) = {err / math.sqrt(hbar):.4f}")

r = 1.3
al = np.linspace(0, 2 * math.pi, 400, endpoint=False)
circle = LagrangianCurve(al, r * np.cos(al), -r * np.sin(al), r * r * (al / 2 - np.sin(2 * al) / 4),
                         1j, 1.0, closed=True)
print(f"circle r={r}: index {closed_curve_index(circle)}, loop action {circle.loop_action():.6f}, "
      f"area {math.pi * r * r:.6f}")
