"""Wick pairings and diagrams for u^4/4! in zero space dimensions.

Run: python3 demos/05_diagrams_and_trees.py
"""
from weylgerm.qft import (D_feynman, enumerate_diagrams, green_function, total_pairing_count,
                          integrand_pairing_count, tree_series_vs_classical)

m, hbar = 1.0, 0.7
for t in (0.0, 0.5, 1.5):
    print(f"<T u(t) u(0)> at t={t}: {green_function([t, 0.0], m, hbar):.6f}   "
          f"i h D_c = {1j * hbar * D_feynman(t, m):.6f}")

for N, L in ((1, 0), (2, 0), (2, 2), (2, 4)):
    diagrams = enumerate_diagrams(N, L)
    print(f"\nN={N} vertices, L={L} legs: {len(diagrams)} diagrams")
    for d, M in diagrams:
        print(f"   multiplicities {d.matrix()} loops {list(d.loops)} legs {list(d.external)}  M={M}")
    weights = sum(integrand_pairing_count(d) for d, _ in diagrams)
    print(f"   pairings covered: {weights} of {total_pairing_count(N, L)}")

print("\ntree diagrams vs classical perturbation series (m=1, g=1, u0=0.8, v0=0.3)")
for order in (1, 2):
    for sign in (-1, 1):
        q, c, diff = tree_series_vs_classical(order, 1.0, 1.0, 0.8, 0.3, 2.0, coupling_sign=sign)
        print(f"   g^{order}, force sign {sign:+d}: tree {q:+.10f} classical {c:+.10f} diff {diff:.1e}")
