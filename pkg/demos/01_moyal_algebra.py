"""Moyal product of polynomial symbols in exact arithmetic.

Run: python3 demos/01_moyal_algebra.py
"""
from weylgerm.moyal import commutator, format_symbol, parse_symbol, poisson, star

q, p = parse_symbol("q1"), parse_symbol("p1")
print("q * p         =", format_symbol(star(q, p)))
print("p * q         =", format_symbol(star(p, q)))
print("[q, p]        =", format_symbol(commutator(q, p)))

# q^2 * p^2 picks up corrections at first and second order in h
print("q^2 * p^2     =", format_symbol(star(parse_symbol("q1^2"), parse_symbol("p1^2"))))

# for a quadratic Hamiltonian the commutator is exactly i h times the Poisson bracket
H = parse_symbol("(1/2)*p1^2 + (1/2)*q1^2")
f = parse_symbol("q1^3*p1 + (2/3)*p1^4")
print("[H, f]        =", format_symbol(commutator(H, f)))
print("i h {H, f}    =", format_symbol(poisson(H, f) * parse_symbol("i*h")))

# a quartic term breaks that: the h^3 correction survives
V = parse_symbol("q1^4")
print("[q^4, p^3] - i h {q^4, p^3} =",
      format_symbol(commutator(V, parse_symbol("p1^3")) - poisson(V, parse_symbol("p1^3")) * parse_symbol("i*h")))
