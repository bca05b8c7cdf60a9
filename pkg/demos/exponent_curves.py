"""Random-coding and sphere-packing exponents of a BSC, plus the lattice exponent.

Above the critical rate the two exponents agree; below it the random-coding
curve becomes a straight line of slope -1 while sphere packing keeps rising.
The same picture holds for unconstrained lattices on the Gaussian channel,
with log density in place of rate.
"""

import math

from expforge.channel import bsc, capacity_uniform
from expforge.exponents import (
    critical_rate,
    delta_cr,
    delta_star,
    poltyrev_exponent,
    random_coding_exponent,
    sphere_packing_exponent,
)

ch = bsc(0.1)
R_cr, C = critical_rate(ch), capacity_uniform(ch)
print(f"BSC(0.1): R_cr = {R_cr:.4f}, C = {C:.4f} nats")
print(f"{'R':>6} {'E_r':>8} {'rho*':>6} {'E_sp':>8}")
for R in (0.02, 0.06, 0.10, R_cr, 0.2, 0.3, 0.36):
    e, rho, _ = random_coding_exponent(ch, R)
    esp = sphere_packing_exponent(ch, R)
    print(f"{R:6.3f} {e:8.4f} {rho:6.3f} {esp:8.4f}")

sigma2 = 1.0 / (2 * math.pi * math.e) * math.exp(-1.0)
print(f"\nlattices at sigma2 = {sigma2:.4f}: delta* = {delta_star(sigma2):.3f}, delta_cr = {delta_cr(sigma2):.3f}")
for d in (-0.5, 0.0, delta_cr(sigma2), 0.4, 0.5):
    print(f"  delta = {d:6.3f}  E = {poltyrev_exponent(d, sigma2):.4f}")
