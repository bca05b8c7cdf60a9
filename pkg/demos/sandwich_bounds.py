"""Exact ensemble error against the alpha sandwich, for a small BSC.

For each block length we enumerate every (G, v) and every channel output to
get the exact average ML error, then print the two sums that bracket it.
The upper sum is the union bound; the lower one loses a factor q but is
tight in the exponent.
"""

import math
from fractions import Fraction

from expforge.bounds import linear_sandwich
from expforge.channel import alpha, bsc
from expforge.ensemble import CodeEnsembleSpec
from expforge.exponents import random_coding_exponent
from expforge.oracle import exact_average_error, exact_P1_P2, qsc_log_p1_p2

ch = bsc(Fraction(1, 10))

# pointwise: one transmitted word, one output, the alpha that drives both sides
x, y = (0, 0, 0, 0), (1, 0, 0, 0)
a = alpha(ch, x, y)
s = linear_sandwich(M=4, q=2, alpha=a, rho=1.5)
print(f"alpha(x, y) = {a}; union probability lies in [{float(s.clamped_lower):.4f}, {float(s.upper):.4f}]")

print(f"{'N':>2} {'K':>2} {'P1/q - P2':>12} {'exact Pe':>12} {'P1':>12}")
for N, K in [(2, 1), (3, 1), (4, 2), (5, 2)]:
    spec = CodeEnsembleSpec(N, K, 2)
    pe = exact_average_error(spec, ch)
    p1, p2 = exact_P1_P2(spec, ch, rho=2.0)
    lower = max(p1 / spec.q - p2, 0.0)
    print(f"{N:>2} {K:>2} {lower:12.6f} {pe.float_view:12.6f} {p1:12.6f}")
    assert lower <= pe.float_view <= p1 + 1e-12

# Far beyond enumeration, the q-SC sums have closed forms.  Both sides of the
# bracket, normalised by N, close in on the random-coding exponent.
R = 0.1  # nats per symbol
E_r = random_coding_exponent(ch, R)[0]
print(f"\nR = {R} nats, E_r(R) = {E_r:.4f}")
print(f"{'N':>4} {'-log(P1)/N':>12} {'-log(P1/q - P2)/N':>18}")
for N in (50, 100, 200, 400, 800):
    lp1, lp2 = qsc_log_p1_p2(2, 0.1, N, N * R, rho=1.5)
    low = math.exp(lp1) / 2 - math.exp(lp2)
    print(f"{N:>4} {-lp1 / N:12.4f} {-math.log(low) / N:18.4f}")
