"""Where a linear-ensemble codeword is free and where it is pinned.

Draw G and v uniformly and look at x_m = u_m G + v.  Given a few other
codewords, x_m is either uniform over F_q^N or fixed by them.  This script
prints the law for a handful of conditioning sets, then confirms every case
against a full enumeration of the ensemble.
"""

from expforge.ensemble import CodeEnsembleSpec, conditional_law, message_vector
from expforge.fqlinalg import FqVector, in_span_star
from expforge.oracle import verify_conditional_laws

spec = CodeEnsembleSpec(N=2, K=2, q=3)
print(f"ensemble: N={spec.N} K={spec.K} q={spec.q}, {spec.n_codebooks} codebooks")

# observed codewords; any values are consistent with some (G, v)
seen = {1: FqVector(3, (1, 2)), 2: FqVector(3, (0, 1)),
        3: FqVector(3, (2, 2)), 6: FqVector(3, (1, 1))}

target = 0
for others in ([1], [1, 2], [3, 6], [1, 3]):
    us = [message_vector(m, spec) for m in others]
    pinned = in_span_star(message_vector(target, spec), us)
    law = conditional_law(spec, target, [(m, seen[m]) for m in others])
    where = f" at {law.mass_point.elems}" if law.mass_point is not None else ""
    print(f"  given x_m for m in {others}: u_0 in span* = {pinned}, law = {law.kind}{where}")

report = verify_conditional_laws(CodeEnsembleSpec(N=2, K=1, q=3))
print(f"exhaustive check: {report['n_cases']} cases, "
      f"{report['n_assignments']} assignments, {report['n_mismatches']} mismatches")
