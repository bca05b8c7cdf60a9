"""Acceptance suite: one test per criterion, each ending in a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the verdict lines
are collected in the "acceptance criteria" section at the end of the report.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from expforge.bounds import bonferroni_lower, decaen_lower
from expforge.channel import bsc, capacity_uniform, from_matrix, qsc
from expforge.ensemble import Codebook, CodeEnsembleSpec, sample_codebook
from expforge.exponents import (
    critical_rate,
    delta_cr,
    delta_star,
    gallager_E0,
    poltyrev_exponent,
    poltyrev_mid_branch,
    random_coding_exponent,
    slope_fit,
    slope_fit_log,
    sphere_packing_exponent,
)
from expforge.fqlinalg import FqVector
from expforge.lattice import (
    LatticeConfig,
    construction_a_points_bruteforce,
    derive_beta,
    lattice_config,
    mc_error_estimates,
    mc_error_probability,
    p1_p2,
    points_in_ball,
    remap_centered,
    uncenter,
)
from expforge.oracle import (
    qsc_log_p1_p2,
    verify_conditional_laws,
    verify_ensemble_bounds,
    verify_random_sandwich,
)

GRID = [(2, 2, 1), (2, 3, 2), (3, 2, 1), (3, 2, 2), (5, 2, 1)]
UNIT_DENSITY_S2 = 1 / (2 * math.pi * math.e)  # puts the capacity density at zero


def verdict(record_property, index, label, ok, detail):
    line = f"[{index}] {'PASS' if ok else 'FAIL'}  {label}: {detail}"
    record_property("acceptance", line)
    print(line)
    assert ok, line


def grid_channels(q):
    """A q-ary symmetric channel, plus a lopsided three-output channel for binary input."""
    chans = [bsc(Fraction(1, 10)) if q == 2 else qsc(q, Fraction(1, 5))]
    if q == 2:
        chans.append(from_matrix([["4/5", "3/20", "1/20"], ["1/10", "3/10", "3/5"]],
                                 warn_asymmetric=False))
    return chans


@pytest.fixture(scope="module")
def bound_reports():
    out = {}
    for q, N, K in GRID:
        spec = CodeEnsembleSpec(N, K, q)
        out[(q, N, K)] = [verify_ensemble_bounds(spec, ch, (1.0, 1.5, 2.0)) for ch in grid_channels(q)]
    return out


@pytest.mark.slow
def test_criterion_1_conditional_laws_exact(record_property):
    t0 = time.perf_counter()
    cases = assignments = mismatches = 0
    for q, N, K in GRID:
        rep = verify_conditional_laws(CodeEnsembleSpec(N, K, q), ks=(1, 2, 3))
        cases += rep["n_cases"]
        assignments += rep["n_assignments"]
        mismatches += rep["n_mismatches"]
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and assignments > 0 and elapsed <= 300
    verdict(record_property, 1, "conditional codeword laws equal exhaustive frequencies", ok,
            f"{cases} cases, {assignments} conditioning assignments, {mismatches} mismatches, {elapsed:.0f}s")


def test_criterion_2_pairwise_intersections(record_property, bound_reports):
    exact = bounded = bad = 0
    for reps in bound_reports.values():
        for rep in reps:
            exact += rep["intersections_exact"]
            bounded += rep["intersections_bounded"]
            bad += rep["intersection_violations"]
    verdict(record_property, 2, "pairwise intersections are alpha^2 off span*, at most alpha on it",
            bad == 0 and exact > 0 and bounded > 0,
            f"{exact} exact-square checks, {bounded} upper-bound checks, {bad} violations")


def test_criterion_3_sandwich_on_every_output(record_property, bound_reports):
    checks = bad = 0
    skipped = []
    for (q, N, K), reps in bound_reports.items():
        if q**K <= 2:
            skipped.append(f"{(q, N, K)}")  # the linear lower bound needs q^K > 2
        for rep in reps:
            checks += rep["sandwich_checks"]
            bad += rep["sandwich_violations"]
    rnd_checks = rnd_bad = 0
    for N in (1, 2, 3):
        for M in (2, 3, 4):
            for ch in (bsc(Fraction(1, 10)), grid_channels(2)[1]):
                rep = verify_random_sandwich(2, N, M, ch)
                rnd_checks += rep["checks"]
                rnd_bad += rep["violations"]
    verdict(record_property, 3, "linear and i.i.d. sandwiches contain the exact union probability",
            bad == 0 and rnd_bad == 0 and checks > 0 and rnd_checks > 0,
            f"linear {checks} checks/{bad} violations (not applicable at q^K=2: {', '.join(skipped)}); "
            f"i.i.d. {rnd_checks} checks/{rnd_bad} violations")


def test_criterion_4_decaen_on_random_spaces(record_property):
    rng = np.random.default_rng(4242)
    bad = {"decaen": 0, "bonferroni": 0, "union": 0}
    for _ in range(1000):
        n_atoms = int(rng.integers(1, 13))
        n_events = int(rng.integers(1, 7))
        weights = rng.integers(1, 100, n_atoms)
        probs = [Fraction(int(w), int(weights.sum())) for w in weights]
        events = rng.random((n_events, n_atoms)) < rng.uniform(0.1, 0.9)
        singles = [sum((p for p, e in zip(probs, ev) if e), Fraction(0)) for ev in events]
        table = [[sum((p for p, a, b in zip(probs, ei, ej) if a and b), Fraction(0))
                  for ej in events] for ei in events]
        union = sum((p for p, hit in zip(probs, events.any(axis=0)) if hit), Fraction(0))
        bad["decaen"] += decaen_lower(singles, table) > union
        bad["bonferroni"] += bonferroni_lower(singles, table) > union
        bad["union"] += union > (sum(singles) if n_events > 1 else singles[0])
    verdict(record_property, 4, "de Caen, Bonferroni and union bounds on 1000 random spaces",
            sum(bad.values()) == 0, f"violations {bad}")


@pytest.mark.slow
def test_criterion_5_binary_symmetric_tightness(record_property):
    t0 = time.perf_counter()
    eps, R = 0.05, 0.2 * math.log(2)
    ch = qsc(2, Fraction(1, 20))
    e_r, _, r_cr = random_coding_exponent(ch, R)
    e_sp = sphere_packing_exponent(ch, R)
    Ns = list(range(8, 65, 8))
    rho = 2.0
    logs = {N: qsc_log_p1_p2(2, eps, N, math.log(math.expm1(N * R)), rho) for N in Ns}
    fit1 = slope_fit_log([(N, logs[N][0]) for N in Ns])
    fit2 = slope_fit_log([(N, logs[N][1]) for N in Ns])
    gaps = [-logs[N][0] / N - e_r for N in Ns]
    monotone = all(abs(b) < abs(a) for a, b in zip(gaps, gaps[1:]))
    a_ok = fit2.estimate - fit1.estimate >= 0.01
    b_ok = abs(fit1.estimate - e_r) <= 0.02 and monotone
    elapsed = time.perf_counter() - t0
    verdict(record_property, 5, "P1/P2 exponents for BSC(0.05) at R = 0.2 ln 2",
            R < r_cr and a_ok and b_ok and elapsed <= 600,
            f"E_r={e_r:.4f} (E_sp={e_sp:.4f}, R_cr={r_cr:.4f}); slope P1={fit1.estimate:.4f}, "
            f"P2(rho=2)={fit2.estimate:.4f}, excess {fit2.estimate - fit1.estimate:.4f}; "
            f"-log P1/N - E_r from {gaps[0]:.4f} to {gaps[-1]:.4f}, monotone={monotone}")


def test_criterion_6_exponent_function_properties(record_property):
    problems = []
    channels = [bsc(0.1), bsc(0.02), qsc(3, 0.2), qsc(5, 0.3),
                from_matrix([[0.7, 0.2, 0.1], [0.1, 0.2, 0.7]], warn_asymmetric=False)]
    for ch in channels:
        if gallager_E0(ch, 0.0) != 0.0:
            problems.append("E0(0) != 0")
        C = capacity_uniform(ch)
        r_cr = critical_rate(ch)
        for R in (C, C + 1e-6, 1.5 * C, C + 1.0):
            if abs(random_coding_exponent(ch, R)[0]) > 1e-9:
                problems.append(f"E_r({R:.4f}) nonzero above capacity")
        for R in np.linspace(r_cr, C, 20):
            if abs(sphere_packing_exponent(ch, R) - random_coding_exponent(ch, R)[0]) > 1e-8:
                problems.append(f"E_sp != E_r at R={R:.4f}")
        for R in np.linspace(0, r_cr, 10, endpoint=False):
            if random_coding_exponent(ch, R)[1] != 1.0:
                problems.append(f"rho* != 1 at R={R:.4f}")
    for s2 in (1e-3, 0.03, UNIT_DENSITY_S2, 1.0, 40.0):
        if abs(delta_star(s2) - delta_cr(s2) - 0.5 * math.log(2)) > 1e-15:
            problems.append(f"delta gap at sigma2={s2}")
        if abs(poltyrev_mid_branch(delta_star(s2), s2)) > 1e-12:
            problems.append("middle branch nonzero at capacity")
        if abs(poltyrev_mid_branch(delta_cr(s2), s2) - (1 - math.log(2)) / 2) > 1e-12:
            problems.append("middle branch wrong at critical density")
    verdict(record_property, 6, "exponent-function identities", not problems,
            f"{len(channels)} channels, 5 noise levels, problems: {problems or 'none'}")


@pytest.mark.slow
def test_criterion_7_lattice_sandwich(record_property):
    t0 = time.perf_counter()
    details, ok = [], True
    for N in (4, 6):
        c = lattice_config(N, UNIT_DENSITY_S2, R=0.5, delta=delta_cr(UNIT_DENSITY_S2) - 0.5)
        P1, P2 = p1_p2(c)
        est = mc_error_probability(c, 100_000, seed=7)
        lo, hi = P1 / c.spec.q, P1 + P2
        hit = est.ci_low <= hi and est.ci_high >= lo
        ok &= hit
        details.append(f"N={N} q={c.spec.q}: CI [{est.ci_low:.3g}, {est.ci_high:.3g}] vs "
                       f"[{lo:.3g}, {hi:.3g}]")
    elapsed = time.perf_counter() - t0
    verdict(record_property, 7, "lattice Monte Carlo inside the P1/P2 band",
            ok and elapsed <= 900, "; ".join(details) + f"; {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_8_lattice_slope_trend(record_property):
    delta = delta_cr(UNIT_DENSITY_S2) - 0.7
    target = poltyrev_exponent(delta, UNIT_DENSITY_S2, "continuous")
    trials = {2: 20_000, 4: 50_000, 6: 150_000, 8: 400_000}
    upper, lower, analytic_gap = [], [], []
    for N, T in trials.items():
        c = lattice_config(N, UNIT_DENSITY_S2, R=0.5, delta=delta)
        est = mc_error_estimates(c, T, seed=8)
        upper.append((N, est["upper"].p_hat))
        lower.append((N, est["lower"].p_hat))
        P1, P2 = p1_p2(c)
        analytic_gap.append(math.log((P1 + P2) / (P1 / c.spec.q - P2)) / N)
    fit = slope_fit(upper)

    def local(points):
        return [-(math.log(b[1]) - math.log(a[1])) / (b[0] - a[0]) for a, b in zip(points, points[1:])]

    est_gap = [abs(u - l) for u, l in zip(local(upper), local(lower))]
    est_shrinks = all(b <= a + 1e-12 for a, b in zip(est_gap, est_gap[1:]))
    analytic_shrinks = all(b < a for a, b in zip(analytic_gap, analytic_gap[1:]))
    ok = abs(fit.estimate - target) <= 0.15 and est_shrinks and analytic_shrinks
    verdict(record_property, 8, "lattice error slope tracks the Poltyrev exponent", ok,
            f"slope {fit.estimate:.4f} +- {fit.stderr:.4f} vs {target:.4f}; "
            f"estimator slope gaps {[round(g, 4) for g in est_gap]}; "
            f"bound gap per dimension {[round(g, 3) for g in analytic_gap]}")


def test_criterion_9_structural_batteries(record_property):
    rng = np.random.default_rng(99)
    remap_bad = 0
    for q in (2, 3, 5, 7):
        lo, hi = -((q - 1) // 2), q // 2
        for N in (1, 2, 3):
            pts = np.array(list(itertools.product(range(q), repeat=N)))
            img = remap_centered(pts, q)
            inside = ((2 * img > -q) & (2 * img <= q)).all()
            distinct = len({tuple(r) for r in img.tolist()}) == len(pts)
            back = np.array_equal(uncenter(img, q), pts)
            cube = {tuple(r) for r in itertools.product(range(lo, hi + 1), repeat=N)}
            remap_bad += not (inside and distinct and back and cube == {tuple(r) for r in img.tolist()})
    density_bad = 0
    for _ in range(100):
        q = int(rng.choice([2, 3, 5, 7, 11, 13, 101]))
        N = int(rng.integers(1, 9))
        K = int(rng.integers(1, N + 1))
        gamma = float(np.exp(rng.uniform(-4, 4)))
        spec = CodeEnsembleSpec(N, K, q)
        beta = derive_beta(spec, gamma)
        c = LatticeConfig.from_gamma(spec, gamma, 0.1)
        density_bad += abs(q**K / (beta * q) ** N / gamma - 1) > 1e-12
        density_bad += abs(q**K / (c.beta * q) ** N / gamma - 1) > 1e-12
    ball_bad = 0
    for _ in range(50):
        q = int(rng.choice([3, 5, 7, 11]))
        N = int(rng.integers(1, 4))
        K = int(rng.integers(1, N + 1))
        spec = CodeEnsembleSpec(N, K, q)
        b = sample_codebook(spec, rng)
        book = Codebook(spec, b.G, FqVector(q, (0,) * N))
        beta = float(rng.uniform(0.2, 1.5))
        center = rng.normal(size=N)
        center *= float(rng.uniform(0, 0.2)) * beta * q / max(np.linalg.norm(center), 1e-12)
        radius = float(rng.uniform(0.05, 0.25)) * beta * q
        fast = sorted(p.integer for p in points_in_ball(book, beta, center, radius))
        slow = sorted(map(tuple, construction_a_points_bruteforce(b.G.array, q, beta, center, radius).tolist()))
        ball_bad += fast != slow
    verdict(record_property, 9, "remap bijection, density identity, ball enumeration",
            remap_bad == 0 and density_bad == 0 and ball_bad == 0,
            f"remap failures {remap_bad}/12, density failures {density_bad}/200, "
            f"ball mismatches {ball_bad}/50")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
