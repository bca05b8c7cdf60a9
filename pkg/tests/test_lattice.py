import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from expforge.ensemble import Codebook, CodeEnsembleSpec, sample_codebook
from expforge.exponents import delta_cr
from expforge.fqlinalg import FqMatrix, FqVector, check_modulus
from expforge.lattice import (
    LatticeConfig,
    admissibility_bound,
    centred_shell_counts,
    construction_a_points_bruteforce,
    derive_beta,
    lattice_alpha,
    lattice_config,
    log_unit_ball_volume,
    mc_error_estimates,
    mc_error_probability,
    mean_alpha_at_radius,
    min_admissible_q,
    p1_asymptotic,
    p1_p2,
    points_in_ball,
    q_schedule,
    r_star,
    r_star_exact,
    remap_centered,
    wilson_estimate,
)

UNIT_DENSITY_S2 = 1 / (2 * math.pi * math.e)


def zero_offset(book):
    return Codebook(book.spec, book.G, FqVector(book.spec.q, (0,) * book.spec.N))


def test_remap_example_and_even_boundary():
    assert remap_centered([4, 2, 3], 5).tolist() == [-1, 2, -2]
    assert remap_centered([1, 0], 2).tolist() == [1, 0]  # q/2 itself is not shifted
    with pytest.raises(ValueError):
        remap_centered([5], 5)


def test_beta_example():
    assert derive_beta(CodeEnsembleSpec(2, 1, 2), 1.0) == pytest.approx(2**-0.5, abs=1e-15)


def test_config_beta_matches_derive_beta():
    c = LatticeConfig.from_gamma(CodeEnsembleSpec(3, 2, 7), 2.5, 0.1)
    assert c.beta == pytest.approx(derive_beta(c.spec, 2.5), rel=1e-13)
    assert c.gamma == pytest.approx(2.5, rel=1e-13)
    with pytest.raises(ValueError):
        LatticeConfig(c.spec, 0.0, -1.0)


def test_r_star_is_the_radius_of_a_unit_cell_ball():
    for N in (1, 2, 5):
        for delta in (-1.0, 0.3):
            vol = math.exp(log_unit_ball_volume(N)) * r_star(N, delta) ** N
            assert vol * math.exp(N * delta) == pytest.approx(1.0, rel=1e-12)


def test_min_admissible_q():
    q = min_admissible_q(1.0, 4, 2, 2.0)
    bound = admissibility_bound(1.0, 4, 2, 2.0)
    assert q > bound and check_modulus(q) == q
    with pytest.raises(ValueError):
        min_admissible_q(0.0, 4, 2, 2.0)


def test_q_schedule_examples():
    assert q_schedule(16, 0.5) == 17
    with pytest.raises(ValueError):
        q_schedule(2, 1.0, cap=0.5)
    for N in (4, 6, 8):
        q = q_schedule(N, 0.5, admissible=True)
        K = math.ceil(N / 2)
        assert check_modulus(q) == q
        assert q > 4 ** (N / K) * math.exp(-log_unit_ball_volume(N) / K)
        assert math.log(q) >= 0.5 / 0.5 * math.log(N)


def test_points_in_ball_small_radius_is_origin_only(rng):
    spec = CodeEnsembleSpec(3, 1, 7)
    book = zero_offset(sample_codebook(spec, rng))
    pts = points_in_ball(book, 1.0, np.zeros(3), 0.5)
    assert [p.integer for p in pts] == [(0, 0, 0)]


def test_points_in_ball_identity_code_counts_integer_points():
    spec = CodeEnsembleSpec(2, 2, 11)
    book = Codebook(spec, FqMatrix.identity(2, 11), FqVector(11, (0, 0)))
    center = np.array([0.3, -0.2])
    pts = points_in_ball(book, 1.0, center, 2.5)
    brute = sum(1 for a in range(-5, 6) for b in range(-5, 6)
                if (a - 0.3) ** 2 + (b + 0.2) ** 2 <= 2.5**2)
    assert len(pts) == brute


def test_points_in_ball_rejects_large_balls(rng):
    spec = CodeEnsembleSpec(2, 1, 5)
    book = zero_offset(sample_codebook(spec, rng))
    with pytest.raises(ValueError):
        points_in_ball(book, 1.0, np.zeros(2), 2.6)
    offset = Codebook(spec, book.G, FqVector(5, (1, 0)))
    with pytest.raises(ValueError, match="zero offset"):
        points_in_ball(offset, 1.0, np.zeros(2), 0.1)


def test_points_in_ball_matches_brute_force(rng):
    for _ in range(20):
        q = int(rng.choice([5, 7, 11]))
        N = int(rng.integers(2, 4))
        K = int(rng.integers(1, N + 1))
        book = zero_offset(sample_codebook(CodeEnsembleSpec(N, K, q), rng))
        beta = float(rng.uniform(0.3, 1.0))
        c = rng.normal(size=N)
        c *= 0.2 * beta * q / max(np.linalg.norm(c), 1e-9)
        radius = 0.25 * beta * q
        fast = sorted(p.integer for p in points_in_ball(book, beta, c, radius))
        slow = sorted(map(tuple, construction_a_points_bruteforce(book.G.array, q, beta, c, radius).tolist()))
        assert fast == slow


def test_density_matches_gamma_in_a_large_ball(rng):
    for N, K, q in ((2, 1, 101), (3, 2, 31), (4, 2, 31)):
        spec = CodeEnsembleSpec(N, K, q)
        while True:
            book = zero_offset(sample_codebook(spec, rng))
            if np.linalg.matrix_rank(book.G.array) == K:  # over the reals suffices as a filter
                break
        gamma = 50.0
        beta = derive_beta(spec, gamma)
        r = 0.49 * beta * q
        n = len(points_in_ball(book, beta, np.zeros(N), r))
        vol = math.exp(log_unit_ball_volume(N)) * r**N
        assert n / vol == pytest.approx(gamma, rel=0.05)


def test_lattice_alpha_examples():
    assert lattice_alpha([1.2], 1.0, 5) == Fraction(3, 5)
    assert lattice_alpha([0.0, 0.0], 0.7, 5) == Fraction(1, 25)
    # huge noise sees the whole centred grid
    assert lattice_alpha([100.0, 0.0], 0.5, 5) == Fraction(25, 25) * Fraction(sum(
        1 for a, b in itertools.product(range(-2, 3), repeat=2)
        if (0.5 * a - 100) ** 2 + (0.5 * b) ** 2 <= 100**2), 25)


def test_lattice_alpha_matches_direct_count(rng):
    q, beta = 7, 0.6
    grid = np.array(list(itertools.product(range(-3, 4), repeat=3)))
    for _ in range(30):
        z = rng.normal(size=3) * 1.2
        inside = ((beta * grid - z) ** 2).sum(axis=1) <= (z**2).sum() + 1e-9
        assert lattice_alpha(z, beta, q) == Fraction(int(inside.sum()), q**3)


def test_lattice_alpha_grows_along_rays(rng):
    for _ in range(10):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        vals = [lattice_alpha(t * d, 0.5, 7) for t in np.linspace(0, 3, 25)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_shell_counts():
    shells = centred_shell_counts(5, 2)
    assert shells.sum() == 25
    assert shells[0] == 1 and shells[1] == 4 and shells[8] == 4
    assert centred_shell_counts(5, 2, n_max=2).tolist() == [1, 4, 4]


def test_direction_average_of_alpha_by_sampling(rng):
    c = LatticeConfig(CodeEnsembleSpec(3, 2, 7), -0.3, 0.05)
    rho = 0.8
    d = rng.normal(size=(4000, 3))
    d *= rho / np.linalg.norm(d, axis=1, keepdims=True)
    sampled = np.mean([float(lattice_alpha(z, c.beta, 7)) for z in d])
    assert mean_alpha_at_radius(c, rho) == pytest.approx(sampled, rel=0.03)


def test_p2_closed_form_and_limits():
    c = LatticeConfig.from_gamma(CodeEnsembleSpec(2, 1, 7), 1.0, 0.1)
    _, P2 = p1_p2(c, 0.5)
    assert P2 == pytest.approx(math.exp(-0.25 / 0.2), rel=1e-12)
    assert p1_p2(c, 0.0) == (0.0, 1.0)


def test_p1_approaches_its_large_q_limit():
    limit = p1_asymptotic(LatticeConfig(CodeEnsembleSpec(3, 2, 11), -0.5, 0.05))
    errs = [abs(p1_p2(LatticeConfig(CodeEnsembleSpec(3, 2, q), -0.5, 0.05))[0] / limit - 1)
            for q in (11, 101, 1009)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.02


def test_exact_radius_close_to_asymptotic_for_large_q():
    c = LatticeConfig(CodeEnsembleSpec(3, 2, 1009), -0.5, 0.05)
    assert r_star_exact(c) == pytest.approx(c.r_star, rel=0.02)


def test_mc_tiny_noise_never_errs():
    c = lattice_config(4, 1e-6, R=0.5, delta=-1.0)
    est = mc_error_probability(c, 10000, seed=3, ties_as_errors=False)
    assert est.errors == 0 and est.p_hat == 0.0


def test_mc_is_reproducible_and_worker_independent():
    c = lattice_config(4, UNIT_DENSITY_S2, R=0.5, delta=delta_cr(UNIT_DENSITY_S2) - 0.2)
    a = mc_error_estimates(c, 400, seed=5)
    b = mc_error_estimates(c, 400, seed=5)
    w = mc_error_estimates(c, 400, seed=5, workers=2)
    assert a == b == w
    assert a["lower"].p_hat <= a["ml"].p_hat <= a["upper"].p_hat


def test_mc_rejects_inadmissible_q_and_zero_trials():
    c = LatticeConfig(CodeEnsembleSpec(4, 2, 3), -0.2, 0.05)
    with pytest.raises(ValueError, match="admissible"):
        mc_error_probability(c, 10, seed=0)
    with pytest.raises(ValueError):
        mc_error_probability(lattice_config(4, 0.05, R=0.5, delta=-1.0), 0, seed=0)


def test_mc_sandwich_at_small_scale():
    c = lattice_config(4, UNIT_DENSITY_S2, R=0.5, delta=delta_cr(UNIT_DENSITY_S2) - 0.3)
    P1, P2 = p1_p2(c)
    est = mc_error_probability(c, 20000, seed=1)
    assert est.ci_high >= P1 / c.spec.q and est.ci_low <= P1 + P2


def test_wilson_interval():
    e = wilson_estimate(0, 100, 0)
    assert e.ci_low == 0.0 and 0 < e.ci_high < 0.05
    e = wilson_estimate(50, 100, 0)
    assert e.ci_low < 0.5 < e.ci_high
