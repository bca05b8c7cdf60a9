"""Construction-A lattices from the random linear ensemble (Loeliger's ensemble).

A lattice is ``beta * {c in Z^N : c mod q in C}`` for a linear code ``C = {uG}``
(offset zero).  Near the origin everything is handled inside the centred code
cube ``(-q/2, q/2]^N``, which holds every point of norm below ``beta q / 2``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate, special, stats
from sympy import nextprime

from expforge._budget import check_budget, resolve_budget
from expforge.ensemble import Codebook, CodeEnsembleSpec
from expforge.exponents import delta_cr, delta_star, poltyrev_exponent
from expforge.fqlinalg import rref

BALL_BUDGET = 2**24
ALPHA_BUDGET = 2**26
_TOL = 1e-9


def derive_beta(spec: CodeEnsembleSpec, gamma: float) -> float:
    """Per-dimension scale giving density ``gamma``: ``q**((K-N)/N) * gamma**(-1/N)``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    N, K, q = spec.N, spec.K, spec.q
    return math.exp((K - N) / N * math.log(q) - math.log(gamma) / N)


def log_unit_ball_volume(N: int) -> float:
    return 0.5 * N * math.log(math.pi) - special.gammaln(N / 2 + 1)


@dataclass(frozen=True)
class LatticeConfig:
    """Loeliger ensemble ``(N, K, q)`` at log density ``delta`` on AWGN of variance ``sigma2``."""

    spec: CodeEnsembleSpec
    delta: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        rebuilt = self.spec.M / (self.beta * self.spec.q) ** self.spec.N
        if abs(rebuilt / self.gamma - 1.0) > 1e-12:
            raise ValueError("density identity violated")

    @classmethod
    def from_gamma(cls, spec: CodeEnsembleSpec, gamma: float, sigma2: float) -> "LatticeConfig":
        return cls(spec, math.log(gamma) / spec.N, sigma2)

    @property
    def gamma(self) -> float:
        return math.exp(self.spec.N * self.delta)

    @property
    def beta(self) -> float:
        s = self.spec
        return math.exp((s.K - s.N) / s.N * math.log(s.q) - self.delta)

    @property
    def r_star(self) -> float:
        return r_star(self.spec.N, self.delta)


@dataclass(frozen=True)
class LatticePoint:
    """A lattice point ``beta * integer``; the integer vector is kept exactly."""

    integer: tuple[int, ...]
    beta: float

    @property
    def coords(self) -> np.ndarray:
        return self.beta * np.array(self.integer, dtype=float)


def centred_range(q: int) -> tuple[int, int]:
    """Inclusive integer range of the centred cube ``(-q/2, q/2]``."""
    return -((q - 1) // 2), q // 2


def remap_centered(point, q: int) -> np.ndarray:
    """Shift coordinates above ``q/2`` down by ``q``; inputs must lie in ``[0, q)``."""
    p = np.asarray(point, dtype=np.int64)
    if np.any(p < 0) or np.any(p >= q):
        raise ValueError(f"coordinates must lie in [0, {q})")
    return np.where(2 * p > q, p - q, p)


def uncenter(point, q: int) -> np.ndarray:
    return np.mod(np.asarray(point, dtype=np.int64), q)


def r_star(N: int, delta: float) -> float:
    """Effective radius ``e**-delta * V_N**(-1/N)`` of a lattice at log density ``delta``."""
    if N < 1:
        raise ValueError("N must be positive")
    return math.exp(-delta - log_unit_ball_volume(N) / N)


def admissibility_bound(r: float, N: int, K: int, gamma: float) -> float:
    """``q`` must exceed ``(4 r)**(N/K) * gamma**(1/K)`` for radius ``2r`` to sit in the cube."""
    return math.exp(N / K * math.log(4.0 * r) + math.log(gamma) / K)


def min_admissible_q(r_star: float, N: int, K: int, gamma: float) -> int:
    if r_star <= 0:
        raise ValueError("r_star must be positive")
    return int(nextprime(math.floor(admissibility_bound(r_star, N, K, gamma))))


def is_admissible(config: LatticeConfig, r: float | None = None) -> bool:
    r = config.r_star if r is None else r
    return 2.0 * r < config.beta * config.spec.q / 2.0


def q_schedule(N: int, R: float, slack: float = 0.0, cap: float | None = None,
               admissible: bool = False) -> int:
    """A prime ``q`` with ``0.5 log(N) / R + slack <= log q <= cap``.

    ``cap`` defaults to ``N / log N``.  With ``admissible=True`` the lower end
    is raised so the asymptotic radius fits the centred cube; the density
    cancels in that condition, leaving ``q > 4**(N/K) V_N**(-1/K)``.
    """
    if not 0 < R <= 1:
        raise ValueError("R must lie in (0, 1]")
    K = dimension_for_rate(N, R)
    if cap is None:
        cap = N / math.log(N) if N > 1 else math.inf
    lower = 0.5 / R * math.log(N) + slack
    q = int(nextprime(math.ceil(math.exp(lower) - 1e-9) - 1))
    if admissible:
        bound = math.exp(N / K * math.log(4.0) - log_unit_ball_volume(N) / K)
        q = max(q, int(nextprime(math.floor(bound))))
    if math.log(q) > cap:
        raise ValueError(f"empty window for N={N}, R={R}: need log q <= {cap:.3f}, "
                         f"smallest candidate is q={q}; increase N")
    return q


def dimension_for_rate(N: int, R: float) -> int:
    return max(1, math.ceil(R * N - 1e-12))


def _code_basis(G: np.ndarray, q: int) -> tuple[np.ndarray, list[int]]:
    red, pivots = rref(G, q)
    return red[: len(pivots)], pivots


def _cube_points_in_ball(basis: np.ndarray, pivots: Sequence[int], q: int, beta: float,
                         center: np.ndarray, radius: float, budget: int) -> np.ndarray:
    """Centred integer vectors of the code whose scaled image lies in the ball.

    Every codeword is ``a @ basis`` and carries ``a_i`` at pivot column ``i``,
    so the pivot coordinates are bounded first and extended one pivot at a time
    while the partial squared distance stays within the radius.
    """
    N = basis.shape[1] if basis.size else len(center)
    lo_c, hi_c = centred_range(q)
    r2 = radius * radius
    slack = _TOL * (1.0 + r2)
    partial = np.zeros((1, 0), dtype=np.int64)
    dist = np.zeros(1)
    for p in pivots:
        lo = max(lo_c, math.ceil((center[p] - radius) / beta - _TOL))
        hi = min(hi_c, math.floor((center[p] + radius) / beta + _TOL))
        if hi < lo:
            return np.zeros((0, N), dtype=np.int64)
        vals = np.arange(lo, hi + 1, dtype=np.int64)
        check_budget("ball enumeration", partial.shape[0] * vals.size, budget)
        d = dist[:, None] + (beta * vals[None, :] - center[p]) ** 2
        keep = d <= r2 + slack
        rows, cols = np.nonzero(keep)
        partial = np.hstack([partial[rows], vals[cols, None]])
        dist = d[rows, cols]
        if partial.shape[0] == 0:
            return np.zeros((0, N), dtype=np.int64)
    if len(pivots) == 0:
        words = np.zeros((1, N), dtype=np.int64)
    else:
        words = (np.mod(partial, q) @ basis) % q
    cent = np.where(2 * words > q, words - q, words)
    d = ((beta * cent - center[None, :]) ** 2).sum(axis=1)
    return cent[d <= r2 + slack]


def points_in_ball(book: Codebook, beta: float, center, radius: float,
                   budget: int | None = None) -> list[LatticePoint]:
    """Lattice points of the Construction-A lattice of ``book`` in a closed ball.

    Only the centred code cube is searched, so the ball must fit inside it:
    ``|center| + radius < beta * q / 2``.
    """
    spec = book.spec
    if any(book.v.elems):
        raise ValueError("Construction A uses codes with zero offset")
    check_budget("codebook size", spec.M, resolve_budget(BALL_BUDGET, budget))
    center = np.asarray(center, dtype=float)
    if np.linalg.norm(center) + radius >= beta * spec.q / 2:
        raise ValueError("q too small: the ball leaves the centred code cube")
    basis, pivots = _code_basis(book.G.array, spec.q)
    pts = _cube_points_in_ball(basis, pivots, spec.q, beta, center, radius,
                               resolve_budget(BALL_BUDGET, budget))
    return [LatticePoint(tuple(int(c) for c in row), beta) for row in pts]


def construction_a_points_bruteforce(G: np.ndarray, q: int, beta: float, center, radius: float,
                                     budget: int = 2**22) -> np.ndarray:
    """Integer vectors ``c`` with ``c mod q`` in the row space of ``G`` and ``|beta c - center| <= radius``.

    Scans the whole bounding box of the ball in ``Z^N`` and tests code
    membership against the explicit list of codewords; no cube assumption.
    """
    G = np.asarray(G, dtype=np.int64)
    K, N = G.shape
    center = np.asarray(center, dtype=float)
    msgs = (np.arange(q**K)[:, None] // q ** np.arange(K)) % q
    code = {tuple(w) for w in ((msgs @ G) % q).tolist()}
    ranges = [np.arange(math.ceil((center[i] - radius) / beta - _TOL),
                        math.floor((center[i] + radius) / beta + _TOL) + 1) for i in range(N)]
    total = math.prod(len(r) for r in ranges)
    check_budget("brute-force box", total, budget)
    if total == 0:
        return np.zeros((0, N), dtype=np.int64)
    box = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, N)
    d = ((beta * box - center) ** 2).sum(axis=1)
    box = box[d <= radius * radius + _TOL * (1.0 + radius * radius)]
    member = np.array([tuple(r) in code for r in np.mod(box, q).tolist()], dtype=bool)
    return box[member] if box.size else box


def lattice_alpha(z, beta: float, q: int, budget: int | None = None) -> Fraction:
    """``q**-N`` times the number of centred grid points ``c`` with ``|beta c - z| <= |z|``."""
    z = np.asarray(z, dtype=float)
    N = z.size
    radius = float(np.linalg.norm(z))
    lo_c, hi_c = centred_range(q)
    budget = resolve_budget(ALPHA_BUDGET, budget)
    r2 = radius * radius
    slack = _TOL * (1.0 + r2)
    dist = np.zeros(1)
    for i in range(N - 1):
        lo = max(lo_c, math.ceil((z[i] - radius) / beta - _TOL))
        hi = min(hi_c, math.floor((z[i] + radius) / beta + _TOL))
        if hi < lo:
            return Fraction(0)
        vals = np.arange(lo, hi + 1)
        check_budget("alpha lattice count", dist.size * vals.size, budget)
        d = (dist[:, None] + (beta * vals[None, :] - z[i]) ** 2).ravel()
        dist = d[d <= r2 + slack]
    # Last coordinate: count integers in an interval instead of enumerating them.
    rem = np.maximum(r2 + slack - dist, 0.0)
    half = np.sqrt(rem)
    lo = np.maximum(lo_c, np.ceil((z[-1] - half) / beta - _TOL))
    hi = np.minimum(hi_c, np.floor((z[-1] + half) / beta + _TOL))
    count = int(np.clip(hi - lo + 1, 0, None).sum())
    return Fraction(count, q**N)


def centred_shell_counts(q: int, N: int, n_max: int | None = None) -> np.ndarray:
    """``A[n]`` = number of centred cube vectors with squared norm ``n``, for ``n <= n_max``."""
    lo, hi = centred_range(q)
    top = N * max(lo * lo, hi * hi) if n_max is None else int(n_max)
    check_budget("shell counts", top + 1, resolve_budget(ALPHA_BUDGET))
    c = np.arange(lo, hi + 1)
    c = c[c * c <= top]
    one = np.bincount(c * c, minlength=1).astype(np.int64)
    out = np.array([1], dtype=np.int64)
    for _ in range(N):
        out = np.convolve(out, one)[: top + 1]
    return out


def _norm_pdf(rho, N: int, sigma: float):
    return stats.chi.pdf(rho / sigma, N) / sigma


def _cap_fraction(t, N: int):
    """Fraction of the unit sphere in ``R^N`` with first coordinate at least ``t`` (0 <= t <= 1)."""
    t = np.clip(t, 0.0, 1.0)
    if N == 1:
        return np.where(t <= 1.0, 0.5, 0.0)
    return 0.5 * special.betainc((N - 1) / 2.0, 0.5, 1.0 - t * t)


def _mean_count(rho, beta: float, N: int, n: np.ndarray, counts: np.ndarray) -> float:
    """Grid points in ``Ball(z, |z|)`` averaged over directions of ``z`` with ``|z| = rho``.

    A point at distance ``d`` from the origin lies in the ball iff the angle to
    ``z`` leaves ``z . c >= d**2 / 2``, a spherical cap of height ``d / (2 rho)``.
    """
    if rho <= 0:
        return 1.0
    live = beta * np.sqrt(n) <= 2 * rho
    return 1.0 + float((counts[live] * _cap_fraction(beta * np.sqrt(n[live]) / (2 * rho), N)).sum())


def _shells_within(config: LatticeConfig, rho_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero shells that can enter ``Ball(z, |z|)`` for ``|z| <= rho_max``."""
    n_max = int(math.floor((2 * rho_max / config.beta) ** 2 + 1e-9))
    shells = centred_shell_counts(config.spec.q, config.spec.N, n_max)
    n = np.nonzero(shells)[0]
    n = n[n > 0]
    return n, shells[n].astype(float)


def mean_alpha_at_radius(config: LatticeConfig, rho: float) -> float:
    """``alpha`` averaged over noise directions at a fixed noise norm ``rho``."""
    n, counts = _shells_within(config, rho)
    return _mean_count(rho, config.beta, config.spec.N, n, counts) * float(config.spec.q) ** (-config.spec.N)


def p1_p2(config: LatticeConfig, r: float | None = None) -> tuple[float, float]:
    """``P1 = (M-1) E[alpha ; |z| <= r]`` and ``P2 = P(|z| > r)``, ``r`` defaulting to ``r*``.

    ``alpha`` depends on the noise only through its norm after averaging over
    directions, and that average is a sum of spherical-cap areas over the
    shells of the centred grid, so ``P1`` is a one-dimensional integral.
    """
    spec, beta = config.spec, config.beta
    N, q = spec.N, spec.q
    if N > 12:
        raise ValueError("p1_p2 is limited to N <= 12")
    r = config.r_star if r is None else r
    sigma = math.sqrt(config.sigma2)
    P2 = float(stats.chi2.sf(r * r / config.sigma2, N))
    if r <= 0:
        return 0.0, P2
    n, counts = _shells_within(config, r)
    # the integrand has a kink wherever a new shell enters; split there
    starts = beta * np.sqrt(n) / 2
    edges = np.unique(np.concatenate([[0.0, r], starts[starts < r]]))
    if edges.size > 400:
        edges = np.unique(np.concatenate([[0.0, r], np.quantile(edges, np.linspace(0, 1, 400))]))

    def integrand(x):
        return _mean_count(x, beta, N, n, counts) * _norm_pdf(x, N, sigma)

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, b, limit=200, epsabs=0.0, epsrel=1e-9)
        total += val
    P1 = (spec.M - 1) * float(q) ** (-N) * total
    return float(P1), P2


def p1_asymptotic(config: LatticeConfig, r: float | None = None) -> float:
    """Large-q limit of ``P1``: ``gamma V_N E[|z|**N ; |z| <= r]``."""
    N = config.spec.N
    r = config.r_star if r is None else r
    sigma = math.sqrt(config.sigma2)
    x = r * r / (2 * config.sigma2)
    log_moment = (N * math.log(sigma) + 0.5 * N * math.log(2) + special.gammaln(N)
                  - special.gammaln(N / 2) + math.log(special.gammainc(N, x)))
    return math.exp(N * config.delta + log_unit_ball_volume(N) + log_moment)


def r_star_exact(config: LatticeConfig) -> float:
    """Noise norm at which the direction-averaged ``(M-1) alpha`` reaches one.

    Capped at ``beta q / 4``, beyond which balls leave the centred cube.
    """
    cap = config.beta * config.spec.q / 4
    scale = (config.spec.M - 1) * float(config.spec.q) ** (-config.spec.N)
    hi = min(2 * config.r_star, cap)
    while True:
        n, counts = _shells_within(config, hi)

        def excess(rho, n=n, counts=counts):
            return scale * _mean_count(rho, config.beta, config.spec.N, n, counts) - 1.0

        if excess(hi) >= 0:
            break
        if hi >= cap:
            return cap
        hi = min(2 * hi, cap)
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int
    errors: int = 0

    def __post_init__(self):
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        if not self.ci_low <= self.p_hat <= self.ci_high:
            raise ValueError("interval does not contain the estimate")


def wilson_estimate(errors: int, trials: int, seed: int) -> McEstimate:
    ci = stats.binomtest(errors, trials).proportion_ci(0.95, method="wilson")
    p = errors / trials
    return McEstimate(p, min(float(ci.low), p), max(float(ci.high), p), trials, seed, errors)


def _trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _decode_fails(basis, pivots, G, q, beta, z) -> bool:
    """Some nonzero lattice point is at least as close to ``z`` as the origin."""
    nz = float(np.linalg.norm(z))
    if 2 * nz < beta * q / 2:
        pts = _cube_points_in_ball(basis, pivots, q, beta, z, nz, BALL_BUDGET)
    else:
        pts = construction_a_points_bruteforce(G, q, beta, z, nz, budget=BALL_BUDGET)
    return bool(np.any(pts != 0, axis=1).any()) if pts.size else False


def _mc_counts(config: LatticeConfig, r: float, seed: int, start: int, stop: int,
               ties_as_errors: bool = True) -> tuple[int, int, int]:
    spec, beta = config.spec, config.beta
    sigma = math.sqrt(config.sigma2)
    ml = lower = upper = 0
    for t in range(start, stop):
        rng = _trial_rng(seed, t)
        G = rng.integers(0, spec.q, size=(spec.K, spec.N))
        z = sigma * rng.standard_normal(spec.N)
        basis, pivots = _code_basis(G, spec.q)
        # A rank-deficient G sends some nonzero message onto the origin: a tie.
        err = (ties_as_errors and len(pivots) < spec.K) or _decode_fails(basis, pivots, G, spec.q, beta, z)
        outside = float(np.linalg.norm(z)) > r
        ml += err
        lower += err and not outside
        upper += err or outside
    return ml, lower, upper


def _mc_counts_star(args):
    return _mc_counts(*args)


def mc_error_estimates(config: LatticeConfig, trials: int, seed: int, r: float | None = None,
                       workers: int = 1, ties_as_errors: bool = True) -> dict[str, McEstimate]:
    """Monte Carlo over codebooks and noise for the zero lattice point.

    Returns three estimates from the same trials: ``"ml"`` (the decoding error),
    ``"lower"`` (errors with ``|z| <= r`` only) and ``"upper"`` (errors plus
    every trial with ``|z| > r``).  Trial ``t`` draws from its own stream seeded
    by ``(seed, t)``, so results do not depend on ``workers``.

    With ``ties_as_errors`` a codebook in which two messages share a lattice
    point is an error, as for codes; otherwise only distinct nonzero lattice
    points in ``Ball(z, |z|)`` count.
    """
    if trials <= 0:
        raise ValueError("need at least one trial")
    r = config.r_star if r is None else r
    if not is_admissible(config, r):
        raise ValueError(f"q={config.spec.q} is not admissible for r={r:.4g}; "
                         f"need q > {admissibility_bound(r, config.spec.N, config.spec.K, config.gamma):.4g}")
    if workers == 0:
        import os
        workers = os.cpu_count() or 1
    if workers <= 1:
        ml, lo, up = _mc_counts(config, r, seed, 0, trials, ties_as_errors)
    else:
        edges = np.linspace(0, trials, workers + 1).astype(int)
        jobs = [(config, r, seed, int(a), int(b), ties_as_errors) for a, b in zip(edges[:-1], edges[1:])]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_mc_counts_star, jobs))
        ml, lo, up = (sum(p[i] for p in parts) for i in range(3))
    return {
        "ml": wilson_estimate(ml, trials, seed),
        "lower": wilson_estimate(lo, trials, seed),
        "upper": wilson_estimate(up, trials, seed),
    }


def mc_error_probability(config: LatticeConfig, trials: int, seed: int, estimator: str = "ml",
                         workers: int = 1, ties_as_errors: bool = True) -> McEstimate:
    return mc_error_estimates(config, trials, seed, workers=workers,
                              ties_as_errors=ties_as_errors)[estimator]


def lattice_config(N: int, sigma2: float, R: float | None = None, K: int | None = None,
                   delta: float | None = None, gamma: float | None = None, q="auto",
                   slack: float = 0.0) -> LatticeConfig:
    """Build a config from experiment-style parameters; ``q="auto"`` uses :func:`q_schedule`."""
    if (R is None) == (K is None):
        raise ValueError("give exactly one of R and K")
    if (delta is None) == (gamma is None):
        raise ValueError("give exactly one of delta and gamma")
    if K is None:
        K = dimension_for_rate(N, R)
    if delta is None:
        delta = math.log(gamma) / N
    if q == "auto":
        q = q_schedule(N, K / N, slack=slack, admissible=True)
    return LatticeConfig(CodeEnsembleSpec(N, K, int(q)), float(delta), float(sigma2))


@dataclass
class LatticeExperiment:
    config: LatticeConfig
    trials: int
    seed: int
    estimates: dict[str, McEstimate] = field(default_factory=dict)
    P1: float = math.nan
    P2: float = math.nan

    def to_dict(self) -> dict:
        c = self.config
        ml = self.estimates["ml"]
        return {
            "N": c.spec.N, "K": c.spec.K, "q": c.spec.q, "delta": c.delta, "sigma2": c.sigma2,
            "gamma": c.gamma, "beta": c.beta, "r_star": c.r_star,
            "delta_star": delta_star(c.sigma2), "delta_cr": delta_cr(c.sigma2),
            "trials": self.trials, "seed": self.seed,
            "p_hat": ml.p_hat, "ci": [ml.ci_low, ml.ci_high], "errors": ml.errors,
            "lower_estimate": {"p_hat": self.estimates["lower"].p_hat,
                               "ci": [self.estimates["lower"].ci_low, self.estimates["lower"].ci_high]},
            "upper_estimate": {"p_hat": self.estimates["upper"].p_hat,
                               "ci": [self.estimates["upper"].ci_low, self.estimates["upper"].ci_high]},
            "P1": self.P1, "P2": self.P2, "P1_over_q": self.P1 / c.spec.q,
            "exponent_predicted": poltyrev_exponent(c.delta, c.sigma2),
        }


def run_lattice_experiment(config: LatticeConfig, trials: int, seed: int, workers: int = 1) -> LatticeExperiment:
    est = mc_error_estimates(config, trials, seed, workers=workers)
    P1, P2 = p1_p2(config)
    return LatticeExperiment(config, trials, seed, est, P1, P2)
