"""Gallager and Poltyrev error exponents, all in nats.

The input distribution is always uniform.  For channels whose exponent is
maximised by the uniform input this is the usual random-coding exponent; for
any other channel it is the exponent of uniform inputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from expforge.channel import Dmc

INV_PHI = (math.sqrt(5) - 1) / 2
LN2 = math.log(2.0)
RHO_MAX = 64.0


def golden_section_max(f, a: float, b: float, tol: float = 1e-10, grid: int = 33) -> tuple[float, float]:
    """Maximise a unimodal ``f`` on ``[a, b]``: coarse grid scan, then golden-section."""
    xs = np.linspace(a, b, grid)
    vals = [f(x) for x in xs]
    i = int(np.argmax(vals))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    best = max([(f(x), x), (vals[i], xs[i])])
    return float(best[1]), float(best[0])


def _matrix(ch) -> np.ndarray:
    return ch.matrix if isinstance(ch, Dmc) else np.asarray(ch, dtype=float)


def _e0_terms(P: np.ndarray, rho: float) -> tuple[float, float]:
    """``E_0(rho)`` and its derivative in ``rho`` for a uniform input."""
    q = P.shape[0]
    s = 1.0 / (1.0 + rho)
    pos = P > 0
    a = np.where(pos, P, 1.0) ** s * pos
    logP = np.log(np.where(pos, P, 1.0))
    T = a.sum(axis=0) / q
    dT = -(s**2) * (a * logP).sum(axis=0) / q
    live = T > 0
    T, dT = T[live], dT[live]
    F_terms = T ** (1.0 + rho)
    F = F_terms.sum()
    dF = (F_terms * (np.log(T) + (1.0 + rho) * dT / T)).sum()
    return float(-math.log(F)), float(-dF / F)


def gallager_E0(ch, rho: float) -> float:
    """``-log sum_y (sum_x P(y|x)**(1/(1+rho)) / q)**(1+rho)``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 0:
        return 0.0  # the inner sums add up to one; avoid the rounding in log(sum)
    return _e0_terms(_matrix(ch), rho)[0]


def gallager_E0_derivative(ch, rho: float) -> float:
    return _e0_terms(_matrix(ch), rho)[1]


def critical_rate(ch) -> float:
    """Slope of ``E_0`` at ``rho = 1``; below it the optimal ``rho`` sticks at one."""
    return gallager_E0_derivative(ch, 1.0)


def _maximise(P: np.ndarray, R: float, hi: float) -> tuple[float, float]:
    """``max_{0 <= rho <= hi} E_0(rho) - rho R`` and its maximiser."""
    d0 = _e0_terms(P, 0.0)[1]
    if R >= d0:
        return 0.0, 0.0
    e_hi, d_hi = _e0_terms(P, hi)
    if d_hi >= R:
        return float(e_hi - hi * R), float(hi)
    rho, val = golden_section_max(lambda r: _e0_terms(P, r)[0] - r * R, 0.0, hi)
    return max(val, 0.0), rho


def random_coding_exponent(ch, R: float) -> tuple[float, float, float]:
    """``(E_r(R), rho*, R_cr)`` with ``E_r(R) = max_{0<=rho<=1} E_0(rho) - rho R``."""
    if R < 0:
        raise ValueError("rate must be nonnegative")
    P = _matrix(ch)
    val, rho = _maximise(P, R, 1.0)
    return val, rho, _e0_terms(P, 1.0)[1]


def sphere_packing_optimum(ch, R: float, rho_max: float = RHO_MAX) -> tuple[float, float]:
    """``(E_sp(R), rho)``; ``E_sp`` is ``inf`` when the maximand still rises at ``rho_max``."""
    if R <= 0:
        raise ValueError("rate must be positive")
    P = _matrix(ch)
    if _e0_terms(P, rho_max)[1] > R:
        return math.inf, rho_max
    return _maximise(P, R, rho_max)


def sphere_packing_exponent(ch, R: float, rho_max: float = RHO_MAX) -> float:
    return sphere_packing_optimum(ch, R, rho_max)[0]


# Poltyrev's exponent for unconstrained lattices on the AWGN channel.

def delta_star(sigma2: float) -> float:
    """Largest achievable normalised log density, ``0.5 log(1 / (2 pi e sigma2))``."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return 0.5 * math.log(1.0 / (2.0 * math.pi * math.e * sigma2))


def delta_cr(sigma2: float) -> float:
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return 0.5 * math.log(1.0 / (4.0 * math.pi * math.e * sigma2))


POLTYREV_CONSTANTS = {
    # straight line meeting the curved branch with matching value and slope
    "continuous": 0.5 * math.log(math.e / 4.0),
    # the constant as printed alongside the piecewise formula
    "printed": math.log(math.e / 4.0),
}


def poltyrev_low_branch(delta: float, sigma2: float, variant: str = "continuous") -> float:
    return (delta_star(sigma2) - delta) + POLTYREV_CONSTANTS[variant]


def poltyrev_mid_branch(delta: float, sigma2: float) -> float:
    t = delta_star(sigma2) - delta
    return 0.5 * (math.exp(2.0 * t) - 2.0 * t - 1.0)


def poltyrev_exponent(delta: float, sigma2: float, variant: str = "continuous") -> float:
    if delta >= delta_star(sigma2):
        return 0.0
    if delta <= delta_cr(sigma2):
        return poltyrev_low_branch(delta, sigma2, variant)
    return poltyrev_mid_branch(delta, sigma2)


@dataclass(frozen=True)
class SlopeFit:
    estimate: float
    stderr: float
    n_range: tuple[int, ...]
    intercept: float = 0.0


def slope_fit(data: Iterable[tuple[int, float]]) -> SlopeFit:
    """Least-squares slope of ``-log p`` against ``N``."""
    data = list(data)
    if len(data) < 3:
        raise ValueError("need at least three points")
    Ns = np.array([n for n, _ in data], dtype=float)
    ps = np.array([p for _, p in data], dtype=float)
    if np.any(ps <= 0) or np.any(ps >= 1):
        raise ValueError("probabilities must lie in (0, 1)")
    fit = stats.linregress(Ns, -np.log(ps))
    stderr = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    return SlopeFit(float(fit.slope), stderr, tuple(int(n) for n in Ns), float(fit.intercept))


def slope_fit_log(data: Iterable[tuple[int, float]]) -> SlopeFit:
    """As :func:`slope_fit` but for ``(N, log p)`` pairs, for values below float range."""
    data = list(data)
    if len(data) < 3:
        raise ValueError("need at least three points")
    Ns = np.array([n for n, _ in data], dtype=float)
    logs = np.array([lp for _, lp in data], dtype=float)
    if np.any(logs >= 0):
        raise ValueError("log probabilities must be negative")
    fit = stats.linregress(Ns, -logs)
    return SlopeFit(float(fit.slope), float(fit.stderr), tuple(int(n) for n in Ns), float(fit.intercept))


@dataclass
class ExponentCurve:
    points: list[tuple[float, float]]
    params: dict
    rho_at_point: list[float]
    extra: dict[str, list[float]] = field(default_factory=dict)


def exponent_curve(ch: Dmc, rates: Sequence[float]) -> ExponentCurve:
    """``E_r`` over a grid of rates, with ``E_sp`` carried alongside."""
    P = ch.matrix
    R_cr = critical_rate(P)
    C = gallager_E0_derivative(P, 0.0)
    points, rhos, esp = [], [], []
    for R in rates:
        e, rho, _ = random_coding_exponent(P, R)
        points.append((float(R), e))
        rhos.append(rho)
        esp.append(sphere_packing_exponent(P, R) if R > 0 else math.inf)
    return ExponentCurve(points, {"channel": ch.to_json(), "R_cr": R_cr, "capacity": C},
                         rhos, {"E_sp": esp})


def poltyrev_curve(sigma2: float, deltas: Sequence[float], variant: str = "continuous") -> ExponentCurve:
    pts = [(float(d), poltyrev_exponent(d, sigma2, variant)) for d in deltas]
    return ExponentCurve(pts, {"sigma2": sigma2, "delta_star": delta_star(sigma2),
                               "delta_cr": delta_cr(sigma2), "variant": variant},
                         [math.nan] * len(pts))


def log_scale(base) -> float:
    """Divide a nat quantity by this to express it in ``base`` (``"e"``, ``2`` or ``q``)."""
    if base in ("e", None):
        return 1.0
    return math.log(float(base))


def write_curve_csv(curve: ExponentCurve, path, log_base="e", header: dict | None = None) -> None:
    """Comment lines ``# key=value`` for ``header`` and the curve parameters, then the table."""
    scale = log_scale(log_base)
    with open(path, "w", newline="") as fh:
        for k, v in {**(header or {}), **curve.params}.items():
            fh.write(f"# {k}={v}\n")
        fh.write(f"# log_base={log_base}\n")
        w = csv.writer(fh)
        extra = list(curve.extra)
        w.writerow(["rate_or_nld", "exponent", "rho_star"] + extra)
        for i, (x, e) in enumerate(curve.points):
            row = [x / scale, e / scale, curve.rho_at_point[i]]
            row += [curve.extra[k][i] / scale for k in extra]
            w.writerow([repr(float(v)) for v in row])


def read_curve_csv(path) -> tuple[dict, list[dict]]:
    params, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                params[k] = v
            else:
                lines.append(line)
    rows = [{k: float(v) for k, v in r.items()} for r in csv.DictReader(lines)]
    return params, rows
