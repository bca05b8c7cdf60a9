"""Bounds on the probability of a union of pairwise error events.

Everything here is plain arithmetic, written so that ``Fraction`` inputs stay
exact whenever the exponent ``rho`` is an integer.  Lower bounds are returned
unclamped; a negative value simply means the bound is vacuous.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

EXACT = "exact"
UPPER_BOUND = "upper_bound"


@dataclass(frozen=True)
class SandwichResult:
    lower: float | Fraction
    upper: float | Fraction
    rho: float

    @property
    def clamped_lower(self):
        return max(self.lower, 0)

    def contains(self, value) -> bool:
        return self.clamped_lower <= value <= self.upper


def _power(x, rho):
    r = float(rho)
    if r.is_integer():
        return x ** int(r)
    return float(x) ** r


def union_upper(M: int, alpha):
    if M < 2:
        raise ValueError("need at least two codewords")
    return (M - 1) * alpha


def _check_table(table, n: int) -> None:
    if len(table) != n or any(len(row) != n for row in table):
        raise ValueError("intersection table must be square and match the singles")
    for i in range(n):
        for j in range(i + 1, n):
            if table[i][j] != table[j][i]:
                raise ValueError(f"asymmetric intersection table at ({i}, {j})")


def bonferroni_lower(singles: Sequence, pair_intersections: Sequence[Sequence]):
    """``sum P(A_i) - 0.5 * sum_{i != j} P(A_i & A_j)``; the diagonal is ignored."""
    n = len(singles)
    _check_table(pair_intersections, n)
    pairs = sum(pair_intersections[i][j] for i in range(n) for j in range(n) if i != j)
    # Fraction(0, 2) rather than 0 / 2 keeps a single-event input exact
    half = Fraction(pairs, 2) if isinstance(pairs, (int, Fraction)) else pairs / 2
    return sum(singles) - half


def decaen_lower(singles: Sequence, pair_intersections: Sequence[Sequence]):
    """de Caen: ``sum_i P(A_i)**2 / sum_j P(A_i & A_j)``.

    The table includes the diagonal (``P(A_i & A_i) = P(A_i)``).  Events of
    probability zero contribute nothing and are skipped.
    """
    n = len(singles)
    _check_table(pair_intersections, n)
    total = 0
    for i in range(n):
        if singles[i] == 0:
            continue
        denom = sum(pair_intersections[i][j] for j in range(n))
        if denom == 0:
            raise ZeroDivisionError(f"event {i} has zero intersection mass")
        total += singles[i] ** 2 / denom
    return total


def intersection_linear(alpha, in_span_star: bool) -> tuple[str, float | Fraction]:
    """Pairwise intersection of two error events in the linear ensemble.

    Exactly ``alpha**2`` when the transmitted message is outside span* of the two
    competitors, otherwise only bounded above by ``alpha``.
    """
    if in_span_star:
        return UPPER_BOUND, alpha
    return EXACT, alpha * alpha


def random_sandwich(M: int, alpha, rho: float) -> SandwichResult:
    """``(M-1)a - [(M-1)a]**rho <= P(union) <= (M-1)a`` for i.i.d. codewords."""
    if not 1 <= rho <= 2:
        raise ValueError(f"rho must lie in [1, 2], got {rho}")
    t = union_upper(M, alpha)
    return SandwichResult(t - _power(t, rho), t, rho)


def linear_sandwich(M: int, q: int, alpha, rho: float) -> SandwichResult:
    """``(M-1)a/q - [(M-1)a]**rho <= P(union) <= (M-1)a`` for the linear ensemble."""
    if M <= 2:
        raise ValueError("the linear-ensemble lower bound needs q**K > 2")
    if rho < 1:
        raise ValueError(f"rho must be at least 1, got {rho}")
    t = union_upper(M, alpha)
    first = Fraction(t, q) if isinstance(t, (int, Fraction)) else t / q
    return SandwichResult(first - _power(t, rho), t, rho)


def decaen_linear_form(M: int, q: int, alpha):
    """Intermediate de Caen bound ``(M-1)a / ((M-1)a + q - 1)``."""
    t = (M - 1) * alpha
    return t / (t + (q - 1))


def decaen_linear_form_sharp(M: int, q: int, alpha):
    """The sharper ``(M-1)a / ((M-q)a + q - 1)`` before the final relaxation."""
    t = (M - 1) * alpha
    return t / ((M - q) * alpha + (q - 1))
