"""Discrete memoryless channels, error events and maximum-likelihood decoding.

Transition probabilities are stored as exact fractions so that the comparison
``P(y|x') >= P(y|x)`` defining an error event is decided without rounding; ties
count as errors.  Float views are used only for the exponent computations.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from expforge._budget import check_budget, resolve_budget
from expforge.ensemble import Codebook, all_words
from expforge.fqlinalg import FqVector

ALPHA_BUDGET = 2**20
TABLE_BUDGET = 2**24


def _exact(p) -> Fraction:
    if isinstance(p, (Fraction, int)):
        return Fraction(p)
    if isinstance(p, str):
        return Fraction(p)
    # Decimal rendering, so 0.1 becomes 1/10 rather than its binary expansion.
    return Fraction(repr(float(p)))


@dataclass(frozen=True)
class Dmc:
    """A channel with input alphabet F_q and outputs ``0..y_size-1``."""

    p: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(_exact(v) for v in row) for row in self.p)
        object.__setattr__(self, "p", rows)
        if len(rows) < 2:
            raise ValueError("need at least two input symbols")
        if len({len(r) for r in rows}) != 1:
            raise ValueError("ragged transition matrix")
        for r in rows:
            if any(v < 0 for v in r):
                raise ValueError("negative transition probability")
            if abs(float(sum(r)) - 1.0) > 1e-12:
                raise ValueError(f"row does not sum to one: {[float(v) for v in r]}")

    @property
    def q(self) -> int:
        return len(self.p)

    @property
    def y_size(self) -> int:
        return len(self.p[0])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.p])

    def to_json(self) -> str:
        return json.dumps({"q": self.q, "y_size": self.y_size,
                           "p": [[str(v) for v in row] for row in self.p]})


def bsc(p) -> Dmc:
    p = _exact(p)
    return Dmc(((1 - p, p), (p, 1 - p)))


def qsc(q: int, eps) -> Dmc:
    """q-ary symmetric channel: correct w.p. ``1 - eps``, each wrong symbol ``eps/(q-1)``."""
    eps = _exact(eps)
    off = eps / (q - 1)
    return Dmc(tuple(tuple(1 - eps if i == j else off for j in range(q)) for i in range(q)))


def from_matrix(rows, warn_asymmetric: bool = True) -> Dmc:
    ch = Dmc(tuple(tuple(r) for r in rows))
    if warn_asymmetric and not is_symmetric(ch):
        warnings.warn("channel is not permutation-symmetric; the uniform input may "
                      "not maximise its exponent", stacklevel=2)
    return ch


def from_json(obj) -> Dmc:
    """Parse ``{q, y_size, p}``, ``{"bsc": p}`` or ``{"qsc": {"q": q, "eps": e}}``."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if "bsc" in obj:
        return bsc(obj["bsc"])
    if "qsc" in obj:
        return qsc(int(obj["qsc"]["q"]), obj["qsc"]["eps"])
    ch = from_matrix(obj["p"])
    if ch.q != obj.get("q", ch.q) or ch.y_size != obj.get("y_size", ch.y_size):
        raise ValueError("declared q / y_size disagree with the matrix")
    return ch


def parse_channel(text: str) -> Dmc:
    """CLI shorthand: ``bsc:0.1``, ``qsc:3:0.2``, or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return from_json(text)
    kind, _, rest = text.partition(":")
    if kind == "bsc":
        return bsc(rest)
    if kind == "qsc":
        q, _, eps = rest.partition(":")
        return qsc(int(q), eps)
    raise ValueError(f"unrecognised channel {text!r}")


def is_symmetric(ch: Dmc) -> bool:
    """Every row a permutation of the first row and every column of the first column."""
    first_row = sorted(ch.p[0])
    if any(sorted(r) != first_row for r in ch.p):
        return False
    cols = list(zip(*ch.p))
    first_col = sorted(cols[0])
    return all(sorted(c) == first_col for c in cols)


def qsc_parameters(ch: Dmc) -> tuple[int, Fraction] | None:
    """``(q, eps)`` if the matrix has the q-ary symmetric structure, else ``None``."""
    if ch.y_size != ch.q:
        return None
    diag = ch.p[0][0]
    off = ch.p[0][1]
    for i, row in enumerate(ch.p):
        for j, v in enumerate(row):
            if v != (diag if i == j else off):
                return None
    return ch.q, 1 - diag


def _word(x) -> tuple[int, ...]:
    if isinstance(x, FqVector):
        return x.elems
    return tuple(int(v) for v in x)


def likelihood(ch: Dmc, x, y: Sequence[int]) -> Fraction:
    x, y = _word(x), _word(y)
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    out = Fraction(1)
    for a, b in zip(x, y):
        if not (0 <= a < ch.q and 0 <= b < ch.y_size):
            raise ValueError("symbol out of range")
        out *= ch.p[a][b]
    return out


def sigma(ch: Dmc, x_prime, x, y) -> int:
    """Indicator that ``x_prime`` is at least as likely as ``x`` given ``y``."""
    return int(likelihood(ch, x_prime, y) >= likelihood(ch, x, y))


def _qsc_alpha_count(q: int, eps: Fraction, N: int, d: int) -> int:
    """``|A(x, y)|`` for the q-SC when ``x`` and ``y`` differ in ``d`` places."""
    keep, flip = 1 - eps, eps / (q - 1)
    shells = [math.comb(N, j) * (q - 1) ** j for j in range(N + 1)]
    if keep > flip:
        return sum(shells[: d + 1])
    if keep < flip:
        return sum(shells[d:])
    return q**N


def alpha(ch: Dmc, x, y, budget: int | None = None, method: str = "auto") -> Fraction:
    """Probability that a uniform competitor lands in ``A(x, y)``: ``q**-N * |A(x, y)|``.

    ``method`` is ``"enumerate"``, ``"symmetric"`` (q-SC only, via the Hamming
    distance of ``x`` and ``y``) or ``"auto"``.
    """
    x, y = _word(x), _word(y)
    N = len(x)
    if len(y) != N:
        raise ValueError("length mismatch")
    params = qsc_parameters(ch)
    if method == "symmetric" or (method == "auto" and params is not None):
        if params is None:
            raise ValueError("symmetric shortcut needs a q-ary symmetric channel")
        d = sum(a != b for a, b in zip(x, y))
        return Fraction(_qsc_alpha_count(params[0], params[1], N, d), ch.q**N)
    check_budget("alpha enumeration", ch.q**N, resolve_budget(ALPHA_BUDGET, budget))
    ref = likelihood(ch, x, y)
    count = sum(likelihood(ch, w, y) >= ref for w in all_words(ch.q, N).tolist())
    return Fraction(count, ch.q**N)


@dataclass(frozen=True)
class ErrorEventStats:
    alpha: Fraction
    m_count: int
    q: int

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be a probability")

    @property
    def union_bound(self) -> Fraction:
        return self.m_count * self.alpha


def error_event_stats(ch: Dmc, x, y, M: int) -> ErrorEventStats:
    return ErrorEventStats(alpha(ch, x, y), M - 1, ch.q)


@dataclass(frozen=True)
class LikelihoodTable:
    """Exact likelihoods of every (input word, output word) pair of length ``N``.

    ``rank[w, y]`` orders the likelihoods (equal rank exactly when equal value);
    ``value_index[w, y]`` points into ``values`` for the exact ``P(y|w)``.
    """

    N: int
    rank: np.ndarray
    value_index: np.ndarray
    values: tuple[Fraction, ...]


def likelihood_table(ch: Dmc, N: int, budget: int | None = None) -> LikelihoodTable:
    q, Y = ch.q, ch.y_size
    check_budget("likelihood table", q**N * Y**N * N, resolve_budget(TABLE_BUDGET, budget))
    xw = all_words(q, N)
    yw = all_words(Y, N)
    # Likelihood depends only on how often each transition (a, b) occurs.
    pair = xw[:, None, :] * Y + yw[None, :, :]
    counts = np.zeros(pair.shape[:2] + (q * Y,), dtype=np.int64)
    for t in range(q * Y):
        counts[..., t] = (pair == t).sum(axis=-1)
    uniq, inverse = np.unique(counts.reshape(-1, q * Y), axis=0, return_inverse=True)
    flat = [ch.p[t // Y][t % Y] for t in range(q * Y)]
    values = []
    for row in uniq.tolist():
        v = Fraction(1)
        for t, n in enumerate(row):
            if n:
                v *= flat[t] ** n
        values.append(v)
    order = sorted(set(values))
    rank_of = {v: i for i, v in enumerate(order)}
    val_rank = np.array([rank_of[v] for v in values], dtype=np.int64)
    inverse = inverse.reshape(q**N, Y**N)
    return LikelihoodTable(N, val_rank[inverse], inverse, tuple(values))


@dataclass(frozen=True)
class Tie:
    indices: tuple[int, ...]


def ml_decode(book: Codebook, ch: Dmc, y: Sequence[int]) -> int | Tie:
    """Most likely message index, or :class:`Tie` if several share the maximum."""
    words = book.codewords()
    lik = [likelihood(ch, w, y) for w in words.tolist()]
    best = max(lik)
    winners = tuple(i for i, v in enumerate(lik) if v == best)
    return winners[0] if len(winners) == 1 else Tie(winners)


def decoding_error(book: Codebook, ch: Dmc, m: int, y: Sequence[int]) -> bool:
    """ML decoding of ``y`` fails for message ``m`` (ties count as failures)."""
    decoded = ml_decode(book, ch, y)
    return not (isinstance(decoded, int) and decoded == m)


def capacity_uniform(ch: Dmc) -> float:
    """Mutual information in nats between a uniform input and the output."""
    P = ch.matrix
    py = P.mean(axis=0)
    return float(np.sum(xlogy(P, P)) / ch.q - np.sum(xlogy(py, py)))


__all__ = [
    "Dmc", "ErrorEventStats", "LikelihoodTable", "Tie", "alpha", "bsc", "capacity_uniform",
    "decoding_error", "error_event_stats", "from_json", "from_matrix", "is_symmetric",
    "likelihood", "likelihood_table", "ml_decode", "parse_channel", "qsc", "qsc_parameters",
    "sigma",
]
