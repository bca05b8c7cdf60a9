"""Exhaustive ground truth over the whole linear ensemble at tiny parameters.

Every quantity is an exact rational: codebooks are enumerated, likelihoods are
compared through :func:`expforge.channel.likelihood_table`, and averages are
formed with integer counts.  Floats appear only in :attr:`ExactResult.float_view`
and in the P1/P2 sums, whose ``rho`` is real.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from expforge._budget import check_budget, resolve_budget
from expforge.bounds import linear_sandwich, random_sandwich
from expforge.channel import Dmc, alpha, likelihood_table, qsc_parameters
from expforge.ensemble import (
    CodeEnsembleSpec,
    all_words,
    codebook_arrays,
    codeword_arrays,
    conditional_law,
    message_vector,
    word_index,
)
from expforge.fqlinalg import FqVector, in_span_star

ORACLE_BUDGET = 2**28
_CHUNK_ELEMS = 2**22


@dataclass(frozen=True)
class ExactResult:
    value: Fraction

    def __post_init__(self):
        if not 0 <= self.value <= 1:
            raise ValueError(f"not a probability: {self.value}")

    @property
    def float_view(self) -> float:
        return float(self.value)

    def to_json(self, params: dict | None = None) -> str:
        return json.dumps({
            "params": params or {},
            "exact": {"num": str(self.value.numerator), "den": str(self.value.denominator)},
            "float": self.float_view,
        })


@lru_cache(maxsize=16)
def _ensemble_words(spec: CodeEnsembleSpec) -> np.ndarray:
    """Word labels of every codeword of every codebook, shape ``(n_books, M)``."""
    out = np.empty((spec.n_codebooks, spec.M), dtype=np.int64)
    step = max(1, _CHUNK_ELEMS // (spec.M * spec.N))
    for start in range(0, spec.n_codebooks, step):
        stop = min(start + step, spec.n_codebooks)
        G, v = codebook_arrays(spec, start, stop)
        out[start:stop] = word_index(codeword_arrays(spec, G, v), spec.q)
    out.setflags(write=False)
    return out


def ensemble_words(spec: CodeEnsembleSpec, budget: int | None = None) -> np.ndarray:
    check_budget("ensemble enumeration", spec.n_codebooks * spec.M,
                 resolve_budget(ORACLE_BUDGET, budget))
    return _ensemble_words(spec)


@lru_cache(maxsize=16)
def _table(ch: Dmc, N: int):
    return likelihood_table(ch, N)


def _label(x, q: int) -> int:
    elems = x.elems if isinstance(x, FqVector) else tuple(x)
    return int(word_index(np.array(elems), q))


def _check_channel(spec: CodeEnsembleSpec, ch: Dmc) -> None:
    if ch.q != spec.q:
        raise ValueError(f"channel input alphabet {ch.q} does not match q={spec.q}")


def exact_average_error(spec: CodeEnsembleSpec, ch: Dmc, m: int = 0,
                        budget: int | None = None) -> ExactResult:
    """Ensemble-average ML error probability of message ``m``, ties as errors."""
    _check_channel(spec, ch)
    if not 0 <= m < spec.M:
        raise IndexError(m)
    n_y = ch.y_size**spec.N
    check_budget("exact average error", spec.n_codebooks * n_y,
                 resolve_budget(ORACLE_BUDGET, budget))
    words = ensemble_words(spec)
    table = _table(ch, spec.N)
    n_words = spec.q**spec.N
    counts = np.zeros(n_words * n_y, dtype=np.int64)
    y_idx = np.arange(n_y)
    step = max(1, _CHUNK_ELEMS // (spec.M * n_y))
    for start in range(0, words.shape[0], step):
        W = words[start:start + step]
        R = table.rank[W]  # (books, M, y)
        own = R[:, m, :]
        if spec.M > 1:
            rival = np.delete(R, m, axis=1).max(axis=1)
            err = rival >= own
        else:
            err = np.zeros_like(own, dtype=bool)
        key = W[:, m, None] * n_y + y_idx[None, :]
        counts += np.bincount(key[err], minlength=n_words * n_y)
    # Collapse equal likelihood values before touching fractions.
    per_value = np.zeros(len(table.values), dtype=object)
    np.add.at(per_value, table.value_index.ravel(), counts.astype(object))
    total = sum((int(c) * v for c, v in zip(per_value, table.values) if c), Fraction(0))
    return ExactResult(total / words.shape[0])


def competitor_events(spec: CodeEnsembleSpec, ch: Dmc, m: int, x_m, y) -> np.ndarray:
    """Error-event indicators over the codebooks with ``encode(m) == x_m``.

    Row ``b`` holds ``sigma(x_{m'}, x_m, y)`` for every ``m'`` (column ``m`` is
    trivially one) in the ``b``-th consistent codebook.
    """
    _check_channel(spec, ch)
    words = ensemble_words(spec)
    table = _table(ch, spec.N)
    yl = _label(y, ch.y_size)
    xl = _label(x_m, spec.q)
    books = words[words[:, m] == xl]
    if books.shape[0] == 0:
        raise ValueError("no codebook realises the conditioning")
    ranks = table.rank[:, yl]
    return ranks[books] >= ranks[xl]


def exact_union_probability(spec: CodeEnsembleSpec, ch: Dmc, m: int, x_m, y) -> ExactResult:
    ev = competitor_events(spec, ch, m, x_m, y)
    rivals = np.delete(ev, m, axis=1)
    return ExactResult(Fraction(int(rivals.any(axis=1).sum()), ev.shape[0]))


def exact_event_probability(spec: CodeEnsembleSpec, ch: Dmc, m: int, m1: int, x_m, y) -> ExactResult:
    ev = competitor_events(spec, ch, m, x_m, y)
    return ExactResult(Fraction(int(ev[:, m1].sum()), ev.shape[0]))


def exact_intersection_probability(spec: CodeEnsembleSpec, ch: Dmc, m: int, m1: int, m2: int,
                                   x_m, y) -> ExactResult:
    ev = competitor_events(spec, ch, m, x_m, y)
    return ExactResult(Fraction(int((ev[:, m1] & ev[:, m2]).sum()), ev.shape[0]))


def conditional_frequency_tables(spec: CodeEnsembleSpec, target: int,
                                 cond_indices: Sequence[int]) -> dict:
    """Exact law of ``x_target`` for every realisable value of the conditioning codewords.

    Maps a tuple of conditioning words (as :class:`FqVector`) to a dict
    ``{word: probability}`` over the codebooks consistent with it.
    """
    words = ensemble_words(spec)
    n_words = spec.q**spec.N
    cols = list(cond_indices)
    key = np.zeros(words.shape[0], dtype=np.int64)
    for c in cols:
        key = key * n_words + words[:, c]
    joint = key * n_words + words[:, target]
    uniq, freq = np.unique(joint, return_counts=True)
    groups: dict[int, dict[int, int]] = {}
    for j, f in zip(uniq.tolist(), freq.tolist()):
        k, w = divmod(j, n_words)
        groups.setdefault(k, {})[w] = f

    def vec(label: int) -> FqVector:
        return FqVector(spec.q, tuple((label // spec.q**i) % spec.q for i in range(spec.N)))

    out = {}
    for k, cells in groups.items():
        labels = []
        for _ in cols:
            k, lab = divmod(k, n_words)
            labels.append(lab)
        cond = tuple(vec(lab) for lab in reversed(labels))
        total = sum(cells.values())
        out[cond] = {vec(w): Fraction(f, total) for w, f in cells.items()}
    return out


def empirical_conditional_law(spec: CodeEnsembleSpec, target: int,
                              conditioning: Sequence[tuple[int, FqVector]]) -> dict[FqVector, Fraction]:
    """Exact frequency of each value of ``x_target`` among consistent codebooks."""
    indices = [m for m, _ in conditioning]
    if len(set(indices + [target])) != len(indices) + 1:
        raise ValueError("message indices must be distinct")
    words = ensemble_words(spec)
    mask = np.ones(words.shape[0], dtype=bool)
    for m, x in conditioning:
        mask &= words[:, m] == _label(x, spec.q)
    if not mask.any():
        raise ValueError("conditioning is not realisable in the ensemble")
    labels, freq = np.unique(words[mask, target], return_counts=True)
    total = int(mask.sum())
    return {
        FqVector(spec.q, tuple((int(w) // spec.q**i) % spec.q for i in range(spec.N))): Fraction(int(f), total)
        for w, f in zip(labels, freq)
    }


def exact_random_union_probability(q: int, N: int, M: int, ch: Dmc, x, y,
                                   budget: int | None = None) -> ExactResult:
    """Union probability when the ``M-1`` competitors are i.i.d. uniform words.

    Brute force over all competitor tuples; the independent reference for the
    random-ensemble sandwich.
    """
    n_words = q**N
    check_budget("random-ensemble enumeration", n_words ** (M - 1),
                 resolve_budget(2**20, budget))
    table = _table(ch, N)
    ranks = table.rank[:, _label(y, ch.y_size)]
    inside = ranks >= ranks[_label(x, q)]
    hits = sum(1 for tup in itertools.product(range(n_words), repeat=M - 1) if inside[list(tup)].any())
    return ExactResult(Fraction(hits, n_words ** (M - 1)))


def qsc_log_p1_p2(q: int, eps: float, N: int, log_m1: float, rho: float) -> tuple[float, float]:
    """``log P1`` and ``log P2`` on a q-ary symmetric channel, via the Hamming distance.

    ``log_m1`` is ``log(M - 1)``; passing it directly allows non-integer ``K``.
    """
    keep, flip = 1.0 - eps, eps / (q - 1)
    d = np.arange(N + 1)
    log_binom = gammaln(N + 1) - gammaln(d + 1) - gammaln(N - d + 1)
    with np.errstate(divide="ignore"):
        log_pd = log_binom + (N - d) * np.log(keep) + d * np.log(flip * (q - 1))
    log_pd = np.nan_to_num(log_pd, nan=-np.inf)
    shells = [math.comb(N, j) * (q - 1) ** j for j in range(N + 1)]
    if keep > flip:
        sizes = list(itertools.accumulate(shells))
    elif keep < flip:
        sizes = list(itertools.accumulate(shells[::-1]))[::-1]
    else:
        sizes = [q**N] * (N + 1)
    log_alpha = np.array([math.log(s) for s in sizes]) - N * math.log(q)
    log_p1 = log_m1 + logsumexp(log_pd + log_alpha)
    log_p2 = rho * log_m1 + logsumexp(log_pd + rho * log_alpha)
    return float(log_p1), float(log_p2)


def exact_P1_P2(spec: CodeEnsembleSpec, ch: Dmc, rho: float) -> tuple[float, float]:
    """The two sums that sandwich the ensemble error: ``P1/q - P2 <= Pe <= P1``.

    ``P1 = (M-1) E[alpha]`` and ``P2 = (M-1)**rho E[alpha**rho]`` with the
    expectation over a uniform transmitted word and the channel output.
    """
    _check_channel(spec, ch)
    if rho < 1:
        raise ValueError("rho must be at least 1")
    params = qsc_parameters(ch)
    if params is not None:
        lp1, lp2 = qsc_log_p1_p2(spec.q, float(params[1]), spec.N, math.log(spec.M - 1), rho)
        return math.exp(lp1), math.exp(lp2)
    table = _table(ch, spec.N)
    n_words = spec.q**spec.N
    ranks = table.rank
    sorted_ranks = np.sort(ranks, axis=0)
    # |A(x, y)| = number of words whose rank is at least that of x
    sizes = n_words - np.stack([np.searchsorted(sorted_ranks[:, j], ranks[:, j], side="left")
                                for j in range(ranks.shape[1])], axis=1)
    alpha = sizes / n_words
    probs = np.array([float(v) for v in table.values])[table.value_index]
    p1 = (spec.M - 1) * float(np.sum(probs * alpha)) / n_words
    p2 = (spec.M - 1) ** rho * float(np.sum(probs * alpha**rho)) / n_words
    return p1, p2


def _all_vectors(q: int, N: int) -> list[FqVector]:
    return [FqVector(q, tuple(int(v) for v in w)) for w in all_words(q, N)]


def verify_conditional_laws(spec: CodeEnsembleSpec, ks: Sequence[int] = (1, 2, 3)) -> dict:
    """Compare :func:`conditional_law` with exhaustive frequencies, case by case.

    A case is a target message and a set of conditioning messages; every
    realisable assignment of the conditioning codewords is checked for exact
    equality over all of F_q^N.
    """
    words = _all_vectors(spec.q, spec.N)
    cases = []
    for target in range(spec.M):
        others = [m for m in range(spec.M) if m != target]
        for k in ks:
            for cond in itertools.combinations(others, k):
                tables = conditional_frequency_tables(spec, target, cond)
                bad = 0
                for xs, freq in tables.items():
                    law = conditional_law(spec, target, list(zip(cond, xs)))
                    bad += any(law.probability(w) != freq.get(w, 0) for w in words)
                cases.append({"target": target, "conditioning": list(cond),
                              "assignments": len(tables), "mismatches": bad})
    return {"cases": cases, "n_cases": len(cases),
            "n_assignments": sum(c["assignments"] for c in cases),
            "n_mismatches": sum(c["mismatches"] for c in cases)}


def verify_ensemble_bounds(spec: CodeEnsembleSpec, ch: Dmc,
                           rhos: Sequence[float] = (1.0, 1.5, 2.0)) -> dict:
    """Exhaustive check of the pairwise-intersection law and the linear sandwich.

    For every ``(m, x_m, y)``: each pair of competitors whose messages leave
    ``u_m`` outside their span* must intersect with probability exactly
    ``alpha**2`` (otherwise at most ``alpha``), and the union probability must
    sit inside ``(M-1)a/q - [(M-1)a]**rho <= P <= (M-1)a``.  Lower bounds with
    a fractional ``rho`` are floats and compared with a ``1e-12`` allowance.
    """
    _check_channel(spec, ch)
    M, q = spec.M, spec.q
    us = [message_vector(m, spec) for m in range(M)]
    out = {"intersections_exact": 0, "intersections_bounded": 0,
           "intersection_violations": 0, "sandwich_checks": 0, "sandwich_violations": 0,
           "violations": []}
    ys = all_words(ch.y_size, spec.N).tolist()
    for m in range(M):
        pairs = [(a, b) for a, b in itertools.combinations([i for i in range(M) if i != m], 2)]
        pinned = {(a, b): in_span_star(us[m], [us[a], us[b]]) for a, b in pairs}
        for x in _all_vectors(q, spec.N):
            for y in ys:
                ev = competitor_events(spec, ch, m, x, y).astype(np.int64)
                B = ev.shape[0]
                a = alpha(ch, x, y)
                inter = ev.T @ ev
                for i, j in pairs:
                    p = Fraction(int(inter[i, j]), B)
                    if pinned[(i, j)]:
                        out["intersections_bounded"] += 1
                        ok = p <= a
                    else:
                        out["intersections_exact"] += 1
                        ok = p == a * a
                    if not ok:
                        out["intersection_violations"] += 1
                        out["violations"].append({"kind": "intersection", "m": m, "pair": [i, j],
                                                  "x": list(x.elems), "y": y, "value": str(p)})
                if M <= 2:
                    continue
                union = Fraction(int(np.delete(ev, m, axis=1).any(axis=1).sum()), B)
                for rho in rhos:
                    sw = linear_sandwich(M, q, a, rho)
                    slack = 0 if float(rho).is_integer() else 1e-12
                    out["sandwich_checks"] += 1
                    if not (sw.clamped_lower <= union + slack and union <= sw.upper):
                        out["sandwich_violations"] += 1
                        out["violations"].append({"kind": "sandwich", "m": m, "rho": rho,
                                                  "x": list(x.elems), "y": y, "value": str(union)})
    return out


def verify_random_sandwich(q: int, N: int, M: int, ch: Dmc,
                           rhos: Sequence[float] = (1.0, 1.5, 2.0)) -> dict:
    """The i.i.d.-codeword sandwich against brute force over competitor tuples."""
    checks = bad = 0
    for x in _all_vectors(q, N):
        for y in all_words(ch.y_size, N).tolist():
            exact = exact_random_union_probability(q, N, M, ch, x, y).value
            a = alpha(ch, x, y)
            for rho in rhos:
                sw = random_sandwich(M, a, rho)
                slack = 0 if float(rho).is_integer() else 1e-12
                checks += 1
                bad += not (sw.clamped_lower <= exact + slack and exact <= sw.upper)
    return {"checks": checks, "violations": bad}
