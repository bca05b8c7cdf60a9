"""The random linear code ensemble ``{uG + v}`` with uniform ``G`` and ``v``.

Messages are identified with their little-endian base-q digit vectors, so
message ``m`` has ``u_m[j] = (m // q**j) % q``.  Words of F_q^N are indexed the
same way where an integer label is convenient (see :func:`word_index`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from expforge._budget import check_budget, resolve_budget
from expforge.fqlinalg import (
    FqMatrix,
    FqVector,
    affine_combination_coeffs,
    check_modulus,
)

ENUMERATION_BUDGET = 2**24


@dataclass(frozen=True)
class CodeEnsembleSpec:
    N: int
    K: int
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        if self.N < 1 or self.K < 1:
            raise ValueError("N and K must be positive")
        if self.K > self.N:
            raise ValueError(f"K={self.K} exceeds N={self.N}")

    @property
    def M(self) -> int:
        return self.q**self.K

    @property
    def rate(self) -> float:
        """Rate in q-ary digits per symbol, ``K/N``."""
        return self.K / self.N

    @property
    def n_codebooks(self) -> int:
        return self.q ** (self.K * self.N + self.N)


@dataclass(frozen=True)
class Codebook:
    spec: CodeEnsembleSpec
    G: FqMatrix
    v: FqVector

    def __post_init__(self):
        s = self.spec
        if (self.G.rows, self.G.cols) != (s.K, s.N) or self.G.q != s.q:
            raise ValueError("generator matrix does not match the ensemble shape")
        if len(self.v) != s.N or self.v.q != s.q:
            raise ValueError("offset does not match the ensemble shape")

    def codewords(self) -> np.ndarray:
        """All ``M`` codewords as an ``(M, N)`` array, row ``m`` is ``encode(m)``."""
        s = self.spec
        return (message_matrix(s.q, s.K) @ self.G.array + self.v.array) % s.q

    def to_json(self) -> str:
        s = self.spec
        return json.dumps({
            "q": s.q, "N": s.N, "K": s.K,
            "G": [e for row in self.G.elems for e in row],
            "v": list(self.v.elems),
        })

    @classmethod
    def from_json(cls, text: str) -> "Codebook":
        d = json.loads(text)
        spec = CodeEnsembleSpec(d["N"], d["K"], d["q"])
        G = np.asarray(d["G"], dtype=np.int64).reshape(spec.K, spec.N)
        return cls(spec, FqMatrix.from_array(G, spec.q), FqVector(spec.q, tuple(d["v"])))


@dataclass(frozen=True)
class ConditionalLaw:
    """Law of one codeword given others: uniform on F_q^N or a point mass."""

    kind: str
    q: int
    N: int
    mass_point: FqVector | None = None

    UNIFORM = "uniform"
    POINT_MASS = "point_mass"

    def probability(self, x: FqVector) -> Fraction:
        if self.kind == self.UNIFORM:
            return Fraction(1, self.q**self.N)
        return Fraction(int(x == self.mass_point))


def digits(m: int, q: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        m, d = divmod(m, q)
        out.append(d)
    return tuple(out)


def message_vector(m: int, spec: CodeEnsembleSpec) -> FqVector:
    if not 0 <= m < spec.M:
        raise IndexError(f"message index {m} outside [0, {spec.M})")
    return FqVector(spec.q, digits(m, spec.q, spec.K))


def message_matrix(q: int, K: int) -> np.ndarray:
    """``(q**K, K)`` array whose row ``m`` is ``u_m``."""
    m = np.arange(q**K, dtype=np.int64)
    return (m[:, None] // q ** np.arange(K, dtype=np.int64)) % q


def word_index(words: np.ndarray, q: int) -> np.ndarray:
    """Integer label of each word along the last axis (little-endian base q)."""
    words = np.asarray(words, dtype=np.int64)
    return words @ (q ** np.arange(words.shape[-1], dtype=np.int64))


def all_words(q: int, N: int) -> np.ndarray:
    return message_matrix(q, N)


def encode(book: Codebook, m: int) -> FqVector:
    u = message_vector(m, book.spec)
    return FqVector.reduce(u.array @ book.G.array + book.v.array, book.spec.q)


def codebook_arrays(spec: CodeEnsembleSpec, start: int = 0, stop: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Generator matrices and offsets of codebooks ``start..stop-1``.

    Codebook ``b`` takes its ``K*N + N`` base-q digits from ``b``: the first
    ``K*N`` fill ``G`` row-major, the remaining ``N`` fill ``v``.
    """
    if stop is None:
        stop = spec.n_codebooks
    b = np.arange(start, stop, dtype=np.int64)
    n_digits = spec.K * spec.N + spec.N
    dig = (b[:, None] // spec.q ** np.arange(n_digits, dtype=np.int64)) % spec.q
    G = dig[:, : spec.K * spec.N].reshape(-1, spec.K, spec.N)
    v = dig[:, spec.K * spec.N:]
    return G, v


def codeword_arrays(spec: CodeEnsembleSpec, G: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Codewords of a batch of codebooks, shape ``(n_books, M, N)``."""
    U = message_matrix(spec.q, spec.K)
    return (np.einsum("mk,bkn->bmn", U, G) + v[:, None, :]) % spec.q


def enumerate_codebooks(spec: CodeEnsembleSpec, budget: int | None = None) -> Iterator[Codebook]:
    """Every ``(G, v)`` pair exactly once; equal weights give the uniform ensemble."""
    check_budget("codebook enumeration", spec.n_codebooks,
                 resolve_budget(ENUMERATION_BUDGET, budget),
                 "use sample_codebook for Monte Carlo instead")
    chunk = 4096
    for start in range(0, spec.n_codebooks, chunk):
        G, v = codebook_arrays(spec, start, min(start + chunk, spec.n_codebooks))
        for g, off in zip(G, v):
            yield Codebook(spec, FqMatrix.from_array(g, spec.q), FqVector(spec.q, tuple(off.tolist())))


def sample_codebook(spec: CodeEnsembleSpec, rng: np.random.Generator) -> Codebook:
    G = rng.integers(0, spec.q, size=(spec.K, spec.N))
    v = rng.integers(0, spec.q, size=spec.N)
    return Codebook(spec, FqMatrix.from_array(G, spec.q), FqVector(spec.q, tuple(v.tolist())))


def _combine(coeffs: Sequence[int], words: Sequence[FqVector], q: int) -> FqVector:
    acc = np.zeros(len(words[0]), dtype=np.int64)
    for c, w in zip(coeffs, words):
        acc += c * w.array
    return FqVector.reduce(acc, q)


@lru_cache(maxsize=4096)
def _affine_structure(spec: CodeEnsembleSpec, target: int, indices: tuple[int, ...]):
    """Affine dependencies among the message vectors; depends on indices only."""
    us = [message_vector(m, spec) for m in indices]
    pinned = []
    for i in range(len(us)):
        rest = us[:i] + us[i + 1:]
        if rest:
            ci = affine_combination_coeffs(us[i], rest)
            if ci is not None:
                pinned.append((i, ci))
    return tuple(pinned), affine_combination_coeffs(message_vector(target, spec), us)


def conditional_law(spec: CodeEnsembleSpec, target: int,
                    conditioning: Sequence[tuple[int, FqVector]]) -> ConditionalLaw:
    """Ensemble law of ``x_target`` given the codewords of other messages.

    Uniform on F_q^N unless ``u_target`` lies in span* of the conditioning
    messages, in which case the codeword is pinned to the same affine
    combination of the conditioning codewords.
    """
    if not conditioning:
        raise ValueError("need at least one conditioning pair")
    indices = [target] + [m for m, _ in conditioning]
    if len(set(indices)) != len(indices):
        raise ValueError(f"message indices must be distinct: {indices}")
    for m in indices:
        if not 0 <= m < spec.M:
            raise IndexError(f"message index {m} outside [0, {spec.M})")
    xs = [x for _, x in conditioning]
    for x in xs:
        if x.q != spec.q or len(x) != spec.N:
            raise ValueError("conditioning codeword does not live in F_q^N")
    pinned, c = _affine_structure(spec, target, tuple(m for m, _ in conditioning))

    # A conditioning word that is itself pinned by the others must agree with them.
    for i, ci in pinned:
        if _combine(ci, xs[:i] + xs[i + 1:], spec.q) != xs[i]:
            raise ValueError("conditioning codewords are not jointly realisable")

    if c is None:
        return ConditionalLaw(ConditionalLaw.UNIFORM, spec.q, spec.N)
    return ConditionalLaw(ConditionalLaw.POINT_MASS, spec.q, spec.N, _combine(c, xs, spec.q))
