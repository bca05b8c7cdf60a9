"""Arithmetic and linear algebra over the prime field F_q.

Vectors and matrices are small immutable value types; the heavy lifting in the
exhaustive oracles works on raw ``numpy`` integer arrays with the modulus passed
alongside, and the helpers here accept either form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sympy import isprime

from expforge._budget import check_budget, resolve_budget

SPAN_BUDGET = 2**20


def check_modulus(q: int) -> int:
    q = int(q)
    if q < 2 or not isprime(q):
        raise ValueError(f"modulus must be a prime, got {q}")
    return q


@dataclass(frozen=True)
class FqVector:
    q: int
    elems: tuple[int, ...]

    def __post_init__(self):
        elems = tuple(int(e) for e in self.elems)
        object.__setattr__(self, "elems", elems)
        if not elems:
            raise ValueError("FqVector needs at least one element")
        if any(e < 0 or e >= self.q for e in elems):
            raise ValueError(f"elements must lie in [0, {self.q}): {elems}")

    @classmethod
    def reduce(cls, values: Iterable[int], q: int) -> "FqVector":
        return cls(q, tuple(int(v) % q for v in values))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.elems, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.elems)

    def __iter__(self):
        return iter(self.elems)

    def _check(self, other: "FqVector") -> None:
        if self.q != other.q:
            raise ValueError(f"modulus mismatch: {self.q} vs {other.q}")
        if len(self) != len(other):
            raise ValueError(f"length mismatch: {len(self)} vs {len(other)}")

    def __add__(self, other: "FqVector") -> "FqVector":
        self._check(other)
        return FqVector.reduce((a + b for a, b in zip(self, other)), self.q)

    def __sub__(self, other: "FqVector") -> "FqVector":
        self._check(other)
        return FqVector.reduce((a - b for a, b in zip(self, other)), self.q)

    def __rmul__(self, c: int) -> "FqVector":
        return FqVector.reduce((c * a for a in self), self.q)

    def __repr__(self) -> str:
        return f"FqVector(q={self.q}, {self.elems})"


@dataclass(frozen=True)
class FqMatrix:
    q: int
    elems: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(e) for e in row) for row in self.elems)
        object.__setattr__(self, "elems", rows)
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise ValueError("ragged matrix")
        if any(e < 0 or e >= self.q for row in rows for e in row):
            raise ValueError(f"elements must lie in [0, {self.q})")

    @classmethod
    def from_array(cls, a, q: int) -> "FqMatrix":
        a = np.asarray(a, dtype=np.int64) % q
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(q, tuple(map(tuple, a.tolist())))

    @classmethod
    def identity(cls, n: int, q: int) -> "FqMatrix":
        return cls.from_array(np.eye(n, dtype=np.int64), q)

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> "FqMatrix":
        return cls.from_array(np.zeros((rows, cols), dtype=np.int64), q)

    @property
    def rows(self) -> int:
        return len(self.elems)

    @property
    def cols(self) -> int:
        return len(self.elems[0]) if self.elems else 0

    @property
    def array(self) -> np.ndarray:
        return np.array(self.elems, dtype=np.int64).reshape(self.rows, self.cols)


def mat_mul(u: FqVector, G: FqMatrix) -> FqVector:
    """Row vector times matrix, ``uG mod q``."""
    if u.q != G.q:
        raise ValueError(f"modulus mismatch: {u.q} vs {G.q}")
    if len(u) != G.rows:
        raise ValueError(f"dimension mismatch: len(u)={len(u)}, G has {G.rows} rows")
    return FqVector.reduce(u.array @ G.array, u.q)


def rref(a, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form mod q and the pivot columns.

    Pivots are chosen as the first nonzero entry of each column scanning left to
    right, so the result is canonical for the row space.
    """
    m = np.array(a, dtype=np.int64, copy=True) % q
    if m.ndim != 2:
        raise ValueError("expected a 2-D array")
    n_rows, n_cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            m[[r, p]] = m[[p, r]]
        m[r] = (m[r] * pow(int(m[r, c]), -1, q)) % q
        for i in range(n_rows):
            if i != r and m[i, c]:
                m[i] = (m[i] - m[i, c] * m[r]) % q
        pivots.append(c)
        r += 1
    return m, pivots


def rank(G) -> int:
    if isinstance(G, FqMatrix):
        if G.rows == 0 or G.cols == 0:
            return 0
        return len(rref(G.array, G.q)[1])
    raise TypeError("rank expects an FqMatrix")


def solve_mod(a, b, q: int) -> np.ndarray | None:
    """One solution x of ``a @ x = b (mod q)``, free variables set to zero.

    Returns ``None`` when the system is inconsistent.
    """
    a = np.asarray(a, dtype=np.int64) % q
    b = np.asarray(b, dtype=np.int64).reshape(-1, 1) % q
    n_unknowns = a.shape[1]
    red, pivots = rref(np.hstack([a, b]), q)
    if n_unknowns in pivots:
        return None
    x = np.zeros(n_unknowns, dtype=np.int64)
    for row, c in enumerate(pivots):
        x[c] = red[row, -1]
    return x


def _as_point_array(points: Sequence[FqVector]) -> tuple[np.ndarray, int]:
    if not points:
        raise ValueError("span* needs at least one point")
    q = points[0].q
    n = len(points[0])
    for p in points:
        if p.q != q:
            raise ValueError("mixed moduli")
        if len(p) != n:
            raise ValueError("mixed dimensions")
    return np.array([p.elems for p in points], dtype=np.int64), q


def difference_basis(points: Sequence[FqVector]) -> tuple[np.ndarray, int]:
    """Row basis (RREF rows) of ``span(p_i - p_0)`` and the modulus."""
    arr, q = _as_point_array(points)
    diffs = (arr[1:] - arr[0]) % q
    if diffs.shape[0] == 0:
        return np.zeros((0, arr.shape[1]), dtype=np.int64), q
    red, pivots = rref(diffs, q)
    return red[: len(pivots)], q


def span_star_members(points: Sequence[FqVector], budget: int | None = None) -> frozenset[FqVector]:
    """All points of ``p_0 + span(p_1 - p_0, ..., p_k - p_0)``.

    The set has ``q**r`` elements with ``r`` the rank of the difference vectors;
    it is only materialised when that fits in ``budget``.
    """
    basis, q = difference_basis(points)
    r = basis.shape[0]
    check_budget("span* materialisation", q**r, resolve_budget(SPAN_BUDGET, budget),
                 "use in_span_star for membership queries")
    origin = np.array(points[0].elems, dtype=np.int64)
    if r == 0:
        return frozenset([points[0]])
    coeffs = np.array(list(itertools.product(range(q), repeat=r)), dtype=np.int64)
    members = (coeffs @ basis + origin) % q
    return frozenset(FqVector(q, tuple(row)) for row in members.tolist())


def in_span_star(target: FqVector, points: Sequence[FqVector]) -> bool:
    basis, q = difference_basis(points)
    if target.q != q or len(target) != len(points[0]):
        raise ValueError("target does not match the points' space")
    d = (target.array - np.array(points[0].elems)) % q
    if not d.any():
        return True
    if basis.shape[0] == 0:
        return False
    return len(rref(np.vstack([basis, d]), q)[1]) == basis.shape[0]


def affine_combination_coeffs(target: FqVector, points: Sequence[FqVector]) -> tuple[int, ...] | None:
    """Coefficients ``c`` with ``sum(c) = 1`` and ``sum(c_i * p_i) = target`` mod q.

    ``None`` means the target is not in span* of the points.  The coefficient sum
    of one is what lets the same combination carry over to the codewords, since
    the common offset ``v`` then appears exactly once.
    """
    arr, q = _as_point_array(points)
    if target.q != q:
        raise ValueError("modulus mismatch")
    if len(target) != arr.shape[1]:
        raise ValueError("dimension mismatch")
    system = np.vstack([arr.T, np.ones((1, arr.shape[0]), dtype=np.int64)])
    rhs = np.concatenate([target.array, [1]])
    sol = solve_mod(system, rhs, q)
    return None if sol is None else tuple(int(c) for c in sol)
