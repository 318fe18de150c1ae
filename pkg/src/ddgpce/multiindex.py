"""Multi-index sets for regular and dimensionally decomposed bases.

Indices are kept in graded lexicographic order: total degree ascending and,
within a degree, lexicographically descending exponents, so the first entry is
always the zero index and ``(1, 0)`` precedes ``(0, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import InvalidTruncationError, SizeOverflowError

DEFAULT_CAP = 10**6
MAX_DEGREE = 255
_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class MultiIndex:
    exponents: tuple[int, ...]

    @property
    def total_degree(self) -> int:
        return sum(self.exponents)

    @property
    def interaction_order(self) -> int:
        return sum(1 for j in self.exponents if j > 0)


def cardinality_full(N: int, m: int) -> int:
    """Number of multi-indices with total degree at most ``m`` in ``N`` variables."""
    _check_dims(N, m)
    return _checked(comb(N + m, m))


def cardinality_reduced(N: int, S: int, m: int) -> int:
    """Closed-form size of the reduced set: ``1 + sum_s C(N, s) C(m, s)``."""
    _check_reduced(N, S, m)
    return _checked(1 + sum(comb(N, s) * comb(m, s) for s in range(1, S + 1)))


def _checked(n: int) -> int:
    if n > _INT64_MAX:
        raise SizeOverflowError(f"cardinality {n} exceeds the 64-bit integer range")
    return n


def _check_dims(N, m):
    if int(N) != N or N < 1:
        raise InvalidTruncationError(f"dimension N must be a positive integer, got {N}")
    if int(m) != m or m < 0:
        raise InvalidTruncationError(f"order m must be a non-negative integer, got {m}")
    if m > MAX_DEGREE:
        raise InvalidTruncationError(f"order m={m} exceeds the supported maximum {MAX_DEGREE}")


def _check_reduced(N, S, m):
    _check_dims(N, m)
    if int(S) != S or S < 0 or S > N:
        raise InvalidTruncationError(f"interaction order S must satisfy 0 <= S <= N={N}, got {S}")
    if m < S:
        raise InvalidTruncationError(f"order m={m} must be at least S={S}")


def _enumerate(N: int, m: int, S: int) -> np.ndarray:
    """All exponent vectors with |j| <= m and at most S nonzeros, graded-lex."""
    rows: list[tuple[int, ...]] = []
    buf = [0] * N

    def fill(pos: int, remaining: int, slots: int):
        if remaining == 0:
            rows.append(tuple(buf))
            return
        if pos == N or slots == 0:
            return
        # Largest exponent first gives descending lexicographic order.
        for j in range(remaining, 0, -1):
            buf[pos] = j
            fill(pos + 1, remaining - j, slots - 1)
        buf[pos] = 0
        fill(pos + 1, remaining, slots)

    for degree in range(m + 1):
        fill(0, degree, S)
    return np.array(rows, dtype=np.uint8).reshape(len(rows), N)


@dataclass(frozen=True, eq=False)
class MultiIndexSet:
    """An ordered set of multi-indices.

    ``kind`` is ``"full"`` for the total-degree set J_m and ``"reduced"`` for
    the S-variate set J_{S,m}.  ``exponents`` is a ``(K, N)`` uint8 array.
    """

    dimension: int
    kind: str
    order: int
    interaction: int
    exponents: np.ndarray

    @property
    def cardinality(self) -> int:
        return int(self.exponents.shape[0])

    def __len__(self):
        return self.cardinality

    def __iter__(self):
        for row in self.exponents:
            yield MultiIndex(tuple(int(j) for j in row))

    def __getitem__(self, k) -> MultiIndex:
        return MultiIndex(tuple(int(j) for j in self.exponents[k]))

    def __eq__(self, other):
        if not isinstance(other, MultiIndexSet):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and np.array_equal(self.exponents, other.exponents)
        )

    def __hash__(self):
        return hash((self.dimension, self.exponents.tobytes()))

    @property
    def max_power(self) -> int:
        return int(self.exponents.max()) if self.exponents.size else 0

    def sparse(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-index (variable, power) pairs padded to the largest interaction order.

        Padding entries use power 0 so they contribute a factor of one.
        """
        K, N = self.exponents.shape
        nnz = (self.exponents > 0).sum(axis=1)
        width = max(1, int(nnz.max()) if K else 1)
        variables = np.zeros((K, width), dtype=np.int64)
        powers = np.zeros((K, width), dtype=np.int64)
        for k in range(K):
            (idx,) = np.nonzero(self.exponents[k])
            variables[k, : idx.size] = idx
            powers[k, : idx.size] = self.exponents[k, idx]
        return variables, powers

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "kind": self.kind,
            "order": self.order,
            "interaction": self.interaction,
        }

    @classmethod
    def from_dict(cls, data: dict, cap: int = DEFAULT_CAP) -> "MultiIndexSet":
        if data["kind"] == "full":
            return generate_full(data["dimension"], data["order"], cap=cap)
        return generate_reduced(data["dimension"], data["interaction"], data["order"], cap=cap)


def generate_full(N: int, m: int, cap: int = DEFAULT_CAP) -> MultiIndexSet:
    """The total-degree set J_m of size C(N+m, m)."""
    size = cardinality_full(N, m)
    if size > cap:
        raise SizeOverflowError(f"full basis with N={N}, m={m} has {size} terms (cap {cap})")
    exps = _enumerate(N, m, min(N, m))
    return MultiIndexSet(N, "full", m, min(N, m), exps)


def generate_reduced(N: int, S: int, m: int, cap: int = DEFAULT_CAP) -> MultiIndexSet:
    """The S-variate, m-th order set J_{S,m}."""
    size = cardinality_reduced(N, S, m)
    if size > cap:
        raise SizeOverflowError(
            f"reduced basis with N={N}, S={S}, m={m} has {size} terms (cap {cap})"
        )
    exps = _enumerate(N, m, S)
    return MultiIndexSet(N, "reduced", m, S, exps)


def univariate(m: int) -> MultiIndexSet:
    """Degree-``m`` index set in a single variable: (0), (1), ..., (m)."""
    return generate_full(1, m)
