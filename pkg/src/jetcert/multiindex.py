"""Multi-index bookkeeping for derivatives in the four variables (t, x1, x2, x3).

A multi-index is a 4-tuple of non-negative derivative orders.  Everything here
is exact integer arithmetic; the counting functions size every matrix built by
the prolongation engine, so they are cross-checked against brute-force
enumeration in the test suite.
"""

from __future__ import annotations

from typing import Iterator, NamedTuple


class MultiIndex(NamedTuple):
    """Orders of differentiation (d/dt, d/dx1, d/dx2, d/dx3)."""

    a0: int
    a1: int
    a2: int
    a3: int

    @property
    def degree(self) -> int:
        return self.a0 + self.a1 + self.a2 + self.a3

    def bump(self, axis: int) -> "MultiIndex":
        """Increment the order along one axis (0=t, 1..3=x1..x3)."""
        parts = list(self)
        parts[axis] += 1
        return MultiIndex(*parts)

    def drop(self, axis: int) -> "MultiIndex":
        parts = list(self)
        parts[axis] -= 1
        if parts[axis] < 0:
            raise ValueError(f"cannot decrement axis {axis} of {self}")
        return MultiIndex(*parts)


ZERO = MultiIndex(0, 0, 0, 0)

AXIS_T, AXIS_X1, AXIS_X2, AXIS_X3 = 0, 1, 2, 3


def count_E(n: int) -> int:
    """Number of multi-indices of exact degree n: (n+1)(n+2)(n+3)/6."""
    if n < 0:
        raise ValueError("n must be non-negative")
    num = (n + 1) * (n + 2) * (n + 3)
    assert num % 6 == 0
    return num // 6


def count_F(n: int) -> int:
    """Number of multi-indices of degree <= n: (n+1)(n+2)(n+3)(n+4)/24."""
    if n < 0:
        raise ValueError("n must be non-negative")
    num = (n + 1) * (n + 2) * (n + 3) * (n + 4)
    assert num % 24 == 0
    return num // 24


def count_G(n: int) -> int:
    """Rows of the prolonged system: two blocks of depth n plus one of depth n+2."""
    return 2 * count_F(n) + count_F(n + 2)


def count_H(n: int) -> int:
    """Columns of the prolonged system: derivatives of two unknowns up to order n+3."""
    return 2 * count_F(n + 3)


def subset_encode(alpha: MultiIndex, n: int) -> frozenset[int]:
    """Encode a multi-index of degree <= n as a 4-subset of {1, ..., n+4}.

    The partial sums shifted by 1..4 are strictly increasing, which makes the
    map a bijection onto all 4-element subsets; this is what justifies the
    closed form of ``count_F``.
    """
    a0, a1, a2, a3 = alpha
    if a0 + a1 + a2 + a3 > n:
        raise ValueError(f"degree {a0 + a1 + a2 + a3} exceeds n={n}")
    return frozenset(
        (a0 + 1, a0 + a1 + 2, a0 + a1 + a2 + 3, a0 + a1 + a2 + a3 + 4)
    )


def _binom(n: int, k: int) -> int:
    if k < 0 or n < 0 or k > n:
        return 0
    out = 1
    for i in range(k):
        out = out * (n - i) // (i + 1)
    return out


def index_of(alpha: MultiIndex) -> int:
    """Graded position of a multi-index.

    All indices of degree m come before those of degree m+1.  Within a
    degree, derivatives are enumerated x1-major with time last (d1, d2, d3,
    dt at degree one; d11, d12, d13, d1t, d22, ... at degree two), i.e.
    descending lexicographic on (a1, a2, a3, a0).  Degree-(<=n) indices
    occupy exactly positions 0 .. count_F(n)-1.
    """
    a0, a1, a2, a3 = alpha
    m = a0 + a1 + a2 + a3
    base = count_F(m - 1) if m > 0 else 0
    rank = 0
    for v in range(a1 + 1, m + 1):  # tuples with a larger x1 order come first
        rank += _binom(m - v + 2, 2)
    for v in range(a2 + 1, m - a1 + 1):  # then a larger x2 order
        rank += m - a1 - v + 1
    rank += a0  # then a larger x3 order, one tuple per choice
    return base + rank


def multiindex_of(k: int) -> MultiIndex:
    """Inverse of ``index_of``."""
    if k < 0:
        raise ValueError("index must be non-negative")
    m = 0
    while count_F(m) <= k:
        m += 1
    rank = k - (count_F(m - 1) if m > 0 else 0)
    a1 = m
    while True:
        block = _binom(m - a1 + 2, 2)
        if rank < block:
            break
        rank -= block
        a1 -= 1
    a2 = m - a1
    while True:
        block = m - a1 - a2 + 1
        if rank < block:
            break
        rank -= block
        a2 -= 1
    a0 = rank
    a3 = m - a1 - a2 - a0
    return MultiIndex(a0, a1, a2, a3)


def iter_degree(m: int) -> Iterator[MultiIndex]:
    """All multi-indices of exact degree m, in within-degree order."""
    for a1 in range(m, -1, -1):
        for a2 in range(m - a1, -1, -1):
            for a3 in range(m - a1 - a2, -1, -1):
                yield MultiIndex(m - a1 - a2 - a3, a1, a2, a3)


def iter_up_to(n: int) -> Iterator[MultiIndex]:
    """All multi-indices of degree <= n, in graded order."""
    for m in range(n + 1):
        yield from iter_degree(m)
