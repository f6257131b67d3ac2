"""Integer Hadamard algebra for aperture-encoded sequences.

Matrices are built with the Sylvester recursion and kept as signed integer
arrays so that every identity here can be checked exactly. Index helpers use
1-based numbering, matching the element/event notation used when splitting
an ensemble of ``N = S * Q`` events into ``S`` sequential groups of ``Q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

MAX_RANK = 1024


class InvalidRankError(ValueError):
    """Raised for a Hadamard rank that is not a power of two in [1, MAX_RANK]."""


def is_power_of_two(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def _check_rank(n) -> int:
    if not is_power_of_two(n) or n > MAX_RANK:
        raise InvalidRankError(
            f"Hadamard rank must be a power of two between 1 and {MAX_RANK}, got {n!r}")
    return int(n)


@lru_cache(maxsize=None)
def _sylvester_cached(n: int) -> np.ndarray:
    h = np.ones((1, 1), dtype=np.int64)
    h2 = np.array([[1, 1], [1, -1]], dtype=np.int64)
    while h.shape[0] < n:
        h = np.kron(h2, h)
    h.setflags(write=False)
    return h


def sylvester(n: int) -> np.ndarray:
    """Sylvester-ordered Hadamard matrix of rank ``n``.

    Parameters
    ----------
    n : int
        Rank, a power of two between 1 and 1024.

    Returns
    -------
    np.ndarray
        Read-only ``(n, n)`` int64 array with entries in {+1, -1}.
    """
    return _sylvester_cached(_check_rank(n))


def check_hadamard(h: np.ndarray) -> int:
    """Validate a Hadamard matrix and return its rank."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidRankError(f"Hadamard matrix must be square, got shape {h.shape}")
    n = _check_rank(h.shape[0])
    if not np.all(np.abs(h) == 1):
        raise InvalidRankError("Hadamard entries must be +1 or -1")
    hi = h.astype(np.int64)
    if not np.array_equal(hi @ hi.T, n * np.eye(n, dtype=np.int64)):
        raise InvalidRankError("rows of a Hadamard matrix must be mutually orthogonal")
    return n


def inverse_scale(h: np.ndarray) -> tuple[Fraction, np.ndarray]:
    """Exact inverse of ``h`` as a rational scale times an integer matrix.

    Returns ``(Fraction(1, n), h.T)`` so that ``scale * h.T @ h == I``.
    """
    n = check_hadamard(h)
    return Fraction(1, n), np.ascontiguousarray(np.asarray(h).T)


def inverse(h: np.ndarray, dtype=np.float64) -> np.ndarray:
    """Floating-point inverse ``h.T / n``; exact because ``n`` is a power of two."""
    scale, ht = inverse_scale(h)
    return ht.astype(dtype) * dtype(scale.numerator) / dtype(scale.denominator)


def index_split(flat: int, group_size: int) -> tuple[int, int]:
    """Split a 1-based flat index into ``(group, within)`` with
    ``flat = within + group_size * (group - 1)``."""
    if flat < 1 or group_size < 1:
        raise ValueError(f"index_split needs flat >= 1 and group_size >= 1, got {flat}, {group_size}")
    group, within = divmod(flat - 1, group_size)
    return group + 1, within + 1


def index_join(group: int, within: int, group_size: int) -> int:
    return within + group_size * (group - 1)


def kron_entry(n_groups: int, group_size: int, i: int, e: int) -> int:
    """Entry ``(i, e)`` of the rank ``S*Q`` matrix from its two Kronecker factors.

    ``i`` is a transmit element and ``e`` a transmit event, both 1-based.
    The result is ``H_S[s, l] * H_Q[q, v]`` where ``i = v + Q(l-1)`` and
    ``e = q + Q(s-1)``.
    """
    hs = sylvester(n_groups)
    hq = sylvester(group_size)
    n = n_groups * group_size
    if not (1 <= i <= n and 1 <= e <= n):
        raise ValueError(f"indices must lie in 1..{n}, got i={i}, e={e}")
    l, v = index_split(i, group_size)
    s, q = index_split(e, group_size)
    return int(hs[s - 1, l - 1] * hq[q - 1, v - 1])


@dataclass(frozen=True)
class GroupingScheme:
    """Sequential split of ``n_total`` events into ``n_groups`` groups of ``group_size``."""

    n_total: int
    n_groups: int
    group_size: int

    def __post_init__(self):
        for name in ("n_total", "n_groups", "group_size"):
            value = getattr(self, name)
            if not is_power_of_two(value):
                raise InvalidRankError(f"{name} must be a power of two >= 1, got {value!r}")
        if self.n_groups * self.group_size != self.n_total:
            raise ValueError(
                f"grouping requires N = S*Q, got N={self.n_total}, "
                f"S={self.n_groups}, Q={self.group_size}")

    @classmethod
    def from_groups(cls, n_total: int, n_groups: int) -> "GroupingScheme":
        if n_groups < 1 or n_total % n_groups:
            raise ValueError(f"{n_groups} groups do not divide {n_total} events")
        return cls(n_total, n_groups, n_total // n_groups)

    def events(self, group: int) -> range:
        """1-based event indices belonging to ``group``."""
        if not 1 <= group <= self.n_groups:
            raise ValueError(f"group must lie in 1..{self.n_groups}, got {group}")
        start = self.group_size * (group - 1) + 1
        return range(start, start + self.group_size)

    def elements(self, group: int) -> range:
        """1-based transmit elements of element group ``group``; same slicing as events."""
        return self.events(group)


def uforces_encoding(n_elements: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Sparse ``Q``-event encoding used as the uFORCES baseline.

    ``Q - 1`` designated elements, spread uniformly over the aperture, each
    take one column of ``H_Q`` (columns 2..Q). Every remaining element fires
    together as one aggregate source on column 1. Decoding with ``H_Q^-1``
    therefore yields the aggregate in row 1 and single-element signals in
    rows 2..Q.

    Returns
    -------
    weights : (Q, n_elements) int array
        Transmit gain of each element on each event.
    elements : (Q - 1,) int array
        0-based indices of the designated elements.
    """
    hq = sylvester(q)
    if q >= n_elements:
        raise ValueError(f"uFORCES needs Q < N, got Q={q}, N={n_elements}")
    elements = np.unique(np.round(np.linspace(0, n_elements - 1, q - 1)).astype(int))
    if elements.size != q - 1:
        raise ValueError(f"cannot place {q - 1} distinct elements on {n_elements}")
    weights = np.repeat(hq[:, :1], n_elements, axis=1)
    weights[:, elements] = hq[:, 1:]
    return weights, elements
