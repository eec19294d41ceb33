"""
Hierarchy multi-indices: enumeration, truncation, adjacency and the
fermionic sign factors.

Indices are enumerated in graded order: by total ``|k|`` first, then in
descending lexicographic order inside a grade, e.g. for two channels

    (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...

so a depth truncation is always a prefix of a deeper one.

Density-operator hierarchies use the same machinery with twice the number
of channels: the pair ``(m, n)`` is stored as one index ``m + n`` of length
``2J`` (see :func:`pair_space`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Statistics

MAX_FERMIONIC_CHANNELS = 24
MAX_SPACE_SIZE = 2_000_000


class SpaceTooLarge(ValueError):
    pass


class BosonicUntruncated(ValueError):
    pass


@dataclass(frozen=True)
class Truncation:
    """Truncation criterion.

    ``depth`` keeps ``|k| <= depth``; ``energy`` keeps ``|k . w| <= energy``
    (complex modulus) for the weight vector ``weights``. Both may be set, in
    which case the space is their intersection (experimental). Neither set
    means the full space, which is only finite for fermions.
    """

    depth: Optional[int] = None
    energy: Optional[float] = None
    weights: Optional[tuple[complex, ...]] = None

    @classmethod
    def Depth(cls, K: int) -> "Truncation":
        return cls(depth=int(K))

    @classmethod
    def Energy(cls, W: float, weights: Sequence[complex]) -> "Truncation":
        return cls(energy=float(W), weights=tuple(complex(w) for w in weights))

    @classmethod
    def Full(cls) -> "Truncation":
        return cls()

    @property
    def is_full(self) -> bool:
        return self.depth is None and self.energy is None

    def __post_init__(self):
        if self.depth is not None and self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.energy is not None:
            if self.weights is None:
                raise ValueError("energy truncation needs a weight vector")
            if self.energy < 0:
                raise ValueError("energy cutoff must be non-negative")

    def doubled(self) -> "Truncation":
        """Same criterion on pair indices ``(m, n)`` with weights ``(w, conj(w))``."""
        if self.weights is None:
            return self
        w = np.asarray(self.weights)
        return Truncation(self.depth, self.energy, tuple(np.concatenate([w, w.conj()])))

    def accepts(self, k: Sequence[int]) -> bool:
        if self.depth is not None and sum(k) > self.depth:
            return False
        if self.energy is not None:
            if abs(np.dot(k, self.weights)) > self.energy * (1 + 1e-12):
                return False
        return True


def sign_factors(k: Sequence[int], j: int) -> tuple[int, int]:
    """``((-1)^|k|, (-1)^(k_{j+1} + ... + k_J))`` with ``j`` zero-based.

    The partial sum runs over the components strictly after ``j``; ``j = -1``
    gives the total.
    """
    total = -1 if sum(k) % 2 else 1
    partial = -1 if sum(k[j + 1 :]) % 2 else 1
    return total, partial


def ordering_sign(k: Sequence[int], j: int) -> int:
    """``(-1)^(k_1 + ... + k_{j-1})``: components strictly before ``j``."""
    return -1 if sum(k[:j]) % 2 else 1


def sign_tables(indices: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised sign factors for an ``(n, J)`` index array.

    Returns ``s_total`` (n,), ``s_partial`` (n, J) over components after
    ``j`` and ``s_before`` (n, J) over components before ``j``.
    """
    parity = np.asarray(indices) % 2
    s_total = np.where(parity.sum(axis=1) % 2, -1, 1)
    after = np.cumsum(parity[:, ::-1], axis=1)[:, ::-1] - parity
    before = np.cumsum(parity, axis=1) - parity
    return s_total, np.where(after % 2, -1, 1), np.where(before % 2, -1, 1)


def _compositions_desc(total: int, parts: int, cap: Optional[int]):
    """All length-``parts`` tuples summing to ``total`` in descending lex order."""
    if parts == 1:
        if cap is None or total <= cap:
            yield (total,)
        return
    hi = total if cap is None else min(total, cap)
    for first in range(hi, -1, -1):
        for rest in _compositions_desc(total - first, parts - 1, cap):
            yield (first,) + rest


class IndexSpace:
    """Immutable enumerated set of multi-indices with adjacency tables.

    Attributes
    ----------
    indices : ndarray (n, J) of int
    up, down : ndarray (n, J) of int
        Position of ``k +/- e_j`` or ``-1`` when outside the space.
    s_total, s_partial : ndarray (n,), (n, J) of int
        Fermionic sign factors (filled for bosonic spaces too; unused there).
    """

    def __init__(self, indices: Sequence[Sequence[int]], statistics: Statistics, n_channels: int):
        self.statistics = Statistics.parse(statistics)
        self.n_channels = n_channels
        self.indices = np.array(indices, dtype=np.int64).reshape(-1, n_channels)
        self.indices.setflags(write=False)
        self._pos = {tuple(k): p for p, k in enumerate(map(tuple, self.indices.tolist()))}
        n, J = self.indices.shape
        up = np.full((n, J), -1, dtype=np.int64)
        down = np.full((n, J), -1, dtype=np.int64)
        for p, k in enumerate(self.indices.tolist()):
            for j in range(J):
                k[j] += 1
                up[p, j] = self._pos.get(tuple(k), -1)
                k[j] -= 2
                if k[j] >= 0:
                    down[p, j] = self._pos.get(tuple(k), -1)
                k[j] += 1
        self.up, self.down = up, down
        self.s_total, self.s_partial, self.s_before = sign_tables(self.indices)
        for arr in (self.up, self.down, self.s_total, self.s_partial, self.s_before):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(map(tuple, self.indices.tolist()))

    def position(self, k: Sequence[int]) -> Optional[int]:
        return self._pos.get(tuple(int(x) for x in k))

    def __contains__(self, k) -> bool:
        return tuple(int(x) for x in k) in self._pos

    def neighbor(self, p: int, j: int, direction: str) -> Optional[int]:
        table = {"up": self.up, "down": self.down}[direction.lower()]
        q = int(table[p, j])
        return None if q < 0 else q

    def __repr__(self) -> str:
        return f"IndexSpace({self.statistics.value}, J={self.n_channels}, size={len(self)})"


def build_index_space(
    J: int, statistics: Statistics | str, truncation: Truncation = Truncation.Full()
) -> IndexSpace:
    """Enumerate the hierarchy indices for ``J`` channels.

    Fermionic indices take values in {0, 1}; bosonic ones are unbounded and
    need a depth or energy criterion. The result is downward closed: an
    index is kept only if every ``k - e_j`` is kept too.
    """
    statistics = Statistics.parse(statistics)
    if J < 1:
        raise ValueError("J must be positive")
    fermionic = statistics is Statistics.FERMIONIC
    if fermionic and truncation.is_full and J > MAX_FERMIONIC_CHANNELS:
        raise SpaceTooLarge(f"2^{J} fermionic indices exceed the 2^{MAX_FERMIONIC_CHANNELS} guard")
    if not fermionic and truncation.is_full:
        raise BosonicUntruncated("a bosonic hierarchy needs a Depth or Energy truncation")
    if truncation.weights is not None and len(truncation.weights) != J:
        raise ValueError(f"energy weights have length {len(truncation.weights)}, expected {J}")

    cap = 1 if fermionic else None
    max_grade = J if fermionic else truncation.depth
    accepted: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    grade = 0
    while max_grade is None or grade <= max_grade:
        added = 0
        for k in _compositions_desc(grade, J, cap):
            if not truncation.accepts(k):
                continue
            if any(
                k[j] > 0 and (k[:j] + (k[j] - 1,) + k[j + 1 :]) not in seen for j in range(J)
            ):
                continue
            accepted.append(k)
            added += 1
            if len(accepted) > MAX_SPACE_SIZE:
                raise SpaceTooLarge(f"index space exceeds {MAX_SPACE_SIZE} entries")
        seen.update(accepted[len(accepted) - added :])
        if added == 0 and max_grade is None:
            break
        grade += 1
    return IndexSpace(accepted, statistics, J)


def pair_space(J: int, statistics: Statistics | str, truncation: Truncation) -> IndexSpace:
    """Index space of pairs ``(m, n)`` stored as length-``2J`` indices.

    The truncation acts on the concatenated index, i.e. a depth ``K`` keeps
    ``|m| + |n| <= K``.
    """
    return build_index_space(2 * J, statistics, truncation.doubled())


def split_pair(space: IndexSpace) -> tuple[np.ndarray, np.ndarray]:
    J = space.n_channels // 2
    return space.indices[:, :J], space.indices[:, J:]


def depth_space_size(J: int, K: int) -> int:
    return math.comb(K + J, J)


__all__ = [
    "Truncation",
    "IndexSpace",
    "build_index_space",
    "pair_space",
    "split_pair",
    "sign_factors",
    "sign_tables",
    "ordering_sign",
    "SpaceTooLarge",
    "BosonicUntruncated",
    "depth_space_size",
]
