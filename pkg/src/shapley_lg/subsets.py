"""Subsets of the variable indices ``[1:p]`` encoded as integer bitmasks.

A subset ``u`` of ``{1, ..., p}`` is stored as ``sum(2**(i-1) for i in u)``,
so bit ``i-1`` of the mask says whether variable ``i`` belongs to ``u``.
Mask ``0`` is the empty set and ``2**p - 1`` is the full set. This encoding
makes the pairing of ``u`` and ``u + {i}`` a single integer addition, which
is what the lattice loops in :mod:`shapley_lg.indices` rely on.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

from .errors import DimensionCapError

#: Largest dimension for which a full 2**p lattice may be materialised.
FULL_LATTICE_CAP = 25


def check_lattice_cap(p: int) -> None:
    """Raise :class:`DimensionCapError` if a 2**p enumeration is not supported."""
    if p > FULL_LATTICE_CAP:
        raise DimensionCapError(
            f"p={p} would enumerate 2**{p} subsets; the cap is p <= {FULL_LATTICE_CAP}"
        )


def full_mask(p: int) -> int:
    """Mask of the full set ``[1:p]``."""
    return (1 << p) - 1


def encode(u: Iterable[int], p: int) -> int:
    """Encode a collection of distinct variable indices in ``[1:p]`` as a mask."""
    mask = 0
    for i in u:
        if not 1 <= i <= p:
            raise ValueError(f"variable index {i} outside [1:{p}]")
        bit = 1 << (i - 1)
        if mask & bit:
            raise ValueError(f"variable index {i} repeated")
        mask |= bit
    return mask


def decode(j: int, p: int) -> tuple[int, ...]:
    """Sorted tuple of the variable indices contained in mask ``j``."""
    if not 0 <= j < (1 << p):
        raise ValueError(f"mask {j} outside [0:2**{p}-1]")
    return tuple(i for i in range(1, p + 1) if j >> (i - 1) & 1)


def contains(j: int, i: int) -> bool:
    """Whether variable ``i`` belongs to the subset encoded by ``j``."""
    return bool(j >> (i - 1) & 1)


def with_element(j: int, i: int) -> int:
    """Mask of the subset extended by variable ``i``; ``i`` must not be present."""
    bit = 1 << (i - 1)
    if j & bit:
        raise ValueError(f"variable {i} already in subset {j:#b}")
    return j + bit


def cardinality(j: int) -> int:
    """Number of variables in the subset encoded by ``j``."""
    return j.bit_count()


def iterate_supersets(j: int, p: int) -> Iterator[int]:
    """Yield the masks of all supersets of ``j`` within ``[1:p]``, each once.

    Exactly ``2**(p - cardinality(j))`` masks are produced. The iteration
    order is unspecified and callers must not rely on it.
    """
    if not 0 <= j < (1 << p):
        raise ValueError(f"mask {j} outside [0:2**{p}-1]")
    free = full_mask(p) ^ j
    sub = free
    while True:
        yield j | sub
        if sub == 0:
            return
        sub = (sub - 1) & free


def cardinality_table(p: int) -> np.ndarray:
    """Array of length 2**p with entry ``j`` equal to ``cardinality(j)``."""
    check_lattice_cap(p)
    card = np.zeros(1 << p, dtype=np.int64)
    for b in range(p):
        half = 1 << b
        card[half : 2 * half] = card[:half] + 1
    return card
