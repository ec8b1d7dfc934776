"""Hypercubic lattice geometry with free boundaries.

Sites of the box [0, L)^d are indexed 0..L^d-1 in row-major coordinate
order (axis 0 slowest).  Bonds are the unordered nearest-neighbor pairs
inside the box; there is no periodic wrap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Dense site indexing; downstream engines have far tighter caps of their own.
MAX_SITES = 1 << 22


@dataclass(frozen=True, eq=False)
class LatticeGeometry:
    """Immutable site/bond bookkeeping for one box.

    ``bonds`` is an (B, 2) int array with bonds[k, 0] < bonds[k, 1],
    sorted lexicographically, so the order is canonical and reproducible.
    """

    d: int
    L: int
    site_count: int
    bonds: np.ndarray

    @property
    def bond_count(self) -> int:
        return int(self.bonds.shape[0])

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    def decode(self, index: int) -> tuple[int, ...]:
        """Site index -> coordinate tuple."""
        return tuple(int(c) for c in np.unravel_index(index, self.shape))

    def encode(self, coords) -> int:
        """Coordinate tuple -> site index."""
        return int(np.ravel_multi_index(tuple(int(c) for c in coords), self.shape))

    def coordinates(self) -> np.ndarray:
        """All site coordinates as an (N, d) array, in site-index order."""
        grid = np.unravel_index(np.arange(self.site_count), self.shape)
        return np.stack(grid, axis=1)

    def bond_index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.bonds[:, 0], self.bonds[:, 1]


def build_lattice(d: int, L: int) -> LatticeGeometry:
    """Construct the box [0, L)^d with its nearest-neighbor bond list.

    Raises ValueError for d < 1 or L < 1 and CapExceeded when L^d would
    exceed the dense-indexing cap.
    """
    from .errors import CapExceeded

    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if L < 1:
        raise ValueError(f"linear size must be >= 1, got {L}")
    n = L**d
    if n > MAX_SITES:
        raise CapExceeded(f"L^d = {n} exceeds dense indexing cap {MAX_SITES}")

    coords = np.stack(np.unravel_index(np.arange(n), (L,) * d), axis=1)
    pieces = []
    for axis in reversed(range(d)):  # ascending stride
        stride = L ** (d - 1 - axis)
        src = np.nonzero(coords[:, axis] < L - 1)[0]
        pieces.append(np.stack([src, src + stride], axis=1))
    bonds = np.concatenate(pieces, axis=0)
    order = np.lexsort((bonds[:, 1], bonds[:, 0]))
    bonds = np.ascontiguousarray(bonds[order])
    bonds.setflags(write=False)
    return LatticeGeometry(d=d, L=L, site_count=n, bonds=bonds)
