"""Finite hypercube geometry in Z^d and site-set bitmasks.

Sites of the L^d hypercube are enumerated row-major with the first
coordinate varying fastest: site i has coordinates
(i % L, (i // L) % L, ..., (i // L^(d-1)) % L).  This makes bit positions
of site subsets reproducible across runs.  A site set is a plain integer
bitmask: bit i set means site i belongs to the set.

Boundaries are free (open); nearest neighbors differ by exactly 1 in
exactly one coordinate, with no wraparound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import ConstraintError, SizeCapError

# Geometry cap: bitmasks must fit a machine word so that configurations
# stay cheap to store and sample.  The classical-enumeration and quantum
# layers enforce their own, much tighter caps (24 and 14 sites).
DEFAULT_SITE_CAP = 64


@dataclass(frozen=True)
class Lattice:
    """An L^d hypercube with row-major site indexing."""

    dimension: int
    side: int
    coords: tuple[tuple[int, ...], ...]

    @property
    def n_sites(self) -> int:
        return len(self.coords)

    @property
    def full_mask(self) -> int:
        return (1 << self.n_sites) - 1

    def index(self, coord: Iterable[int]) -> int:
        """Linear index of a coordinate vector."""
        coord = tuple(coord)
        if len(coord) != self.dimension or any(
            c < 0 or c >= self.side for c in coord
        ):
            raise ConstraintError(f"coordinate {coord} outside the lattice")
        idx = 0
        for k in reversed(range(self.dimension)):
            idx = idx * self.side + coord[k]
        return idx

    def coordinate(self, index: int) -> tuple[int, ...]:
        """Coordinate vector of a linear index."""
        return self.coords[index]


def build_hypercube(d: int, L: int, site_cap: int = DEFAULT_SITE_CAP) -> Lattice:
    """Build the L^d hypercube; raises SizeCapError when L^d > site_cap."""
    if d < 1 or L < 1:
        raise ConstraintError(f"need d >= 1 and L >= 1, got d={d}, L={L}")
    n = L**d
    if n > site_cap:
        raise SizeCapError(
            f"lattice with {n} sites exceeds the site cap of {site_cap}"
        )
    coords = []
    for i in range(n):
        rest, coord = i, []
        for _ in range(d):
            coord.append(rest % L)
            rest //= L
        coords.append(tuple(coord))
    return Lattice(dimension=d, side=L, coords=tuple(coords))


def nearest_neighbor_pairs(lattice: Lattice) -> list[tuple[int, int]]:
    """All unordered nearest-neighbor pairs, lexicographically smaller site first.

    The list has d * L^(d-1) * (L-1) entries for the L^d hypercube.
    """
    L = lattice.side
    pairs = []
    for i, coord in enumerate(lattice.coords):
        for k in range(lattice.dimension):
            if coord[k] + 1 < L:
                neighbor = list(coord)
                neighbor[k] += 1
                pairs.append((i, lattice.index(neighbor)))
    return pairs


def linear_height(coord: Iterable[int]) -> int:
    """Coordinate sum of a site, the staircase field u_x = x_1 + ... + x_d."""
    return sum(coord)


def height_field(lattice: Lattice) -> list[int]:
    """linear_height evaluated on every site, in index order."""
    return [linear_height(c) for c in lattice.coords]


def mask_from_sites(sites: Iterable[int], n_sites: int | None = None) -> int:
    """Bitmask of a collection of site indices; rejects duplicates."""
    mask = 0
    for s in sites:
        if s < 0:
            raise ConstraintError(f"negative site index {s}")
        if n_sites is not None and s >= n_sites:
            raise ConstraintError(f"site index {s} outside a {n_sites}-site lattice")
        bit = 1 << s
        if mask & bit:
            raise ConstraintError(f"duplicate site index {s}")
        mask |= bit
    return mask


def sites_from_mask(mask: int) -> tuple[int, ...]:
    """Sorted site indices of a bitmask."""
    sites = []
    i = 0
    while mask:
        if mask & 1:
            sites.append(i)
        mask >>= 1
        i += 1
    return tuple(sites)
