"""Geometry of the seven-site hexagonal block on the triangular lattice.

Sites live on the triangular Bravais lattice spanned by a1 = (1, 0) and
a2 = (1/2, sqrt(3)/2); a SiteCoord (p, q) means p*a1 + q*a2. Two sites are
nearest neighbours iff their difference is one of the six unit vectors
+-a1, +-a2, +-(a1 - a2).

The block is one site plus its six neighbours. Copies of it placed on the
superlattice spanned by A1 = 2*a1 + a2 and A2 = rot60(A1) tile the plane
with no gaps or overlaps; |A1|^2 = 7, so each blocking step rescales
lengths by sqrt(7). The tiling is self-similar, which is why a single
block description serves every level of the renormalization hierarchy.

Site ordering is frozen: index 0 is the centre, indices 1..6 walk the rim
counterclockwise starting at +a1. State and operator conventions
downstream depend on this ordering, so it must not change.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple


class SiteCoord(NamedTuple):
    a1: int
    a2: int

    def cartesian(self):
        return (self.a1 + 0.5 * self.a2, 0.8660254037844386 * self.a2)


#: The six nearest-neighbour steps, counterclockwise from +a1.
UNIT_DIRECTIONS = (
    SiteCoord(1, 0),
    SiteCoord(0, 1),
    SiteCoord(-1, 1),
    SiteCoord(-1, 0),
    SiteCoord(0, -1),
    SiteCoord(1, -1),
)

_UNIT_SET = frozenset(UNIT_DIRECTIONS)


def rotate60(v):
    """Rotate a lattice vector by +60 degrees (a1 -> a2, a2 -> a2 - a1)."""
    return SiteCoord(-v[1], v[0] + v[1])


def are_neighbors(a, b):
    return (b[0] - a[0], b[1] - a[1]) in _UNIT_SET


@dataclass(frozen=True)
class BlockGeometry:
    """The 7-site block: its sites, internal bonds, and couplings to the
    six adjacent blocks of the sqrt(7) superlattice.

    boundary_bonds[d] lists (i, j) pairs where local site i of this block
    is a nearest neighbour of local site j of the block displaced by
    neighbor_directions[d].
    """

    sites: tuple
    intra_bonds: tuple
    neighbor_directions: tuple
    boundary_bonds: tuple

    def as_dict(self):
        return {
            "sites": [list(s) for s in self.sites],
            "intra_bonds": [list(b) for b in self.intra_bonds],
            "neighbor_directions": [list(d) for d in self.neighbor_directions],
            "boundary_bonds": [[list(b) for b in bonds] for bonds in self.boundary_bonds],
        }


@lru_cache(maxsize=1)
def build_block_geometry():
    """Construct the canonical block by enumeration (nothing hard-coded
    beyond the frozen site ordering and the A1 = 2*a1 + a2 superlattice
    choice)."""
    sites = (SiteCoord(0, 0),) + UNIT_DIRECTIONS

    intra = tuple(
        (i, j)
        for i in range(len(sites))
        for j in range(i + 1, len(sites))
        if are_neighbors(sites[i], sites[j])
    )

    directions = [SiteCoord(2, 1)]
    for _ in range(5):
        directions.append(rotate60(directions[-1]))
    directions = tuple(directions)

    boundary = []
    for d in directions:
        pairs = []
        for i, si in enumerate(sites):
            for j, sj in enumerate(sites):
                shifted = SiteCoord(sj.a1 + d.a1, sj.a2 + d.a2)
                if are_neighbors(si, shifted):
                    pairs.append((i, j))
        boundary.append(tuple(sorted(pairs)))

    return BlockGeometry(sites, intra, directions, tuple(boundary))


def verify_tiling(geometry, window=6):
    """Brute-force check that blocks at all integer combinations of the
    superlattice vectors cover every lattice site in a test window exactly
    once. Accepts perturbed geometries (it reports False for them)."""
    a1v = geometry.neighbor_directions[0]
    a2v = geometry.neighbor_directions[1]

    counts = {}
    span = 2 * window
    for m in range(-span, span + 1):
        for n in range(-span, span + 1):
            cx = m * a1v[0] + n * a2v[0]
            cy = m * a1v[1] + n * a2v[1]
            for s in geometry.sites:
                pt = (cx + s[0], cy + s[1])
                counts[pt] = counts.get(pt, 0) + 1

    for p in range(-window, window + 1):
        for q in range(-window, window + 1):
            if counts.get((p, q), 0) != 1:
                return False
    return True
