import json
import math

import pytest

from trihub.lattice import (
    SiteCoord,
    UNIT_DIRECTIONS,
    are_neighbors,
    build_block_geometry,
    rotate60,
    verify_tiling,
)


def cartesian(v):
    return (v[0] + 0.5 * v[1], v[1] * math.sqrt(3) / 2)


def unit_distance(a, b):
    ax, ay = cartesian(a)
    bx, by = cartesian(b)
    return abs((ax - bx) ** 2 + (ay - by) ** 2 - 1.0) < 1e-12


def test_sites_are_center_plus_ccw_rim(geometry):
    assert len(geometry.sites) == 7
    assert geometry.sites[0] == (0, 0)
    angles = []
    for s in geometry.sites[1:]:
        x, y = cartesian(s)
        assert abs(x * x + y * y - 1.0) < 1e-12
        angles.append(math.atan2(y, x) % (2 * math.pi))
    assert angles[0] == 0.0
    assert angles == sorted(angles)


def test_twelve_intra_bonds_match_brute_enumeration(geometry):
    brute = {
        (i, j)
        for i in range(7)
        for j in range(i + 1, 7)
        if unit_distance(geometry.sites[i], geometry.sites[j])
    }
    assert set(geometry.intra_bonds) == brute
    assert len(geometry.intra_bonds) == 12


def test_six_directions_each_rotated_sixty_degrees(geometry):
    dirs = geometry.neighbor_directions
    assert len(dirs) == 6
    assert dirs[0] == (2, 1)
    for d, d_next in zip(dirs, dirs[1:]):
        x, y = cartesian(d)
        rx = 0.5 * x - math.sqrt(3) / 2 * y
        ry = math.sqrt(3) / 2 * x + 0.5 * y
        nx, ny = cartesian(d_next)
        assert abs(rx - nx) < 1e-12 and abs(ry - ny) < 1e-12


def test_superlattice_vectors_have_squared_length_seven(geometry):
    for d in geometry.neighbor_directions:
        x, y = cartesian(d)
        assert abs(x * x + y * y - 7.0) < 1e-12


def test_three_boundary_bonds_per_direction(geometry):
    for pairs in geometry.boundary_bonds:
        assert len(pairs) == 3


def test_boundary_bonds_toward_2a1_plus_a2_match_brute_enumeration(geometry):
    d = (2, 1)
    brute = set()
    for i, si in enumerate(geometry.sites):
        for j, sj in enumerate(geometry.sites):
            if unit_distance(si, (sj[0] + d[0], sj[1] + d[1])):
                brute.add((i, j))
    assert set(geometry.boundary_bonds[0]) == brute


def test_bond_count_identity(geometry):
    total = 2 * len(geometry.intra_bonds) + sum(len(b) for b in geometry.boundary_bonds)
    assert total == 6 * 7


def test_rotation_maps_boundary_bonds_to_next_direction(geometry):
    # rotating by 60 degrees: center fixed, rim index k -> k + 1 (cyclic)
    perm = {0: 0}
    for k in range(1, 7):
        perm[k] = 1 + (k % 6)
    for d in range(6):
        rotated = {(perm[i], perm[j]) for i, j in geometry.boundary_bonds[d]}
        assert rotated == set(geometry.boundary_bonds[(d + 1) % 6])


def test_rotate60_matches_cartesian_rotation():
    for v in UNIT_DIRECTIONS:
        x, y = cartesian(v)
        rx = 0.5 * x - math.sqrt(3) / 2 * y
        ry = math.sqrt(3) / 2 * x + 0.5 * y
        wx, wy = cartesian(rotate60(v))
        assert abs(rx - wx) < 1e-12 and abs(ry - wy) < 1e-12


def test_are_neighbors():
    assert are_neighbors((0, 0), (1, 0))
    assert are_neighbors((1, 0), (0, 1))
    assert not are_neighbors((0, 0), (1, 1))
    assert not are_neighbors((0, 0), (2, 1))


def test_tiling_covers_plane_exactly_once(geometry):
    assert verify_tiling(geometry)


def test_tiling_fails_with_deleted_site(geometry):
    broken = geometry.__class__(
        sites=geometry.sites[:-1],
        intra_bonds=geometry.intra_bonds,
        neighbor_directions=geometry.neighbor_directions,
        boundary_bonds=geometry.boundary_bonds,
    )
    assert not verify_tiling(broken)


def test_tiling_fails_with_duplicated_site(geometry):
    broken = geometry.__class__(
        sites=geometry.sites + (geometry.sites[3],),
        intra_bonds=geometry.intra_bonds,
        neighbor_directions=geometry.neighbor_directions,
        boundary_bonds=geometry.boundary_bonds,
    )
    assert not verify_tiling(broken)


GOLDEN = {
    "sites": [[0, 0], [1, 0], [0, 1], [-1, 1], [-1, 0], [0, -1], [1, -1]],
    "intra_bonds": [
        [0, 1], [0, 2], [0, 3], [0, 4], [0, 5], [0, 6],
        [1, 2], [1, 6], [2, 3], [3, 4], [4, 5], [5, 6],
    ],
    "neighbor_directions": [[2, 1], [-1, 3], [-3, 2], [-2, -1], [1, -3], [3, -2]],
    "boundary_bonds": [
        [[1, 4], [1, 5], [2, 4]],
        [[2, 5], [2, 6], [3, 5]],
        [[3, 1], [3, 6], [4, 6]],
        [[4, 1], [4, 2], [5, 1]],
        [[5, 2], [5, 3], [6, 2]],
        [[6, 3], [6, 4], [1, 3]],
    ],
}


def test_geometry_matches_golden_pin(geometry):
    got = geometry.as_dict()
    pinned = json.loads(json.dumps(GOLDEN))
    for key in pinned:
        if key == "boundary_bonds":
            got_sets = [sorted(b) for b in got[key]]
            pin_sets = [sorted(b) for b in pinned[key]]
            assert got_sets == pin_sets
        else:
            assert got[key] == pinned[key], key


def test_build_is_cached_and_deterministic():
    assert build_block_geometry() is build_block_geometry()
