"""Occupation-resolved entanglement observables.

For an eigenstate of fixed electron number and total S_z, the one-site
reduced density matrix is exactly diagonal in the occupation basis
{empty, up, down, double}: an off-diagonal element would connect states
of different local charge or spin, which superselection forbids. The
entanglement of a site (or of an effective site standing for a whole
block) with the rest of the system is therefore the Shannon entropy of a
four-outcome distribution, with nothing discarded.

Conventions: block quantities are reported in bits (base-2 entropy; one
four-state site carries at most 2), the single-site entropy defaults to
natural log but the base is configurable and recorded in emitted rows.
Reported distributions are spin-flip symmetrized (p_up = p_down), since
the half-filled problem is solved in an S_z = +1/2 sector and the sign of
S_z is arbitrary; symmetrization commutes with the descent chain, so it
does not matter at which level it is applied.

The "top problem" at level k is the 7-effective-site block at that
level's renormalized couplings; by self-similarity it is solved with the
same machinery as the bare block and stands for 7^(k+1) physical sites.
"""

import math
from dataclasses import dataclass

import numpy as np

from .ed import (
    HubbardParams,
    build_hamiltonian,
    enumerate_sector,
    ground_state,
    occupation_probabilities,
)
from .lattice import build_block_geometry
from .rg import rg_flow

#: Rim site used for the off-centre block observable; all six rim sites
#: are equivalent under the 60-degree rotation.
RIM_SITE = 1


@dataclass(frozen=True)
class OccupationDistribution:
    p_empty: float
    p_up: float
    p_down: float
    p_double: float

    def as_array(self):
        return np.array([self.p_empty, self.p_up, self.p_down, self.p_double])

    def symmetrized(self):
        m = 0.5 * (self.p_up + self.p_down)
        return OccupationDistribution(self.p_empty, m, m, self.p_double)

    def validate(self, tol=1e-10):
        p = self.as_array()
        if p.min() < -tol or p.max() > 1 + tol or abs(p.sum() - 1.0) > tol:
            raise ValueError(f"not a probability distribution: {p}")
        return self


def site_distribution(state, basis, site):
    """Occupation distribution of one site in a sector state (the diagonal
    of the one-site reduced density matrix, which is exact here)."""
    vector = getattr(state, "vector", state)
    p = occupation_probabilities(vector, basis, site)
    return OccupationDistribution(*p)


def entropy(dist, base=2):
    """-sum p log p with 0 log 0 = 0; base 2 or natural log ("e")."""
    p = dist.as_array() if isinstance(dist, OccupationDistribution) else np.asarray(dist, float)
    p = p[p > 0.0]
    s = float(-(p * np.log(p)).sum())
    if base == 2:
        return s / math.log(2.0)
    if base in ("e", math.e):
        return s
    raise ValueError(f"entropy base must be 2 or 'e', got {base!r}")


def _solve_top_sector(traj, level, nup, ndown, geometry=None):
    if geometry is None:
        geometry = build_block_geometry()
    if not 0 <= level < len(traj.us):
        raise ValueError(f"trajectory has no level {level}")
    params = HubbardParams(t=1.0, U=traj.us[level], e0=0.0)
    basis = enumerate_sector(len(geometry.sites), nup, ndown)
    h = build_hamiltonian(geometry.intra_bonds, params, basis, traj.statistics)
    return ground_state(h, basis), basis


def block_block_entanglement(traj, level, geometry=None):
    """(E_bb, E_b7): base-2 entanglement of the central effective site, and
    of one rim effective site, with the rest of the level-`level` top
    problem in its half-filled (4, 3) sector."""
    pair, basis = _solve_top_sector(traj, level, 4, 3, geometry)
    e_bb = entropy(site_distribution(pair, basis, 0).symmetrized(), 2)
    e_b7 = entropy(site_distribution(pair, basis, RIM_SITE).symmetrized(), 2)
    return e_bb, e_b7


def average_entanglement(e_bb, e_b7):
    """Mean pairwise block entanglement, (2 E_bb + E_b7) / 7: the total over
    the 6 centre-rim plus 3 rim-rim pairings divided by the 21 pairs."""
    for name, val in (("E_bb", e_bb), ("E_b7", e_b7)):
        if not -1e-9 <= val <= 2 + 1e-9:
            raise ValueError(f"{name} = {val} outside [0, 2]")
    return (2.0 * e_bb + e_b7) / 7.0


def descend(p_top, traj, from_level, to_level):
    """Convert a distribution over the level-`from_level` effective site's
    four states into the occupation distribution of its central
    level-`to_level` descendant, one recorded descent matrix per step (row
    vector times row-stochastic matrix)."""
    if not 0 <= to_level <= from_level <= len(traj.steps):
        raise ValueError(
            f"need 0 <= to_level <= from_level <= {len(traj.steps)}, "
            f"got ({from_level}, {to_level})"
        )
    p = p_top.as_array()
    for k in range(from_level - 1, to_level - 1, -1):
        p = p @ traj.steps[k].descent_w
    return OccupationDistribution(*p)


def single_site_entanglement(traj, level, base="e", geometry=None):
    """Entanglement of the bare central site with the other 7^(level+1) - 1
    sites: the top central distribution pushed down the descent chain to
    level 0."""
    pair, basis = _solve_top_sector(traj, level, 4, 3, geometry)
    p_top = site_distribution(pair, basis, 0).symmetrized()
    return entropy(descend(p_top, traj, level, 0), base)


def central_block_entropy(u0, level, geometry=None, statistics="bose"):
    """E_bb as a function of the bare coupling, solving only what is needed
    (used by width scans that bisect in u0)."""
    traj = rg_flow(u0, level, geometry, statistics)
    pair, basis = _solve_top_sector(traj, level, 4, 3, geometry)
    return entropy(site_distribution(pair, basis, 0).symmetrized(), 2)


def block_entanglement_vs_size(
    u0, total_level=8, block_levels=None, geometry=None, statistics="bose"
):
    """Entanglement of the central block with the rest of a fixed
    7^(total_level+1)-site system, as the block size 7^m is varied: the
    top central distribution descended to each requested level m. Returns
    (blocksize, E) pairs, base-2."""
    if block_levels is None:
        block_levels = list(range(total_level + 1))
    if any(not 0 <= m <= total_level for m in block_levels):
        raise ValueError(f"block levels {block_levels} outside [0, {total_level}]")
    traj = rg_flow(u0, total_level, geometry, statistics)
    pair, basis = _solve_top_sector(traj, total_level, 4, 3, geometry)
    p_top = site_distribution(pair, basis, 0).symmetrized()
    out = []
    for m in block_levels:
        p_m = descend(p_top, traj, total_level, m)
        out.append((7 ** m, entropy(p_m, 2)))
    return out


@dataclass(frozen=True)
class EntanglementReport:
    """All observables of one (u0, level) point. Block entropies are base 2;
    E_single uses `single_base`. The gap is in bare-t units."""

    u0: float
    level: int
    N: int
    E_bb: float
    E_b7: float
    E_avg: float
    E_single: float
    gap: float
    single_base: str


def compute_report(traj, level, geometry=None, single_base="e"):
    """Solve the level's top problem once and extract every observable."""
    if geometry is None:
        geometry = build_block_geometry()
    pair43, basis43 = _solve_top_sector(traj, level, 4, 3, geometry)
    pair33, _ = _solve_top_sector(traj, level, 3, 3, geometry)
    pair44, _ = _solve_top_sector(traj, level, 4, 4, geometry)

    gap_local = pair33.energy + pair44.energy - 2.0 * pair43.energy
    gap = traj.t_scales[level] * max(gap_local, 0.0)

    p_center = site_distribution(pair43, basis43, 0).symmetrized()
    p_rim = site_distribution(pair43, basis43, RIM_SITE).symmetrized()
    e_bb = entropy(p_center, 2)
    e_b7 = entropy(p_rim, 2)
    base = "e" if single_base in ("e", math.e) else "2"
    e_single = entropy(descend(p_center, traj, level, 0), single_base)

    return EntanglementReport(
        u0=traj.u0,
        level=level,
        N=traj.system_size(level),
        E_bb=e_bb,
        E_b7=e_b7,
        E_avg=average_entanglement(e_bb, e_b7),
        E_single=e_single,
        gap=gap,
        single_base=base,
    )
