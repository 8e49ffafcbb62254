"""Real-space block renormalization of the triangular-lattice Hubbard model.

One step diagonalizes a 7-site block and keeps four sector ground states,

    empty'  = ground of (N_up, N_down) = (3, 3)   charge -1 wrt half filling
    up'     = ground of (4, 3)                    charge  0, S_z = +1/2
    down'   = spin-flip image of up', sector (3, 4)
    double' = ground of (4, 4)                    charge +1

which become the four local states of one renormalized site. The block
charge gap is the renormalized on-site coupling,

    U' = E(empty') + E(double') - 2 E(up'),

forced by requiring the effective site to reproduce a bare site's level
structure (bare gap = U). The renormalized hopping comes from projecting
the three bonds that join two adjacent blocks onto the kept states:

    t' = t * | sum_{(i,j) in B} A_i A_j |,   A_s = <empty'| c_{s,up} |up'>,

evaluated for one representative direction (all six are related by the
60-degree rotation). With sign-free statistics the same amplitudes govern
the hole channel (<up'| c_{s,down} |double'>) exactly, so the truncated
model is again of Hubbard form and the flow closes on u = U/t. Iterating
generates effective systems of 7^(k+1) sites; the unstable fixed point of
u -> u' is the metal-insulator transition, and the slope there gives the
correlation-length exponent through nu = ln(sqrt 7) / ln(du'/du).

Each step also records a 4x4 row-stochastic descent matrix: row s holds
the occupation distribution of the block's central site given the block
is in kept state s. Chains of these matrices convert distributions over
high-level effective sites into bare-site distributions.

Flows are iterated with couplings renormalized to t = 1 at every level
(u carries all the information); the true t scale factors are recorded so
energies can be reconstructed in bare units.
"""

from dataclasses import dataclass, field

import numpy as np

from .ed import (
    EigenPair,
    HubbardParams,
    apply_annihilation,
    build_hamiltonian,
    enumerate_sector,
    ground_state,
    occupation_probabilities,
)
from .errors import BracketError, DegenerateBlockError, NumericalError
from .lattice import build_block_geometry

#: Length rescaling per blocking step (superlattice constant).
LENGTH_RESCALE = 7 ** 0.5

#: Hard cap on the number of blocking steps (system-size cutoff 7^9 sites...).
MAX_LEVELS = 9


@dataclass(frozen=True)
class KeptStates:
    """The four block eigenstates that span the renormalized site."""

    params: HubbardParams
    statistics: str
    empty: EigenPair
    up: EigenPair
    down: EigenPair
    double: EigenPair

    @property
    def degenerate(self):
        return self.empty.degenerate or self.up.degenerate or self.double.degenerate

    @property
    def energies(self):
        return (self.empty.energy, self.up.energy, self.down.energy, self.double.energy)


@dataclass(frozen=True)
class RGStepResult:
    """Output of one blocking step, in the units of the input params."""

    t_next: float
    U_next: float
    e0_next: float
    descent_w: np.ndarray
    kept_energies: tuple

    @property
    def u_next(self):
        return self.U_next / self.t_next


@dataclass
class RGTrajectory:
    """A flow from bare couplings upward. steps[k] renormalized level k into
    level k+1; us[k] and t_scales[k] are the dimensionless coupling and the
    bare-unit hopping at level k, so the level-k problem in bare units is
    (t, U) = (t_scales[k], us[k] * t_scales[k])."""

    u0: float
    statistics: str
    steps: list = field(default_factory=list)
    us: list = field(default_factory=list)
    t_scales: list = field(default_factory=list)
    e0s: list = field(default_factory=list)

    @property
    def nlevels(self):
        return len(self.steps)

    def system_size(self, level):
        return 7 ** (level + 1)


def _sector_ground(geometry, params, nup, ndown, statistics):
    basis = enumerate_sector(len(geometry.sites), nup, ndown)
    h = build_hamiltonian(geometry.intra_bonds, params, basis, statistics)
    return ground_state(h, basis), basis


def _spin_flipped(pair, basis):
    """The exact global spin-flip image of a sector eigenstate. With the
    spin-up-major product encoding this is a reshape/transpose; the
    fermionic reordering sign is (-1)^(nup*ndown), a global phase."""
    nu, nd = len(basis.up_masks), len(basis.down_masks)
    flipped = np.ascontiguousarray(pair.vector.reshape(nu, nd).T).ravel()
    return EigenPair(pair.energy, flipped, pair.degenerate, pair.gap)


def compute_kept_states(geometry, params, statistics="bose"):
    """Ground states of the (3,3), (4,3), (3,4), (4,4) sectors of one block.
    down' is constructed from up' by the spin flip, not solved separately."""
    empty, _ = _sector_ground(geometry, params, 3, 3, statistics)
    up, basis_up = _sector_ground(geometry, params, 4, 3, statistics)
    double, _ = _sector_ground(geometry, params, 4, 4, statistics)
    down = _spin_flipped(up, basis_up)
    return KeptStates(params, statistics, empty, up, down, double)


def transfer_amplitudes(kept, sites, channel="electron"):
    """Single-particle matrix elements between kept states at the given
    block sites: <empty'|c_{s,up}|up'> for the electron channel,
    <up'|c_{s,down}|double'> for the hole channel."""
    n = 7
    out = {}
    if channel == "electron":
        bra = kept.empty.vector
        ket_basis = enumerate_sector(n, 4, 3)
        ket = kept.up.vector
        spin = "up"
    elif channel == "hole":
        bra = kept.up.vector
        ket_basis = enumerate_sector(n, 4, 4)
        ket = kept.double.vector
        spin = "down"
    else:
        raise ValueError(f"unknown channel {channel!r}")
    for s in sites:
        reduced, _ = apply_annihilation(ket, ket_basis, s, spin, kept.statistics)
        out[s] = float(bra @ reduced)
    return out


def effective_hopping(kept, geometry, params, channel="electron"):
    """|sum over one representative direction's boundary bonds of the
    product of transfer amplitudes on the two blocks|, times t."""
    bonds = geometry.boundary_bonds[0]
    sites = sorted({s for bond in bonds for s in bond})
    amp = transfer_amplitudes(kept, sites, channel)
    return params.t * abs(sum(amp[i] * amp[j] for i, j in bonds))


def renormalize(kept, geometry, params):
    """One truncation step: (t', U', e0', descent matrix) from kept states.

    Refuses degenerate kept sectors outright; picking a state inside a
    multiplet would make every downstream number an artifact of solver
    detail."""
    if kept.degenerate:
        raise DegenerateBlockError(
            f"block sector ground state degenerate at u = {params.u:.9g}"
        )
    e_empty, e_up, _, e_double = kept.energies
    u_next = e_empty + e_double - 2.0 * e_up
    if u_next < -1e-9:
        raise NumericalError(f"renormalized U came out negative ({u_next:.3e})")
    u_next = max(u_next, 0.0)

    t_next = effective_hopping(kept, geometry, params, "electron")

    # Effective-site levels must mirror the bare ones (0, -U'/2, 0) on top of
    # the new offset, so e0' = E(up') + U'/2 (= E(empty') for a symmetric
    # block). E(up') already carries the 7 e0 of the subsites.
    e0_next = e_up + 0.5 * u_next

    n7 = len(geometry.sites)
    bases = {
        "empty": enumerate_sector(n7, 3, 3),
        "up": enumerate_sector(n7, 4, 3),
        "down": enumerate_sector(n7, 3, 4),
        "double": enumerate_sector(n7, 4, 4),
    }
    rows = [
        occupation_probabilities(getattr(kept, name).vector, bases[name], 0)
        for name in ("empty", "up", "down", "double")
    ]
    descent = np.vstack(rows)

    return RGStepResult(t_next, u_next, e0_next, descent, kept.energies)


def rg_flow(u0, nlevels, geometry=None, statistics="bose"):
    """Iterate the blocking step nlevels times from bare coupling u0,
    renormalizing to t = 1 at every level."""
    if u0 < 0:
        raise ValueError(f"u0 must be nonnegative, got {u0}")
    if not 0 <= nlevels <= MAX_LEVELS:
        raise ValueError(f"nlevels must be in [0, {MAX_LEVELS}], got {nlevels}")
    if geometry is None:
        geometry = build_block_geometry()

    traj = RGTrajectory(u0=float(u0), statistics=statistics)
    traj.us.append(float(u0))
    traj.t_scales.append(1.0)
    traj.e0s.append(0.0)
    for _ in range(nlevels):
        params = HubbardParams(t=1.0, U=traj.us[-1], e0=0.0)
        kept = compute_kept_states(geometry, params, statistics)
        step = renormalize(kept, geometry, params)
        if step.t_next <= 0.0:
            raise NumericalError(f"renormalized hopping vanished at u = {params.u:.9g}")
        scale = traj.t_scales[-1]
        traj.steps.append(step)
        traj.us.append(step.u_next)
        traj.e0s.append(7.0 * traj.e0s[-1] + scale * (kept.up.energy + 0.5 * step.U_next))
        traj.t_scales.append(scale * step.t_next)
    return traj


def flow_map(u, geometry=None, statistics="bose"):
    """u -> u' for a single blocking step."""
    if geometry is None:
        geometry = build_block_geometry()
    params = HubbardParams(t=1.0, U=float(u), e0=0.0)
    kept = compute_kept_states(geometry, params, statistics)
    step = renormalize(kept, geometry, params)
    if step.t_next <= 0.0:
        raise NumericalError(f"renormalized hopping vanished at u = {u:.9g}")
    return step.u_next


def find_fixed_point(u_lo, u_hi, tol=1e-6, geometry=None, statistics="bose", flow=None):
    """Bisect u'(u) - u on [u_lo, u_hi] down to an interval of width tol.
    The bracket must straddle a sign change."""
    if not 0 <= u_lo < u_hi:
        raise ValueError(f"need 0 <= u_lo < u_hi, got ({u_lo}, {u_hi})")
    if flow is None:
        def flow(u):
            return flow_map(u, geometry, statistics)

    f_lo = flow(u_lo) - u_lo
    f_hi = flow(u_hi) - u_hi
    if f_lo == 0.0:
        return u_lo
    if f_hi == 0.0:
        return u_hi
    if (f_lo > 0) == (f_hi > 0):
        raise BracketError(
            f"u' - u has the same sign at both ends of [{u_lo}, {u_hi}]; no fixed point bracketed"
        )
    lo, hi = float(u_lo), float(u_hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = flow(mid) - mid
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def linearized_slope(u_star, geometry=None, statistics="bose", flow=None):
    """du'/du at the fixed point, by central finite difference with step
    1e-4 * u_star."""
    if flow is None:
        def flow(u):
            return flow_map(u, geometry, statistics)
    h = 1e-4 * u_star
    return (flow(u_star + h) - flow(u_star - h)) / (2.0 * h)


def nu_from_linearization(u_star, geometry=None, statistics="bose", flow=None):
    """Correlation-length exponent from the linearized flow at the fixed
    point: nu = ln(sqrt 7) / ln(du'/du). A slope at or below 1 means no
    relevant direction and is an error."""
    slope = linearized_slope(u_star, geometry, statistics, flow)
    if slope <= 1.0:
        raise NumericalError(
            f"flow slope {slope:.6g} at u* = {u_star:.6g} is not a relevant direction"
        )
    return float(np.log(LENGTH_RESCALE) / np.log(slope))
