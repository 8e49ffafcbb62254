"""Independent brute-force oracles the unit tests check the package against.

Everything here is deliberately written with different machinery than the
package (dense matrices, itertools enumeration, closed forms) so that an
agreement is meaningful.
"""

from itertools import combinations

import numpy as np


def hopping_matrix(bonds, nsites, t=1.0):
    h = np.zeros((nsites, nsites))
    for bond in bonds:
        i, j = bond[0], bond[1]
        amp = bond[2] if len(bond) == 3 else 1.0
        h[i, j] -= t * amp
        h[j, i] -= t * amp
    return h


def one_particle_levels(bonds, nsites, t=1.0):
    return np.linalg.eigvalsh(hopping_matrix(bonds, nsites, t))


def fermi_filling_energy(bonds, nsites, nup, ndown, t=1.0):
    """Free-fermion sector ground energy at U = 0: fill the lowest levels."""
    lev = one_particle_levels(bonds, nsites, t)
    return float(lev[:nup].sum() + lev[:ndown].sum())


def hardcore_boson_energy(bonds, nsites, k, t=1.0):
    """Ground energy of k sign-free hardcore particles hopping on the graph,
    by dense diagonalization over occupied-site subsets."""
    configs = list(combinations(range(nsites), k))
    index = {c: i for i, c in enumerate(configs)}
    h = np.zeros((len(configs), len(configs)))
    for c in configs:
        occ = set(c)
        for bond in bonds:
            i, j = bond[0], bond[1]
            amp = bond[2] if len(bond) == 3 else 1.0
            for src, dst in ((i, j), (j, i)):
                if src in occ and dst not in occ:
                    new = tuple(sorted(occ - {src} | {dst}))
                    h[index[new], index[c]] -= t * amp
    return float(np.linalg.eigvalsh(h)[0]) if len(configs) else 0.0


def bose_sector_energy_u0(bonds, nsites, nup, ndown, t=1.0):
    """At U = 0 the two species decouple."""
    return hardcore_boson_energy(bonds, nsites, nup, t) + hardcore_boson_energy(
        bonds, nsites, ndown, t
    )


def dimer_halffilled_matrix(t, U):
    """The explicit half-filled two-site matrix in the basis
    (up0 down0), (up0 down1), (up1 down0), (up1 down1), with single
    occupancy at -U/2 per site and double/empty at 0."""
    return np.array(
        [
            [0.0, -t, -t, 0.0],
            [-t, -U, 0.0, -t],
            [-t, 0.0, -U, -t],
            [0.0, -t, -t, 0.0],
        ]
    )


def dimer_ground_energy(t, U):
    """Closed form for the half-filled dimer: the singlet channel of the
    4x4 above is [[-U, 2t], [2t, 0]], so E0 = -U/2 - sqrt(U^2/4 + 4 t^2)."""
    return -U / 2.0 - np.sqrt(U * U / 4.0 + 4.0 * t * t)


def brute_force_site_rdm(vector, basis, site):
    """Full 4x4 one-site reduced density matrix, built by grouping basis
    states over the configuration of all other sites. Occupation order:
    empty, up, down, double."""
    groups = {}
    for idx, (up, down) in enumerate(basis.states()):
        occ = ((up >> site) & 1) + 2 * ((down >> site) & 1)
        rest = (up & ~(1 << site), down & ~(1 << site))
        groups.setdefault(rest, []).append((occ, vector[idx]))
    rho = np.zeros((4, 4))
    for members in groups.values():
        for occ_a, amp_a in members:
            for occ_b, amp_b in members:
                rho[occ_a, occ_b] += amp_a * amp_b
    return rho


# Values computed with an independent dense/ARPACK implementation of the
# same model (maintained outside the package); frozen here as pins.
USTAR_PIN = 12.5169845
SLOPE_PIN = 2.7675836
NU_PIN = 0.9557754
BOSE_E33_U4_PIN = -22.04390458
BOSE_E43_U4_PIN = -22.39605138
BOSE_E43_GAP_U4_PIN = 2.07490965
EBB_LEVEL0_PINS = {1.0: 1.99832, 6.0: 1.92271, 16.0: 1.39078, 40.0: 1.08179}
