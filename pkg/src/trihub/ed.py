"""Exact diagonalization of the particle-hole symmetric Hubbard model in
fixed (N_up, N_down) sectors on small site sets.

The Hamiltonian is

    H = -t sum_{<ij>,sigma} amp_ij (c+_{i sigma} c_{j sigma} + h.c.)
        + U sum_i (1/2 - n_{i up})(1/2 - n_{i down})
        - (U/4) N_s + e0 N_s

so a single site has levels 0 (empty), -U/2 (singly occupied), 0 (doubly
occupied): the bare on-site charge gap is exactly U and half-filled
energies carry no extensive constant. e0 is a per-site scalar offset used
for bookkeeping across renormalization levels; it cancels in all gaps.

ENCODING
    A sector basis is the product of the C(n, nup) spin-up masks with the
    C(n, ndown) spin-down masks, each list sorted ascending, spin-up major:
    index = rank(up_mask) * n_down_masks + rank(down_mask). Bit b of a
    mask is the occupation of site b.

STATISTICS
    statistics="bose" (the default, and the convention the blocking RG in
    this package is built on) assembles hopping without fermionic exchange
    signs, i.e. the dots are distinguishable sites with a four-state local
    space. On the triangular block, which is not bipartite, this keeps the
    model exactly particle-hole symmetric, and by Perron-Frobenius every
    sector ground state is unique for U >= 0, which the truncation step
    requires. statistics="fermi" applies the exchange signs of the
    antisymmetrized electron problem: the spin-up operator string stands
    left of the spin-down string, sites ascending within each spin, so a
    hop picks up the parity of the occupied sites strictly between its
    endpoints in the same spin mask. Frustration then splits the two
    conventions (fermionic blocks lose particle-hole symmetry and develop
    symmetry-protected ground-state degeneracies), so the fermionic path
    is kept for cross-checks, not for flows.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.sparse import coo_matrix

from .errors import EigensolverError, NumericalError

#: Dimension at and below which the dense LAPACK path runs.
DENSE_CUTOFF = 512

#: Sector excitation gap below which a ground state is flagged degenerate.
DEGENERACY_GAP = 1e-8

_STATISTICS = ("bose", "fermi")


@dataclass(frozen=True)
class HubbardParams:
    """Couplings of one level of the hierarchy."""

    t: float
    U: float
    e0: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"hopping t must be positive, got {self.t}")
        if self.U < 0:
            raise ValueError(f"on-site U must be nonnegative, got {self.U}")

    @property
    def u(self):
        return self.U / self.t


@dataclass(frozen=True)
class SectorBasis:
    """Bit-encoded many-body configurations at fixed (nup, ndown)."""

    nsites: int
    nup: int
    ndown: int
    up_masks: np.ndarray
    down_masks: np.ndarray

    @property
    def size(self):
        return len(self.up_masks) * len(self.down_masks)

    def state(self, i):
        nd = len(self.down_masks)
        return int(self.up_masks[i // nd]), int(self.down_masks[i % nd])

    def states(self):
        for u in self.up_masks:
            for d in self.down_masks:
                yield int(u), int(d)

    def index(self, up_mask, down_mask):
        iu = int(np.searchsorted(self.up_masks, up_mask))
        idn = int(np.searchsorted(self.down_masks, down_mask))
        if (
            iu >= len(self.up_masks)
            or idn >= len(self.down_masks)
            or self.up_masks[iu] != up_mask
            or self.down_masks[idn] != down_mask
        ):
            raise KeyError(f"state ({up_mask:#b}, {down_mask:#b}) not in sector")
        return iu * len(self.down_masks) + idn

    def occupations(self, site):
        """Occupation code of `site` per basis state: 0 empty, 1 up, 2 down,
        3 double."""
        u = (self.up_masks >> site) & 1
        d = (self.down_masks >> site) & 1
        return (u[:, None] + 2 * d[None, :]).ravel()


def _masks(nsites, count):
    vals = sorted(sum(1 << s for s in occ) for occ in combinations(range(nsites), count))
    arr = np.array(vals, dtype=np.int64)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def enumerate_sector(nsites, nup, ndown):
    if not 1 <= nsites <= 16:
        raise ValueError(f"nsites must be in [1, 16], got {nsites}")
    if not (0 <= nup <= nsites and 0 <= ndown <= nsites):
        raise ValueError(f"electron counts ({nup}, {ndown}) out of range for {nsites} sites")
    return SectorBasis(nsites, nup, ndown, _masks(nsites, nup), _masks(nsites, ndown))


def _normalize_bonds(bonds, nsites):
    out = []
    for bond in bonds:
        if len(bond) == 2:
            i, j, amp = bond[0], bond[1], 1.0
        else:
            i, j, amp = bond
        if not (0 <= i < nsites and 0 <= j < nsites) or i == j:
            raise ValueError(f"bond ({i}, {j}) out of range for {nsites} sites")
        out.append((int(i), int(j), float(amp)))
    return out


def _between_mask(a, b):
    lo, hi = (a, b) if a < b else (b, a)
    return ((1 << hi) - 1) & ~((1 << (lo + 1)) - 1)


def _hops(masks, src, dst, coeff, fermi):
    """Indices, target indices and signed coefficients for c+_dst c_src on
    one spin species, vectorized over its mask list."""
    movable = ((masks >> src) & 1).astype(bool) & ~((masks >> dst) & 1).astype(bool)
    idx = np.nonzero(movable)[0]
    new = masks[idx] ^ ((1 << src) | (1 << dst))
    jdx = np.searchsorted(masks, new)
    val = np.full(len(idx), coeff)
    if fermi:
        parity = np.bitwise_count(masks[idx] & _between_mask(src, dst)) & 1
        val *= 1.0 - 2.0 * parity
    return idx, jdx, val


def build_hamiltonian(bonds, params, basis, statistics="bose"):
    """Assemble the sector Hamiltonian as a symmetric real CSR matrix.

    bonds are (i, j) pairs or (i, j, amplitude) triples; each contributes
    -params.t * amplitude * (c+_i c_j + h.c.) for both spins.
    """
    if statistics not in _STATISTICS:
        raise ValueError(f"statistics must be one of {_STATISTICS}, got {statistics!r}")
    fermi = statistics == "fermi"
    bonds = _normalize_bonds(bonds, basis.nsites)

    ups, dns = basis.up_masks, basis.down_masks
    nu, nd = len(ups), len(dns)
    dim = nu * nd

    # Diagonal: the U/4 constants of the interaction cancel against the -U/4
    # per-site term, leaving U * (#doubly occupied) - U*(nup+ndown)/2 + e0*N_s.
    dbl = np.bitwise_count(ups[:, None] & dns[None, :]).ravel().astype(float)
    diag = params.U * dbl + (
        -0.5 * params.U * (basis.nup + basis.ndown) + params.e0 * basis.nsites
    )

    rows = [np.arange(dim)]
    cols = [np.arange(dim)]
    vals = [diag]

    all_dn = np.arange(nd)
    all_up = np.arange(nu) * nd
    for i, j, amp in bonds:
        coeff = -params.t * amp
        for src, dst in ((j, i), (i, j)):
            iu, ju, v = _hops(ups, src, dst, coeff, fermi)
            if len(iu):
                rows.append((ju[:, None] * nd + all_dn[None, :]).ravel())
                cols.append((iu[:, None] * nd + all_dn[None, :]).ravel())
                vals.append(np.repeat(v, nd))
            idn, jdn, v = _hops(dns, src, dst, coeff, fermi)
            if len(idn):
                rows.append((all_up[:, None] + jdn[None, :]).ravel())
                cols.append((all_up[:, None] + idn[None, :]).ravel())
                vals.append(np.tile(v, nu))

    h = coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsr()
    h.sum_duplicates()
    return h


def apply_annihilation(vector, basis, site, spin, statistics="bose"):
    """Apply c_{site, spin} to a sector state.

    Returns (vector, basis) in the target sector with one fewer electron of
    that spin. With fermi statistics an up annihilation picks up the parity
    of the occupied up sites below `site`; a down annihilation additionally
    crosses the whole spin-up string.
    """
    if statistics not in _STATISTICS:
        raise ValueError(f"statistics must be one of {_STATISTICS}, got {statistics!r}")
    if spin not in ("up", "down"):
        raise ValueError(f"spin must be 'up' or 'down', got {spin!r}")
    if not 0 <= site < basis.nsites:
        raise ValueError(f"site {site} out of range")
    fermi = statistics == "fermi"

    if spin == "up":
        target = enumerate_sector(basis.nsites, basis.nup - 1, basis.ndown)
    else:
        target = enumerate_sector(basis.nsites, basis.nup, basis.ndown - 1)

    nd = len(basis.down_masks)
    src = basis.up_masks if spin == "up" else basis.down_masks
    tgt = target.up_masks if spin == "up" else target.down_masks

    occupied = ((src >> site) & 1).astype(bool)
    idx = np.nonzero(occupied)[0]
    jdx = np.searchsorted(tgt, src[idx] ^ (1 << site))
    sign = np.ones(len(idx))
    if fermi:
        below = src[idx] & ((1 << site) - 1)
        parity = np.bitwise_count(below) & 1
        if spin == "down":
            parity = parity + basis.nup
        sign = 1.0 - 2.0 * (parity & 1)

    mat = np.asarray(vector, dtype=float).reshape(len(basis.up_masks), nd)
    out = np.zeros((len(target.up_masks), len(target.down_masks)))
    if spin == "up":
        out[jdx, :] = sign[:, None] * mat[idx, :]
    else:
        out[:, jdx] = sign[None, :] * mat[:, idx]
    return out.ravel(), target


def occupation_probabilities(vector, basis, site):
    """P(empty), P(up), P(down), P(double) at `site`: amplitude-squared sums
    over the basis, exact because charge and S_z superselection make the
    one-site reduced density matrix diagonal for any fixed-sector state."""
    if not 0 <= site < basis.nsites:
        raise ValueError(f"site {site} out of range for {basis.nsites} sites")
    v = np.asarray(vector, dtype=float)
    return np.bincount(basis.occupations(site), weights=v * v, minlength=4)


@dataclass(frozen=True)
class EigenPair:
    """Lowest eigenpair of a sector Hamiltonian; `gap` is the estimated
    distance to the next eigenvalue and `degenerate` flags gap < 1e-8."""

    energy: float
    vector: np.ndarray
    degenerate: bool
    gap: float


def _operator_norm(op):
    return float(np.abs(op).sum(axis=1).max())


def _fix_phase(vec):
    if vec[int(np.argmax(np.abs(vec)))] < 0:
        return -vec
    return vec


def _lanczos_lowest(op, deflate=(), block_size=48, max_restarts=60, shift_tol=1e-11):
    """Restarted Lanczos with full reorthogonalization for the lowest
    eigenpair, deterministic by construction.

    Start vector: the uniform positive vector (projected off the deflated
    directions). For the sign-free Hamiltonians used in production the
    ground vector is positive by Perron-Frobenius, so the start can never
    be orthogonal to it. Convergence requires the ground Ritz value to
    stall (relative shift below shift_tol between restarts) and the
    residual to reach 1e-13 * ||op||; spectra with quasi-degenerate ground
    manifolds, where that residual is unreachable, are accepted after the
    Ritz value has stalled three restarts in a row.
    """
    n = op.shape[0]
    norm_h = max(_operator_norm(op), 1e-300)
    res_target = max(1e-13, 64 * np.finfo(float).eps) * norm_h

    v = np.full(n, 1.0 / math.sqrt(n))
    for d in deflate:
        v -= (d @ v) * d
    nv = np.linalg.norm(v)
    if nv < 1e-8:
        # start annihilated by deflation: sweep canonical vectors instead
        for k in range(n):
            v = np.zeros(n)
            v[k] = 1.0
            for d in deflate:
                v -= (d @ v) * d
            nv = np.linalg.norm(v)
            if nv > 0.5:
                break
    v = v / nv

    e_prev = math.inf
    stalls = 0
    m_max = max(2, min(block_size, n - len(deflate)))
    for _ in range(max_restarts):
        q_mat = np.empty((n, m_max))
        alphas = np.empty(m_max)
        betas = np.empty(m_max)
        q_mat[:, 0] = v
        w = op @ v
        alphas[0] = v @ w
        w = w - alphas[0] * v
        k = 1
        while k < m_max:
            for d in deflate:
                w -= (d @ w) * d
            for _pass in range(2):  # full reorthogonalization, two passes
                w -= q_mat[:, :k] @ (q_mat[:, :k].T @ w)
            b = np.linalg.norm(w)
            if b <= 1e-14 * norm_h:
                break  # Krylov space exhausted
            betas[k - 1] = b
            q = w / b
            q_mat[:, k] = q
            w = op @ q
            alphas[k] = q @ w
            w = w - alphas[k] * q - b * q_mat[:, k - 1]
            k += 1

        tri = np.diag(alphas[:k])
        if k > 1:
            tri += np.diag(betas[: k - 1], 1) + np.diag(betas[: k - 1], -1)
        ew, ev = np.linalg.eigh(tri)
        e0 = float(ew[0])
        y = q_mat[:, :k] @ ev[:, 0]
        for d in deflate:
            y -= (d @ y) * d
        y /= np.linalg.norm(y)
        resid = np.linalg.norm(op @ y - e0 * y)

        stalled = abs(e0 - e_prev) <= shift_tol * max(1.0, abs(e0))
        if stalled and resid <= res_target:
            return e0, y
        stalls = stalls + 1 if stalled else 0
        if stalls >= 3:
            return e0, y
        e_prev = e0
        v = y

    raise EigensolverError(
        f"Lanczos did not converge in {max_restarts} restarts (dimension {n})"
    )


def ground_state(op, basis=None):
    """Lowest eigenpair of a symmetric operator: dense LAPACK at dimension
    <= DENSE_CUTOFF, restarted Lanczos above. The excitation gap comes from
    a second, deflated solve so exact multiplets are detected even though a
    single Krylov sequence cannot see multiplicity. The eigenvector sign is
    fixed (largest-magnitude amplitude positive) to make downstream matrix
    elements reproducible."""
    dim = op.shape[0]
    if basis is not None and basis.size != dim:
        raise ValueError(f"basis size {basis.size} does not match operator dimension {dim}")

    if dim <= DENSE_CUTOFF:
        w, v = np.linalg.eigh(op.toarray())
        energy = float(w[0])
        vec = v[:, 0].copy()
        gap = float(w[1] - w[0]) if dim > 1 else math.inf
    else:
        energy, vec = _lanczos_lowest(op)
        e1, _ = _lanczos_lowest(op, deflate=(vec,))
        gap = max(e1 - energy, 0.0)

    vec = _fix_phase(vec)
    resid = float(np.linalg.norm(op @ vec - energy * vec))
    if resid > 1e-9 * max(_operator_norm(op), 1.0):
        raise EigensolverError(f"eigenpair residual {resid:.3e} out of tolerance")
    return EigenPair(energy, vec, gap < DEGENERACY_GAP, gap)


def _half_filled_split(n_electrons):
    return (n_electrons + 1) // 2, n_electrons // 2


def sector_ground_energy(bonds, params, nsites, nup, ndown, statistics="bose"):
    basis = enumerate_sector(nsites, nup, ndown)
    h = build_hamiltonian(bonds, params, basis, statistics)
    return ground_state(h, basis).energy


def charge_gap(bonds, params, nsites, statistics="bose"):
    """E(N-1) + E(N+1) - 2 E(N) at half filling N = nsites. Independent of
    e0 (the offsets cancel); tiny negative round-off is clipped to zero."""
    n = nsites

    def energy(n_electrons):
        nup, ndn = _half_filled_split(n_electrons)
        return sector_ground_energy(bonds, params, nsites, nup, ndn, statistics)

    gap = energy(n - 1) + energy(n + 1) - 2.0 * energy(n)
    if gap < -1e-9:
        raise NumericalError(f"charge gap came out negative ({gap:.3e})")
    return max(gap, 0.0)
