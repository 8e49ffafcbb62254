"""Entanglement scaling across the Hubbard metal-insulator transition on a
triangular quantum-dot lattice, by exact diagonalization of 7-site blocks
and iterated real-space renormalization."""

__version__ = "0.1.0"

from .ed import (
    EigenPair,
    HubbardParams,
    SectorBasis,
    build_hamiltonian,
    charge_gap,
    enumerate_sector,
    ground_state,
)
from .entanglement import (
    EntanglementReport,
    OccupationDistribution,
    average_entanglement,
    block_block_entanglement,
    block_entanglement_vs_size,
    compute_report,
    descend,
    entropy,
    single_site_entanglement,
    site_distribution,
)
from .errors import (
    BracketError,
    CollapseError,
    ConfigError,
    DegenerateBlockError,
    EigensolverError,
    NumericalError,
    TrihubError,
)
from .lattice import BlockGeometry, SiteCoord, build_block_geometry, verify_tiling
from .rg import (
    KeptStates,
    RGStepResult,
    RGTrajectory,
    compute_kept_states,
    find_fixed_point,
    flow_map,
    nu_from_linearization,
    renormalize,
    rg_flow,
)
from .scaling import (
    CollapseFit,
    EntanglementCurve,
    build_curves,
    collapse_residual,
    fit_collapse,
    gap_curves,
    nelder_mead,
    transition_width,
)
