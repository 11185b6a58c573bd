"""Internal DLA on the cylinder Z_N x Z: simulation, exact laws and statistics."""

from .dynamics import (
    ChainState,
    CouplingOutcome,
    add_particle,
    run_chain,
    run_idla,
    sample_final_clusters,
    shifted_step,
    smash_sum,
    water_level_coupling,
)
from .lattice import (
    CardinalityMismatch,
    Cluster,
    Grid,
    IDLAError,
    InvalidWidth,
    OccupiedSite,
    Site,
    StartVacant,
)
from .oracle import (
    ExitDistribution,
    TooLarge,
    exact_cluster_distribution,
    exact_exit_distribution,
    exact_smash_distribution,
    uniform_start_exit,
)
from .rng import RngFamily, RngStream
from .statistics import (
    DomainError,
    FluctuationReport,
    MissingSnapshot,
    TestFunction,
    apriori_moment_bound,
    detect_early_late,
    discrepancy_functional,
    excess_bound_min_n,
    excess_constants,
    fluctuation_check,
    gff_variance,
    imbalance,
    psi,
    reflected_walk_drift,
    simulate_reflected_walk,
    solve_qn,
)
from .walk import (
    ReturnDistribution,
    coupled_settle_pair,
    precompute_return_distribution,
    sample_vertical_hitting_time,
    settle_samples,
    srw_step,
    walk_until_settle,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
