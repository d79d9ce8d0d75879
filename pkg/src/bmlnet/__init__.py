"""n-dimensional Biham-Middleton-Levine traffic automaton with type switching."""

__version__ = "0.1.0"

from .buslaev import Contour, LimitCycle, SpectrumReport, contours, limit_cycle, node_membership, spectrum
from .diagonal import (
    DiagonalProfile,
    FreeMovementCertificate,
    ZeroCluster,
    certificate,
    check_cluster_monotonicity,
    check_lemma1,
    detect_free_movement,
    diagonal_index,
    gcd_all,
    phi,
    profile,
    verify_theorem1,
    zero_clusters,
)
from .dynamics import StepStats, SwitchPolicy, Trajectory, mean_velocity, simulate, step, substep
from .lattice import (
    Configuration,
    LatticeShape,
    Particle,
    enumerate_configurations,
    neighbor,
    random_configuration,
    validate,
)
