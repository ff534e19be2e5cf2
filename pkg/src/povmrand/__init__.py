"""Randomness certification with symmetric qubit POVMs.

Builds polygon/Platonic POVM geometries, evaluates the closed-form
adversarial guessing probability, cross-checks it with an independent LP
oracle, reconstructs states from counts by constrained maximum likelihood,
and simulates the heralded-photon experiment end to end.
"""

__version__ = "0.1.0"

from .errors import (
    InfeasibleTargetError,
    InvalidGeometryError,
    TimetagParseError,
    UnphysicalStateError,
    UnsupportedGeometryError,
)
from .geometry import (
    NAMED_STATES,
    PLATONIC_SOLIDS,
    BlochVector,
    Facet,
    HullLocation,
    InversionResult,
    OutcomeStats,
    PovmGeometry,
    QubitState,
    as_bloch,
    born_probabilities,
    builtin_geometry,
    geometry_from_dict,
    geometry_schema,
    hull_membership,
    linear_inversion_state,
    load_geometry,
    make_custom_povm,
    make_platonic_povm,
    make_polygon_povm,
)
from .analytic import (
    CertificateReport,
    TabularData,
    ball_grid,
    disk_grid,
    fibonacci_sphere,
    guessing_probability_analytic,
    hmin_extrema,
    min_entropy,
    scaling_table,
    scan_entropy_grid,
    trusted_min_entropy,
)
from .oracle import (
    EveStrategy,
    ParametricStrategy,
    StrategyAudit,
    StrategyComponent,
    oracle_pguess_lp,
    parametric_pguess_planar,
    strategy_audit,
)
from .mle import MleConfig, MleResult, certify_from_counts, log_likelihood, mle_reconstruct
from .photonics import (
    CoincidenceConfig,
    SimConfig,
    TimetagStream,
    count_coincidences,
    read_timetags,
    simulate_counts,
    simulate_timetags,
    write_timetags,
)
from .kernels import NUMBA_ENABLED, kernel_backend

__all__ = [name for name in dir() if not name.startswith("_")]
