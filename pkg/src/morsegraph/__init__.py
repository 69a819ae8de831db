"""Spectral analysis of Schrodinger operators on finite weighted graphs:
Morse-index computation, ground-state (Doob) transforms, Birman-Schwinger
counting bounds, Green-kernel parabolicity tests, and Neumann bracketing."""

__version__ = "0.1.0"

from .graphs import (
    BoundaryCondition,
    Exhaustion,
    PotentialField,
    WeightedGraph,
    ball_exhaustion,
    build_half_line,
    build_lattice,
    build_tree,
    load_graph_json,
    restrict,
)
from .operators import (
    DoobData,
    OperatorBundle,
    assemble,
    compact_support_check,
    doob_transform,
    quadratic_form,
    restrict_bundle,
)
from .spectral import (
    SpectralSummary,
    count_below,
    eigen_symmetric,
    ground_state,
    lambda1_exterior,
    morse_index,
)
from .parabolicity import (
    ParabolicityVerdict,
    Verdict,
    bs_tail_profile,
    dirichlet_constant,
    green_kernel,
    parabolicity_test,
    restricted_inv_sqrt_norm,
)
from .birman_schwinger import (
    BSOperator,
    ShiftRecord,
    bs_bound_check,
    bs_vector_certificate,
    build_bs,
    inv_sqrt,
    kernel_check,
    make_shift,
)
from .pipeline import (
    PipelineConfig,
    PipelineReport,
    bracketing_check,
    clr_scaling_probe,
    exterior_positive_solution,
    find_stable_exterior,
    main_theorem_pipeline,
    nonneg_shift,
)
from .config import ScenarioConfig, parse_config
from .runner import RunReport, run
