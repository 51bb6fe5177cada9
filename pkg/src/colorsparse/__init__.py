"""Approximation-tolerant partial colorings and the sparsifiers built on them.

The core engine (:mod:`colorsparse.coloring`) finds fractional colorings of
near-maximal support whose value under a convex test function stays below a
target radius, relying only on approximate solver oracles.  On top of it sit
linear-sized spectral sparsifiers for isotropic PSD sums and graphs
(:mod:`colorsparse.sparsify`), ultrasparsifiers, sparsifiers that preserve
every weighted degree exactly (:mod:`colorsparse.degree`), and full +/-1
set-system colorings with Spencer-type discrepancy
(:mod:`colorsparse.spencer`).
"""

from .boxspec import (
    FWConfig,
    SolverContractError,
    box_linopt,
    make_spectral_solver,
    minimize_flam_smoothed,
    solve_flam,
)
from .coloring import (
    C_SET_DEFAULT,
    C_TIGHT_DEFAULT,
    DiscrepancyBody,
    PartialColoring,
    binary_search_partial_color,
    two_sided_partial_color,
)
from .degree import (
    CirculationOracle,
    DegreeConfig,
    ObliviousRouting,
    RoundResult,
    build_routing,
    circulation_linopt,
    degree_preserving_sparsify,
    degree_round,
    make_constrained_solver,
)
from .graphs import (
    LapSolver,
    WeightedGraph,
    certify_sandwich,
    effective_resistances,
    isotropize,
    lap_solve,
    tree_distortion,
)
from .operators import (
    GaussianSource,
    OperatorFamily,
    SpectralObjective,
    load_family,
    save_family,
)
from .sparsify import (
    PhaseError,
    SparsifierResult,
    SparsifyConfig,
    graph_sparsify,
    linear_sized_sparsify,
    sparse_plus_small,
    ultrasparsify,
)
from .spencer import (
    RoundingError,
    SetSystem,
    SpencerConfig,
    SpencerResult,
    l2l1_game_solve,
    round_near_tight,
    spencer_color,
    spencer_radius,
)

__version__ = "0.1.0"

__all__ = [
    "FWConfig",
    "SolverContractError",
    "box_linopt",
    "make_spectral_solver",
    "minimize_flam_smoothed",
    "solve_flam",
    "C_SET_DEFAULT",
    "C_TIGHT_DEFAULT",
    "DiscrepancyBody",
    "PartialColoring",
    "binary_search_partial_color",
    "two_sided_partial_color",
    "CirculationOracle",
    "DegreeConfig",
    "ObliviousRouting",
    "RoundResult",
    "build_routing",
    "circulation_linopt",
    "degree_preserving_sparsify",
    "degree_round",
    "make_constrained_solver",
    "LapSolver",
    "WeightedGraph",
    "certify_sandwich",
    "effective_resistances",
    "isotropize",
    "lap_solve",
    "tree_distortion",
    "GaussianSource",
    "OperatorFamily",
    "SpectralObjective",
    "load_family",
    "save_family",
    "PhaseError",
    "SparsifierResult",
    "SparsifyConfig",
    "graph_sparsify",
    "linear_sized_sparsify",
    "sparse_plus_small",
    "ultrasparsify",
    "RoundingError",
    "SetSystem",
    "SpencerConfig",
    "SpencerResult",
    "l2l1_game_solve",
    "round_near_tight",
    "spencer_color",
    "spencer_radius",
]
