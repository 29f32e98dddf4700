"""Low-conductance hypergraph cuts via heat diffusion and sweep cuts."""

from .hypercore import (
    Cut,
    Hypergraph,
    HypergraphFormatError,
    DisconnectedHypergraphError,
    CapacityError,
    conductance,
    min_conductance_bruteforce,
    sweep_sets,
    best_sweep_cut,
    parse_hypergraph,
    load_hypergraph,
    dump_hypergraph,
)
from .laplacian import (
    WeightedGraph,
    OrderedPartition,
    SupportSelection,
    lovasz_cut_extension,
    support_graph,
    support_selection,
    laplacian_apply,
    normalized_laplacian_apply,
    value_partition,
    ordered_partition,
    collapsed_graph,
)
from .spectral import (
    SpectralConfig,
    SpectralDecomposition,
    decompose,
    heat_propagate,
    rayleigh_quotient,
    lambda2_u2,
    graph_cheeger_sweep,
)
from .diffusion import (
    Trajectory,
    ProxStepReport,
    EventCapError,
    ProxStallError,
    solve_exact,
    next_tie_time,
    prox_step,
    solve_implicit,
    solve_rk4,
)
from .analysis import (
    DiagnosticsReport,
    g_v,
    h_v,
    kappa,
    verify_theorem_1_1,
    verify_corollary_1_2,
    f_interval,
)

__version__ = "0.1.0"
