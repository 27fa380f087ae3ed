"""Multi-scale renormalization of autocatalytic reaction networks.

The package estimates Lyapunov eigendata (growth rate λ*, weights π,
adjoint vector v†) of split-reaction-graph generators by integer
scale arithmetic on a coalescence tree, and validates everything
against dense numerical oracles.
"""

from .network import (
    GeneratorMatrix,
    NetworkError,
    Reaction,
    ReactionNetwork,
    ScaleAssignment,
    SingularWeightError,
    SplitGraph,
    WeightMatrix,
    deficiency_weights,
    floor_scale,
    generator,
    load_network,
    parse_network,
    scales,
    serialize,
    split,
    weights,
)
from .oracle import (
    AprioriBounds,
    DoeblinAverage,
    ExcursionWeight,
    FirstOrder,
    GreenTable,
    NonConvergenceError,
    OracleResult,
    ReducibilityError,
    apriori_bounds,
    adjoint_boundary_solve,
    doeblin_rho,
    excursion_weight,
    exit_probabilities,
    first_order_lambda,
    green_kernel,
    path_sum_resolvent,
    perron,
    resolvent,
    rightmost_eigenvalue,
    stationary,
)
from .renorm import (
    ClusterStats,
    CoalescenceTree,
    EffectiveGraph,
    ScaledRate,
    TreeNode,
    cluster_stats,
    collapse,
    cutoff,
    dominant_subgraph,
    effective_from_split,
    export_tree,
    maximal_dominant_sccs,
    renormalize,
    renormalized_generator,
)
from .hierarchy import (
    ComparisonReport,
    CoreCluster,
    CoreSet,
    DepthDag,
    HierEstimate,
    compare,
    cores_and_threshold,
    hier_estimates,
    leading_dag,
    path_depth,
    restrict_accessible,
)

__version__ = "0.1.0"
