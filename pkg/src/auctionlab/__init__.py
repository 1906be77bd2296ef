"""Desk-scale laboratory for single-bid, grand-bundle, and hybrid
combinatorial auctions over hypergraph valuations with complements."""

from .items import ItemSet
from .valuations import (
    Hyperedge,
    HypergraphValuation,
    MaxValuation,
    Valuation,
    StructureReport,
    check_structure,
    demand_select,
    load_valuation,
    save_valuation,
    validate_hypergraph,
    valuation_from_dict,
    valuation_to_dict,
)
from .hierarchy import (
    ClassLabel,
    DchResult,
    classify,
    dep_plus,
    harmonic,
    is_d_ch,
    is_mps_d,
    is_ps_d,
    ph_rank,
    supermodular_degree,
)
from .edge_coloring import EdgeColoring, vizing_color
from .approximation import (
    ApproxCertificate,
    ApproxFailure,
    Partition,
    best_kch_search,
    build_block_homogeneous,
    crossing_weight,
    greedy_partition,
    pair_by_coloring,
    ph2_pairing,
    pointwise_approx,
)
from .mechanisms import (
    HybridOutcome,
    Outcome,
    TieRule,
    item_prices,
    run_grand_bundle,
    run_hybrid,
    run_single_bid,
)
from .optimizer import (
    LopsidedResult,
    brute_force_optimum,
    enumerate_optimal_allocations,
    lopsided_check,
    optimal_allocation,
    social_welfare,
)
from .learning import (
    BidGrid,
    BrdResult,
    PlayHistory,
    audit_grid,
    best_response_dynamics,
    counterfactual_utilities,
    export_history_csv,
    export_history_summary,
    find_pure_equilibria,
    history_summary,
    make_grid,
    no_regret_run,
    poa_estimate,
    regret_of,
    replay_utility,
    verify_hybrid_equilibrium,
    verify_pure_equilibrium,
)
from .smoothness import (
    DeviationDistribution,
    SmoothnessReport,
    expected_deviation_utility,
    hybrid_smoothness_check,
    make_deviation,
    plan_dch_single_bid,
    plan_grand_bundle,
    plan_mps_single_bid,
    plan_small_bundles,
    quadrature_deviation_utility,
    smoothness_check,
)
from .instances import (
    InstanceBundle,
    InstanceMeta,
    RandomGraphReport,
    complete_hypergraph_instance,
    hybrid_lb_instance,
    layered_star_instance,
    load_agents,
    make_instance,
    random_graph_valuation,
    random_hypergraph,
    random_mps_d,
    random_ps_d,
    sm_star_instance,
    star_instance,
    tight_partition_instance,
)
from .harness import (
    ExperimentConfig,
    ResultRecord,
    parse_config,
    run_experiment,
    write_results,
)

__version__ = "0.1.0"
