"""Robust pairwise preference elicitation.

Selects comparison queries (offline batches or online one-at-a-time) that
optimize the guarantee of a downstream recommendation under polyhedral
uncertainty about the user's utility weights, with a budgeted model of
response inconsistencies.
"""

from .model import (
    ConstraintSystem,
    InfeasibleUncertaintyError,
    ItemBank,
    NoiseConfig,
    ParseError,
    PreferencePolyhedron,
    Query,
    QueryPlan,
    ResponseVector,
    UncertaintyModel,
    ValidationError,
    budget_gamma,
    is_nonempty,
    load_item_bank,
    updated_constraints,
)
from .recommend import (
    Recommendation,
    recommend_mmr,
    recommend_mmu,
    true_rank,
    worst_case_regret,
    worst_case_utility,
)
from .offline_mmu import (
    CcgOptions,
    CcgResult,
    CcgState,
    GreedyResult,
    OfflineSolution,
    WarmStartHint,
    add_symmetry_breaking,
    apply_warm_start,
    build_mmu_milp,
    ccg_mmu,
    empty_solution,
    evaluate_queries_mmu,
    evaluate_scenario,
    greedy_mmu,
    solve_offline,
    warm_start_mmu,
)
from .offline_mmr import (
    build_mmr_milp,
    ccg_mmr,
    evaluate_queries_mmr,
    greedy_mmr,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
