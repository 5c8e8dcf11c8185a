"""Offline min-max-regret query selection.

Mirror image of :mod:`prefelicit.offline_mmu`: the objective is the regret
of the recommendation against the best item in hindsight, the outer problem
minimizes, and the adversary maximizes. Each response scenario therefore
contributes one dual block per rival item (the block bounds the regret
against that rival from above), with sign-flipped duals.

The shared builders in ``offline_mmu`` carry both criteria; this module
exposes the regret-side entry points.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Optional, Sequence

from .model import ItemBank, Query, QueryPlan, UncertaintyModel, ValidationError
from .offline_mmu import (
    CcgOptions,
    CcgResult,
    GreedyResult,
    OfflineProgram,
    _build_offline_program,
    _ccg,
    _evaluate_plan,
    _greedy,
)


def build_mmr_milp(bank: ItemBank, k: int, umodel: UncertaintyModel,
                   opts: Optional[CcgOptions] = None,
                   fixed_prefix: Sequence[Query] = ()) -> OfflineProgram:
    """Exact program over all 2^k scenarios with one regret block per rival."""
    if k < 0:
        raise ValidationError("k must be >= 0")
    opts = opts or CcgOptions()
    if (2 ** k) * len(bank.rec_ids) > 8192:
        raise ValidationError(
            f"2^{k} x {len(bank.rec_ids)} regret blocks exceed the exact "
            "builder's budget; use the column-and-constraint solver instead"
        )
    scenarios = list(itertools.product((-1, 1), repeat=k))
    return _build_offline_program(bank, umodel, k, scenarios, opts, "mmr",
                                  fixed_prefix)


def evaluate_queries_mmr(plan: QueryPlan | Sequence[Query], bank: ItemBank,
                         umodel: UncertaintyModel,
                         opts: Optional[CcgOptions] = None) -> float:
    """Exact min-max-regret value of a fixed plan: the adversary picks the
    response scenario, then the best recommendation is scored at its worst
    admissible weight vector against the best rival in hindsight."""
    value, _ = _evaluate_plan(bank, umodel, list(plan), opts or CcgOptions(),
                              "mmr")
    return value


def ccg_mmr(bank: ItemBank, k: int, umodel: UncertaintyModel,
            opts: Optional[CcgOptions] = None,
            fixed_prefix: Sequence[Query] = (),
            initial_pool: Optional[Iterable] = None) -> CcgResult:
    """Column-and-constraint generation for min-max regret. Bound roles are
    reversed relative to the utility case: the scenario-pool relaxation
    yields a lower bound and the plan evaluation an upper bound; scenarios
    are added while the evaluation exceeds the relaxation."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    return _ccg(bank, k, umodel, opts or CcgOptions(), "mmr", fixed_prefix,
                initial_pool)


def greedy_mmr(bank: ItemBank, k: int, umodel: UncertaintyModel,
               opts: Optional[CcgOptions] = None) -> GreedyResult:
    """Stage-wise heuristic for min-max regret; stage values non-increasing."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    return _greedy(bank, k, umodel, opts or CcgOptions(), "mmr")
