"""Robust recommendations over a finite recommendation set.

Two criteria: maximize worst-case utility (mmu) or minimize worst-case
absolute regret (mmr), both over the current uncertainty set. The inner
problems are linear programs over (u, eps); regret maximization is solved
as one LP per rival rather than a single integer program, which is exact
for finite recommendation sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import solver
from .model import (
    ConstraintSystem,
    InfeasibleUncertaintyError,
    ItemBank,
    UncertaintyModel,
    ValidationError,
    updated_constraints,
)

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class Recommendation:
    item: int           # 1-based index into the bank
    item_id: str
    guarantee: float    # worst-case utility (mmu) / worst-case regret (mmr)
    criterion: str      # "mmu" or "mmr"


def _uncertainty_lp(system: ConstraintSystem, objective: np.ndarray,
                    sense: str) -> float:
    """Optimize a linear function of u over the updated uncertainty set."""
    m = solver.LinearModel("uncertainty_inner", sense=sense)
    z = [m.add_var(f"z{t}") for t in range(system.dim)]
    for j in range(system.num_u):
        m.set_objective_coef(z[j], float(objective[j]))
    for row, rhs in zip(system.A, system.rhs):
        m.add_constr([(z[t], row[t]) for t in range(system.dim) if row[t] != 0.0],
                     ">=", rhs)
    out = m.solve()
    if out.status is solver.Status.INFEASIBLE:
        raise InfeasibleUncertaintyError("infeasible uncertainty")
    if out.status is not solver.Status.OPTIMAL:
        raise RuntimeError(f"inner LP failed: {out.status.value} {out.message}")
    return out.objective


def worst_case_utility(x: np.ndarray, model: UncertaintyModel,
                       bank: ItemBank) -> float:
    """min u.x over the updated uncertainty set."""
    system = updated_constraints(model, bank)
    return _uncertainty_lp(system, np.asarray(x, dtype=float), "min")


def worst_case_regret(x: np.ndarray, bank: ItemBank,
                      model: UncertaintyModel) -> float:
    """max over rivals x' in R of max u.(x' - x) over the uncertainty set."""
    system = updated_constraints(model, bank)
    x = np.asarray(x, dtype=float)
    best = None
    for r in sorted(bank.rec_ids):
        diff = bank.vector(r) - x
        if not np.any(diff):
            value = 0.0
        else:
            value = _uncertainty_lp(system, diff, "max")
        if best is None or value > best:
            best = value
    return best


def recommend_mmu(bank: ItemBank, model: UncertaintyModel) -> Recommendation:
    """Item of the recommendation set with the best worst-case utility.

    Ties are broken toward the lowest item index.
    """
    best_idx = None
    best_val = None
    for r in sorted(bank.rec_ids):
        value = worst_case_utility(bank.vector(r), model, bank)
        if best_val is None or value > best_val + _TIE_TOL:
            best_idx, best_val = r, value
    return Recommendation(best_idx, bank.ids[best_idx - 1], best_val, "mmu")


def recommend_mmr(bank: ItemBank, model: UncertaintyModel) -> Recommendation:
    """Item of the recommendation set with the least worst-case regret."""
    best_idx = None
    best_val = None
    for r in sorted(bank.rec_ids):
        value = worst_case_regret(bank.vector(r), bank, model)
        if best_val is None or value < best_val - _TIE_TOL:
            best_idx, best_val = r, value
    return Recommendation(best_idx, bank.ids[best_idx - 1], best_val, "mmr")


def true_rank(item: int, u: np.ndarray, bank: ItemBank) -> int:
    """1 + number of recommendable items strictly preferred to ``item``
    under the weight vector ``u``. Utility ties do not increase the rank."""
    if item not in bank.rec_ids:
        raise ValidationError(f"item {item} is not in the recommendation set")
    u = np.asarray(u, dtype=float)
    mine = float(u @ bank.vector(item))
    better = sum(
        1 for r in bank.rec_ids if float(u @ bank.vector(r)) > mine + 1e-12
    )
    return 1 + better
