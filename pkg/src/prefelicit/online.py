"""Online elicitation: pick queries one at a time, one-step lookahead.

Each step solves the single-query offline problem over the uncertainty set
updated with everything answered so far, under the step-k inconsistency
budget. Ties between equally valuable queries break lexicographically by
(first, second), which keeps sessions fully deterministic and replayable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

from .model import (
    InfeasibleUncertaintyError,
    ItemBank,
    NoiseConfig,
    PreferencePolyhedron,
    Query,
    UncertaintyModel,
    ValidationError,
    budget_gamma,
    is_nonempty,
)
from .offline_mmu import CcgOptions, evaluate_scenario, instance_geometry
from .recommend import Recommendation, recommend_mmr, recommend_mmu

logger = logging.getLogger("prefelicit.online")

_TIE_TOL = 1e-6
_LOOKAHEAD_OPTS = CcgOptions(delta=1e-6)


class SessionCompleted(RuntimeError):
    """Raised when an operation needs an active session."""


@dataclass(frozen=True)
class Session:
    """Immutable state of one elicitation dialogue."""

    bank: ItemBank
    base: PreferencePolyhedron
    criterion: str                 # "mmu" or "mmr"
    noise: NoiseConfig
    k_max: int
    history: tuple[tuple[Query, int], ...] = ()

    def __post_init__(self):
        if self.criterion not in ("mmu", "mmr"):
            raise ValidationError(f"unknown criterion {self.criterion!r}")
        if self.k_max < 0:
            raise ValidationError("k_max must be >= 0")
        if len(self.history) > self.k_max:
            raise ValidationError("history longer than k_max")

    @property
    def k(self) -> int:
        return len(self.history)

    @property
    def status(self) -> str:
        return "completed" if self.k >= self.k_max else "active"


@dataclass(frozen=True)
class BudgetEscalation:
    scheduled_gamma: float
    escalated_gamma: float
    doublings: int


@dataclass(frozen=True)
class QueryChoice:
    query: Query
    value: float                    # lookahead guarantee of the chosen query
    gamma: float                    # budget actually used
    escalations: tuple[BudgetEscalation, ...] = ()


def scheduled_gamma(session: Session, k: int) -> float:
    return max(0.0, budget_gamma(session.noise, k))


def session_model(session: Session, budget_queries: int,
                  ) -> tuple[UncertaintyModel, tuple[BudgetEscalation, ...]]:
    """Uncertainty model for the session history at the step budget.

    If the recorded answers are more inconsistent than the budget allows,
    the budget is doubled until the set is non-empty again; the model is
    misspecified at that point but the session must keep functioning.
    """
    gamma = scheduled_gamma(session, budget_queries)
    model = UncertaintyModel(session.base, gamma, session.history)
    if is_nonempty(model, session.bank):
        return model, ()
    geometry = instance_geometry(session.bank, model)
    saturation = max(1, len(session.history)) * geometry.max_query_gap
    current = max(gamma, saturation / 1024.0, 1e-9)
    doublings = 0
    while True:
        doublings += 1
        current *= 2.0
        candidate = model.with_gamma(current)
        if is_nonempty(candidate, session.bank):
            esc = BudgetEscalation(gamma, current, doublings)
            logger.warning(
                "inconsistent history exceeds budget %.6g; escalated to %.6g "
                "after %d doublings", gamma, current, doublings,
            )
            return candidate, (esc,)
        if current > saturation * 2.0:
            raise InfeasibleUncertaintyError(
                "inconsistent history exceeds budget and escalation failed"
            )


def choose_query(session: Session,
                 opts: Optional[CcgOptions] = None) -> QueryChoice:
    """Solve the one-query lookahead exactly by scanning the query set.

    A candidate's value is the worse of its two response scenarios; at a
    single query this is a pair of linear programs, so full enumeration is
    both exact and fast, and the first maximizer in (first, second) order
    wins ties by construction.
    """
    if session.status != "active":
        raise SessionCompleted("session already has all its answers")
    opts = opts or _LOOKAHEAD_OPTS
    model, escalations = session_model(session, session.k + 1)
    mmu = session.criterion == "mmu"
    geom = instance_geometry(session.bank, model)
    better = 1.0 if mmu else -1.0
    best_query = None
    best_value = None
    for q in sorted(session.bank.all_queries()):
        values = []
        skip = False
        for s in (1, -1):
            value = evaluate_scenario(session.bank, model, [q], (s,),
                                      session.criterion, opts, geom)
            if value is None:
                continue   # answer impossible under the prior
            values.append(value)
            if best_value is not None and \
                    better * value <= better * best_value + _TIE_TOL:
                skip = True   # cannot strictly beat the incumbent
                break
        if skip or not values:
            continue
        value = min(values) if mmu else max(values)
        if best_value is None or better * value > better * best_value + _TIE_TOL:
            best_query, best_value = q, value
    return QueryChoice(best_query, best_value, model.gamma, escalations)


def next_query(session: Session) -> Query:
    """The query to ask now; deterministic in the session state."""
    return choose_query(session).query


def record_response(session: Session, s: int,
                    query: Optional[Query] = None) -> Session:
    """Append the answer to the pending query and advance the session.

    ``query`` short-circuits recomputation when the caller already holds the
    pending query; it must be the value of :func:`next_query`.
    """
    if s not in (-1, 1):
        raise ValidationError("response must be -1 or +1")
    if session.status != "active":
        raise SessionCompleted("response submitted to a completed session")
    pending = query if query is not None else next_query(session)
    return replace(session, history=session.history + ((pending, int(s)),))


def current_recommendation(session: Session) -> Recommendation:
    """Best recommendation given everything answered so far (valid
    mid-session too), under the step-k budget."""
    model, _ = session_model(session, session.k)
    recommend = recommend_mmu if session.criterion == "mmu" else recommend_mmr
    return recommend(session.bank, model)
