"""Synthetic experiment harness.

Draws simulated users, generates (possibly noisy) answers to queries, runs
the offline and online elicitation strategies against a random-elicitation
baseline, and reports normalized guarantees plus ground-truth metrics.

Guarantees are rescaled between the no-information and full-information
benchmarks: for worst-case utility 0 means "no better than asking nothing"
and 1 means "as good as knowing the weights"; for worst-case regret the
orientation flips, 1 meaning no information and 0 full information.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import solver
from .model import (
    ItemBank,
    NoiseConfig,
    PreferencePolyhedron,
    Query,
    QueryPlan,
    UncertaintyModel,
    ValidationError,
    budget_gamma,
    contains_weight,
)
from .offline_mmu import (
    CcgOptions,
    build_mmu_milp,
    ccg_mmu,
    evaluate_queries_mmu,
    greedy_mmu,
    solve_offline,
)
from .offline_mmr import (
    build_mmr_milp,
    ccg_mmr,
    evaluate_queries_mmr,
    greedy_mmr,
)
from .online import Session, choose_query, current_recommendation, record_response
from .recommend import recommend_mmr, recommend_mmu, true_rank

logger = logging.getLogger("prefelicit.simulate")

CSV_COLUMNS = ["method", "criterion", "K", "sigma_true", "sigma_assumed",
               "agent_seed", "guarantee", "normalized", "true_rank",
               "true_regret", "wall_ms"]


@dataclass(frozen=True)
class SimAgent:
    """A simulated user: unit-norm weight vector plus its seed."""

    u: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))


@dataclass
class MetricRow:
    method: str
    criterion: str
    k: int
    sigma_true: float
    sigma_assumed: float
    agent_seed: Optional[int]
    guarantee: float
    normalized: float
    true_rank: Optional[int] = None
    true_regret: Optional[float] = None
    wall_ms: float = 0.0

    def as_record(self) -> dict:
        return {
            "method": self.method,
            "criterion": self.criterion,
            "K": self.k,
            "sigma_true": self.sigma_true,
            "sigma_assumed": self.sigma_assumed,
            "agent_seed": "" if self.agent_seed is None else self.agent_seed,
            "guarantee": self.guarantee,
            "normalized": self.normalized,
            "true_rank": "" if self.true_rank is None else self.true_rank,
            "true_regret": "" if self.true_regret is None else self.true_regret,
            "wall_ms": round(self.wall_ms, 3),
        }


def sample_agent(num_attributes: int, rng: np.random.Generator,
                 seed: int = 0) -> SimAgent:
    """Weight vector drawn uniformly from the unit sphere."""
    if num_attributes < 1:
        raise ValidationError("need at least one attribute")
    g = rng.standard_normal(num_attributes)
    return SimAgent(g / np.linalg.norm(g), seed)


def simulate_response(agent: SimAgent, query: Query, bank: ItemBank,
                      sigma: float, rng: np.random.Generator) -> int:
    """Answer with a normal shock of scale sigma on the utility difference;
    an exact zero argument counts as preferring the first item."""
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    diff = float(agent.u @ bank.query_diff(query))
    shock = float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0
    return 1 if diff + shock >= 0 else -1


def normalize(value: float, v0: float, vfull: float, criterion: str) -> float:
    """Rescale a guarantee between the no-query value v0 and the
    full-information value vfull."""
    if criterion == "mmu":
        if abs(vfull - v0) < 1e-12:
            logger.warning("full-information equals no-query value; "
                           "queries cannot help this instance")
            return 1.0
        return (value - v0) / (vfull - v0)
    if criterion == "mmr":
        if abs(v0 - vfull) < 1e-12:
            logger.warning("no-query regret already zero; nothing to gain")
            return 0.0
        return (value - vfull) / (v0 - vfull)
    raise ValidationError(f"unknown criterion {criterion!r}")


@dataclass(frozen=True)
class Benchmarks:
    v0: float       # guarantee of the no-query recommendation
    vfull: float    # full-information guarantee

    def normalized(self, value: float, criterion: str) -> float:
        return normalize(value, self.v0, self.vfull, criterion)


def full_information_value(bank: ItemBank, base: PreferencePolyhedron) -> float:
    """min over admissible weights of the best achievable utility, i.e. the
    value of recommending with full knowledge, at its worst weight vector."""
    m = solver.LinearModel("full_information", sense="min")
    J = bank.num_attributes
    u = [m.add_var(f"u{j}") for j in range(J)]
    t = m.add_var("t", obj=1.0)
    for row, rhs in zip(base.B, base.b):
        m.add_constr([(u[j], float(row[j])) for j in range(J) if row[j]],
                     ">=", float(rhs))
    for r in sorted(bank.rec_ids):
        x = bank.vector(r)
        m.add_constr([(t, 1.0)] + [(u[j], -float(x[j]))
                                   for j in range(J) if x[j]], ">=", 0.0)
    out = m.solve()
    if out.status is not solver.Status.OPTIMAL:
        raise RuntimeError(f"full-information LP failed: {out.status.value}")
    return float(out.objective)


def benchmarks(bank: ItemBank, base: PreferencePolyhedron,
               criterion: str) -> Benchmarks:
    model = UncertaintyModel(base)
    if criterion == "mmu":
        return Benchmarks(recommend_mmu(bank, model).guarantee,
                          full_information_value(bank, base))
    if criterion == "mmr":
        return Benchmarks(recommend_mmr(bank, model).guarantee, 0.0)
    raise ValidationError(f"unknown criterion {criterion!r}")


def random_plan(bank: ItemBank, k: int, rng: np.random.Generator) -> QueryPlan:
    """k distinct queries drawn uniformly, sorted for evaluation."""
    pool = bank.all_queries()
    if k > len(pool):
        raise ValidationError(f"cannot draw {k} distinct queries from "
                              f"{len(pool)}")
    picks = rng.choice(len(pool), size=k, replace=False)
    chosen = sorted(pool[int(t)] for t in picks)
    return QueryPlan(tuple(chosen))


# ---------------------------------------------------------------------------
# offline experiment
# ---------------------------------------------------------------------------


@dataclass
class OfflineExperimentConfig:
    bank: ItemBank
    base: PreferencePolyhedron
    criterion: str = "mmu"
    k_values: Sequence[int] = (1, 2, 3)
    noise: NoiseConfig = NoiseConfig(0.0, 0.9)
    rand_draws: int = 50
    seed: int = 0
    method: str = "greedy"          # greedy | ccg | milp
    opts: CcgOptions = field(default_factory=CcgOptions)


def _solve_offline_plan(config: OfflineExperimentConfig, k: int,
                        umodel: UncertaintyModel) -> tuple[QueryPlan, float]:
    mmu = config.criterion == "mmu"
    if config.method == "greedy":
        res = (greedy_mmu if mmu else greedy_mmr)(config.bank, k, umodel,
                                                  config.opts)
        return res.plan, res.values[-1]
    if config.method == "ccg":
        res = (ccg_mmu if mmu else ccg_mmr)(config.bank, k, umodel, config.opts)
        return res.plan, res.value
    if config.method == "milp":
        build = build_mmu_milp if mmu else build_mmr_milp
        sol = solve_offline(build(config.bank, k, umodel, config.opts))
        return sol.plan, sol.value
    raise ValidationError(f"unknown method {config.method!r}")


def run_offline_experiment(config: OfflineExperimentConfig) -> list[MetricRow]:
    """Optimal (or greedy) plan value per K, next to a random-plan baseline
    distribution, all normalized against the same benchmarks."""
    bank, base = config.bank, config.base
    criterion = config.criterion
    evaluate = evaluate_queries_mmu if criterion == "mmu" else evaluate_queries_mmr
    marks = benchmarks(bank, base, criterion)
    rows: list[MetricRow] = []
    sigma = config.noise.sigma
    for k in config.k_values:
        gamma = budget_gamma(config.noise, k)
        umodel = UncertaintyModel(base, gamma)
        if k == 0:
            rows.append(MetricRow(config.method, criterion, 0, sigma, sigma,
                                  None, marks.v0,
                                  marks.normalized(marks.v0, criterion)))
            continue
        start = time.perf_counter()
        try:
            plan, value = _solve_offline_plan(config, k, umodel)
            rows.append(MetricRow(
                config.method, criterion, k, sigma, sigma, None, value,
                marks.normalized(value, criterion),
                wall_ms=1e3 * (time.perf_counter() - start),
            ))
        except Exception as exc:           # record the gap, keep going
            logger.warning("offline solve failed at K=%d: %s", k, exc)
        for draw in range(config.rand_draws):
            rng = np.random.default_rng([config.seed, k, draw])
            start = time.perf_counter()
            try:
                plan = random_plan(bank, k, rng)
                value = evaluate(plan, bank, umodel, config.opts)
                rows.append(MetricRow(
                    "rand", criterion, k, sigma, sigma, draw, value,
                    marks.normalized(value, criterion),
                    wall_ms=1e3 * (time.perf_counter() - start),
                ))
            except Exception as exc:
                logger.warning("rand draw %d failed at K=%d: %s",
                               draw, k, exc)
    return rows


# ---------------------------------------------------------------------------
# online experiment
# ---------------------------------------------------------------------------


@dataclass
class OnlineExperimentConfig:
    bank: ItemBank
    base: PreferencePolyhedron
    criterion: str = "mmu"
    agents: int = 50
    k_max: int = 10
    sigma_true: float = 0.0
    sigma_assumed: Optional[float] = None    # defaults to sigma_true
    confidence: float = 0.9
    seed: int = 0
    methods: Sequence[str] = ("lookahead", "rand")
    per_agent_full_info: bool = False
    agent_indices: Optional[Sequence[int]] = None   # overrides range(agents)

    def assumed(self) -> float:
        return self.sigma_true if self.sigma_assumed is None else self.sigma_assumed

    def indices(self) -> Sequence[int]:
        return (range(self.agents) if self.agent_indices is None
                else self.agent_indices)


@dataclass
class OnlineExperimentResult:
    rows: list[MetricRow]
    escalations: int = 0
    final_sets_contain_truth: Optional[bool] = None


def _true_metrics(bank: ItemBank, agent: SimAgent, rec_item: int,
                  ) -> tuple[int, float]:
    utilities = {r: float(agent.u @ bank.vector(r)) for r in bank.rec_ids}
    best = max(utilities.values())
    return true_rank(rec_item, agent.u, bank), best - utilities[rec_item]


def run_online_experiment(config: OnlineExperimentConfig,
                          ) -> OnlineExperimentResult:
    """Simulate online sessions per agent and method, recording the
    guaranteed and ground-truth quality after every answer."""
    bank, base = config.bank, config.base
    criterion = config.criterion
    marks = benchmarks(bank, base, criterion)
    noise = NoiseConfig(config.assumed(), config.confidence)
    result = OnlineExperimentResult(rows=[])
    truth_ok = True
    checked_any = False
    for i in config.indices():
        agent_rng = np.random.default_rng([config.seed, i, 0])
        agent = sample_agent(bank.num_attributes, agent_rng, seed=i)
        if config.per_agent_full_info:
            best = max(float(agent.u @ bank.vector(r)) for r in bank.rec_ids)
            marks_i = Benchmarks(marks.v0, best if criterion == "mmu" else 0.0)
        else:
            marks_i = marks
        for method in config.methods:
            response_rng = np.random.default_rng([config.seed, i, 1])
            query_rng = np.random.default_rng([config.seed, i, 2])
            session = Session(bank, base, criterion, noise, config.k_max)
            asked: set[Query] = set()
            while session.status == "active":
                start = time.perf_counter()
                if method == "lookahead":
                    choice = choose_query(session)
                    query = choice.query
                    result.escalations += len(choice.escalations)
                elif method == "rand":
                    pool = [q for q in bank.all_queries() if q not in asked]
                    if not pool:
                        pool = bank.all_queries()
                    query = pool[int(query_rng.integers(len(pool)))]
                else:
                    raise ValidationError(f"unknown method {method!r}")
                asked.add(query)
                answer = simulate_response(agent, query, bank,
                                           config.sigma_true, response_rng)
                session = record_response(session, answer, query=query)
                rec = current_recommendation(session)
                rank, regret = _true_metrics(bank, agent, rec.item)
                result.rows.append(MetricRow(
                    method, criterion, session.k, config.sigma_true,
                    config.assumed(), i, rec.guarantee,
                    marks_i.normalized(rec.guarantee, criterion),
                    true_rank=rank, true_regret=regret,
                    wall_ms=1e3 * (time.perf_counter() - start),
                ))
            if (method == "lookahead" and config.sigma_true == 0.0
                    and base.contains(agent.u)):
                # exact answers can never expel an admissible agent
                from .online import session_model

                checked_any = True
                final_model, _ = session_model(session, session.k)
                truth_ok &= contains_weight(final_model, bank, agent.u)
    if config.sigma_true == 0.0 and "lookahead" in config.methods:
        result.final_sets_contain_truth = truth_ok if checked_any else None
    return result


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def write_csv(rows: Iterable[MetricRow], stream: io.TextIOBase) -> None:
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_record())


def summary_table(rows: Sequence[MetricRow]) -> str:
    """Mean normalized guarantee per (method, K), versus the rand baseline."""
    if not rows:
        return "(no rows)"
    keys = sorted({(r.method, r.k) for r in rows})
    lines = [f"{'method':<12} {'K':>3} {'rows':>5} {'mean norm':>10} "
             f"{'worst norm':>11} {'mean rank':>10}"]
    for method, k in keys:
        sel = [r for r in rows if r.method == method and r.k == k]
        norm = np.array([r.normalized for r in sel], dtype=float)
        ranks = [r.true_rank for r in sel if r.true_rank is not None]
        crit = sel[0].criterion
        worst = norm.min() if crit == "mmu" else norm.max()
        rank_txt = f"{np.mean(ranks):10.2f}" if ranks else " " * 10
        lines.append(f"{method:<12} {k:>3} {len(sel):>5} {norm.mean():>10.4f} "
                     f"{worst:>11.4f} {rank_txt}")
    return "\n".join(lines)
