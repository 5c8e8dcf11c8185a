"""Offline max-min-utility query selection.

The offline problem picks K comparison queries before any answer is seen,
anticipating adversarial responses, so that the final worst-case-utility
recommendation is as good as possible. Three solution paths are provided:

* an exact mixed-binary program over all 2^K response scenarios
  (:func:`build_mmu_milp`),
* a column-and-constraint generation loop that grows the scenario pool on
  demand (:func:`ccg_mmu`),
* a stage-wise greedy heuristic that fixes earlier queries
  (:func:`greedy_mmu`).

Each response scenario contributes a dual block: by LP duality the inner
worst-case utility of a recommendation equals max b.beta + Gamma*mu subject
to a dual balance constraint, so the scenario's guarantee becomes a set of
linear rows. Products between the duals and the binary query selectors are
linearized with bounded dual variables.

All builders accept an :class:`~prefelicit.model.UncertaintyModel`, so
already-observed responses (whose answers are data, not scenario
coordinates) enter the same dual blocks with constant coefficients. This is
what the online one-step lookahead relies on.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from . import solver
from .model import (
    ItemBank,
    Query,
    QueryPlan,
    UncertaintyModel,
    ValidationError,
)
from .recommend import recommend_mmr, recommend_mmu

logger = logging.getLogger("prefelicit.ccg")

Scenario = tuple[int, ...]


@dataclass(frozen=True)
class CcgOptions:
    """Tuning knobs shared by the exact and decomposed solvers."""

    delta: float = 1e-3            # optimality tolerance of the CCG loop
    max_iterations: int = 1000
    big_m: Optional[float] = None  # response-toggling constant; None = auto
    dual_bound: Optional[float] = None   # bound on duals and linearization M;
                                         # None sizes it from the instance
    use_symmetry: bool = True
    time_limit: Optional[float] = None
    mip_rel_gap: float = 1e-6      # relative gap handed to branch-and-bound

    def controls(self) -> solver.SolverControls:
        return solver.SolverControls(time_limit=self.time_limit,
                                     mip_rel_gap=self.mip_rel_gap)

    def resolved_dual_bound(self, geom: "InstanceGeometry") -> float:
        # a tight bound keeps the linearization relaxations strong; the
        # escalation guard in _solve_program catches instances that need more
        if self.dual_bound is not None:
            return self.dual_bound
        return max(100.0, 20.0 * geom.max_abs_value)

    def __post_init__(self):
        if self.delta <= 0:
            raise ValidationError("delta must be > 0")
        if self.big_m is not None and self.big_m <= 0:
            raise ValidationError("big_m must be > 0")
        if self.dual_bound is not None and self.dual_bound <= 0:
            raise ValidationError("dual_bound must be > 0")


@dataclass(frozen=True)
class InstanceGeometry:
    """Bounds derived from the prior polyhedron's bounding box, used to size
    big-M constants and to cap the epigraph variable."""

    box_lo: np.ndarray
    box_hi: np.ndarray
    max_query_gap: float   # bound on |u.(x^i - x^i')| over query pairs
    max_abs_value: float   # bound on |u.x| over recommendable items


def _interval_dot(lo: np.ndarray, hi: np.ndarray, vec: np.ndarray) -> tuple[float, float]:
    low = float(np.minimum(lo * vec, hi * vec).sum())
    high = float(np.maximum(lo * vec, hi * vec).sum())
    return low, high


def instance_geometry(bank: ItemBank, umodel: UncertaintyModel) -> InstanceGeometry:
    lo, hi = umodel.base.bounding_box()
    gap = 0.0
    qids = sorted(bank.query_ids)
    for a, b in itertools.combinations(qids, 2):
        dlo, dhi = _interval_dot(lo, hi, bank.vector(a) - bank.vector(b))
        gap = max(gap, abs(dlo), abs(dhi))
    value = 0.0
    for r in bank.rec_ids:
        vlo, vhi = _interval_dot(lo, hi, bank.vector(r))
        value = max(value, abs(vlo), abs(vhi))
    return InstanceGeometry(lo, hi, gap, value)


# ---------------------------------------------------------------------------
# query encoding and lexicographic machinery
# ---------------------------------------------------------------------------


def membership_vector(query: Query, item_ids: Sequence[int]) -> tuple[int, ...]:
    """0/1 vector over the query set marking the two compared items."""
    vec = [0] * len(item_ids)
    vec[item_ids.index(query.first)] = 1
    vec[item_ids.index(query.second)] = 1
    return tuple(vec)


def lex_sort_queries(queries: Sequence[Query], item_ids: Sequence[int],
                     ) -> tuple[list[Query], list[int]]:
    """Sort queries by their membership vectors (ascending); also return the
    permutation: position j of the output held input index perm[j]."""
    order = sorted(range(len(queries)),
                   key=lambda t: membership_vector(queries[t], item_ids))
    return [queries[t] for t in order], order


@dataclass
class QueryEncoding:
    """Binary selectors of the free queries inside an offline program.

    ``v[k][t]`` / ``w[k][t]`` are the variable ids marking item
    ``item_ids[t]`` as the first/second item of free query k. Fixed-prefix
    queries are recorded as data; they own scenario coordinates but no
    binaries.
    """

    item_ids: list[int]
    fixed_prefix: tuple[Query, ...]
    v: list[list[int]] = field(default_factory=list)
    w: list[list[int]] = field(default_factory=list)
    y: list[list[int]] = field(default_factory=list)   # filled by symmetry rows

    @property
    def num_free(self) -> int:
        return len(self.v)

    @property
    def k_total(self) -> int:
        return len(self.fixed_prefix) + self.num_free


# ---------------------------------------------------------------------------
# offline program builder (shared by the mmu and mmr criteria)
# ---------------------------------------------------------------------------


@dataclass
class OfflineProgram:
    """A built scenario-based offline program plus its decoding metadata."""

    model: solver.LinearModel
    encoding: QueryEncoding
    criterion: str                     # "mmu" or "mmr"
    tau: int
    scenarios: list[Scenario]
    rec_vars: dict[Scenario, dict[int, int]]
    block_vars: dict[tuple, dict[str, list[int]]]
    geometry: InstanceGeometry
    opts: CcgOptions
    bank: ItemBank
    umodel: UncertaintyModel
    unbounded_threshold: float
    dual_bound: float = 1e4
    convex_recommendations: bool = False

    def extract_plan(self, outcome: solver.SolveOutcome) -> QueryPlan:
        """Decode the selected queries; duplicate picks (possible only
        without symmetry rows, and only among equally-good solutions) are
        repaired with unused queries."""
        queries = list(self.encoding.fixed_prefix)
        ids = self.encoding.item_ids
        for k in range(self.encoding.num_free):
            v_vals = solver.extract(outcome, self.encoding.v[k])
            w_vals = solver.extract(outcome, self.encoding.w[k])
            first = ids[v_vals.index(1)]
            second = ids[w_vals.index(1)]
            queries.append(Query(first, second))
        if len(set(queries)) != len(queries):
            queries = self._repair_duplicates(queries)
        return QueryPlan(tuple(queries))

    def _repair_duplicates(self, queries: list[Query]) -> list[Query]:
        pool = [q for q in self.bank.all_queries() if q not in set(queries)]
        pool.sort(key=lambda q: membership_vector(q, self.encoding.item_ids))
        seen: set[Query] = set()
        fixed = []
        for q in queries:
            if q in seen:
                q = pool.pop(0)
            seen.add(q)
            fixed.append(q)
        return fixed

    def extract_recommendations(self, outcome: solver.SolveOutcome,
                                ) -> dict[Scenario, int]:
        recs = {}
        for s, sel in self.rec_vars.items():
            for r, var in sel.items():
                if solver.extract(outcome, var) == 1:
                    recs[s] = r
                    break
        return recs

    def hint_assignment(self, plan: Sequence[Query],
                        rec_by_scenario: dict[Scenario, int]) -> dict[int, int]:
        """Translate an abstract warm start into a binary assignment."""
        free = list(plan)[len(self.encoding.fixed_prefix):]
        if len(free) != self.encoding.num_free:
            raise ValidationError("hint plan length does not match the program")
        ids = self.encoding.item_ids
        assignment: dict[int, int] = {}
        for k, q in enumerate(free):
            for t in range(len(ids)):
                assignment[self.encoding.v[k][t]] = int(ids[t] == q.first)
                assignment[self.encoding.w[k][t]] = int(ids[t] == q.second)
        for s, sel in self.rec_vars.items():
            rec = rec_by_scenario[s]
            for r, var in sel.items():
                assignment[var] = int(r == rec)
        return assignment


def _build_offline_program(bank: ItemBank, umodel: UncertaintyModel,
                           k: int, scenarios: Sequence[Scenario],
                           opts: CcgOptions, criterion: str,
                           fixed_prefix: Sequence[Query] = (),
                           geometry: Optional[InstanceGeometry] = None,
                           convex_recommendations: bool = False,
                           ) -> OfflineProgram:
    if criterion not in ("mmu", "mmr"):
        raise ValidationError(f"unknown criterion {criterion!r}")
    mmu = criterion == "mmu"
    prefix = tuple(fixed_prefix)
    if len(prefix) > k:
        raise ValidationError("fixed prefix longer than the plan")
    for q in prefix:
        if q.first not in bank.query_ids or q.second not in bank.query_ids:
            raise ValidationError(f"prefix query {q} uses non-query items")
    n_free = k - len(prefix)
    geom = geometry or instance_geometry(bank, umodel)
    cap = geom.max_abs_value + 1.0
    qids = sorted(bank.query_ids)
    rids = sorted(bank.rec_ids)

    m = solver.LinearModel(f"offline_{criterion}_k{k}",
                           sense="max" if mmu else "min",
                           controls=opts.controls())
    if mmu:
        tau = m.add_var("tau", -cap, cap, obj=1.0)
        unbounded_threshold = geom.max_abs_value + 0.5
    else:
        tau = m.add_var("tau", -1.0, 2.0 * geom.max_abs_value + 1.0, obj=1.0)
        unbounded_threshold = -0.5

    encoding = QueryEncoding(item_ids=list(qids), fixed_prefix=prefix)
    for kf in range(n_free):
        v = [m.add_binary(f"v{kf}_{i}") for i in qids]
        w = [m.add_binary(f"w{kf}_{i}") for i in qids]
        encoding.v.append(v)
        encoding.w.append(w)
        m.add_constr([(x, 1.0) for x in v], "==", 1.0)
        m.add_constr([(x, 1.0) for x in w], "==", 1.0)
        # first item must precede the second: w_t = 0 at or below v's pick
        for t in range(len(qids)):
            terms = [(v[tt], 1.0) for tt in range(t, len(qids))]
            terms.append((w[t], 1.0))
            m.add_constr(terms, "<=", 1.0)

    dual_bound = opts.resolved_dual_bound(geom)
    rec_vars: dict[Scenario, dict[int, int]] = {}
    block_vars: dict[tuple, dict[str, list[int]]] = {}
    scenarios = [tuple(s) for s in scenarios]
    for s in scenarios:
        if len(s) != k:
            raise ValidationError(f"scenario {s} has length != {k}")
        if convex_recommendations:
            sel = {r: m.add_var(f"rec_{s}_{r}", 0.0, 1.0) for r in rids}
        else:
            sel = {r: m.add_binary(f"rec_{s}_{r}") for r in rids}
        rec_vars[s] = sel
        m.add_constr([(var, 1.0) for var in sel.values()], "==", 1.0)
        rivals = [None] if mmu else rids
        for rival in rivals:
            _add_dual_block(m, bank, umodel, encoding, s, sel, rival,
                            tau, dual_bound, geom, criterion, block_vars)

    _add_pair_rows(m, encoding, lex=opts.use_symmetry)

    return OfflineProgram(m, encoding, criterion, tau, scenarios, rec_vars,
                          block_vars, geom, opts, bank, umodel,
                          unbounded_threshold, dual_bound=dual_bound,
                          convex_recommendations=convex_recommendations)


def _add_dual_block(m: solver.LinearModel, bank: ItemBank,
                    umodel: UncertaintyModel, encoding: QueryEncoding,
                    s: Scenario, rec_sel: dict[int, int], rival: Optional[int],
                    tau: int, dual_bound: float, geom: InstanceGeometry,
                    criterion: str,
                    block_vars: dict[tuple, dict[str, list[int]]]) -> None:
    """One dual block: for mmu the worst-case utility of the scenario's
    recommendation, for mmr the worst-case regret against one rival."""
    mmu = criterion == "mmu"
    D = dual_bound
    qids = encoding.item_ids
    J = bank.num_attributes
    B, b = umodel.base.B, umodel.base.b
    gamma = umodel.gamma
    history = umodel.history
    H = len(history)
    k = encoding.k_total
    n_free = encoding.num_free
    n_prefix = len(encoding.fixed_prefix)
    tag = (s,) if mmu else (s, rival)
    label = f"{s}" if mmu else f"{s}_{rival}"

    if mmu:
        alpha = [m.add_var(f"a_{label}_{t}", 0.0, D) for t in range(H + k)]
        beta = [m.add_var(f"b_{label}_{r}", 0.0, D) for r in range(B.shape[0])]
        mu = m.add_var(f"mu_{label}", -D, 0.0) if (H + k) else None
    else:
        alpha = [m.add_var(f"a_{label}_{t}", -D, 0.0) for t in range(H + k)]
        beta = [m.add_var(f"b_{label}_{r}", -D, 0.0) for r in range(B.shape[0])]
        mu = m.add_var(f"mu_{label}", 0.0, D) if (H + k) else None

    # epigraph: tau <= b.beta + gamma*mu for mmu, >= for mmr
    terms = [(tau, 1.0)]
    terms += [(beta[r], -float(b[r])) for r in range(B.shape[0])]
    if mu is not None:
        terms.append((mu, -gamma))
    m.add_constr(terms, "<=" if mmu else ">=", 0.0)

    # dual feasibility in the eps coordinates: alpha + mu<=0 / >=0
    if mu is not None:
        for a in alpha:
            m.add_constr([(a, 1.0), (mu, 1.0)], "<=" if mmu else ">=", 0.0)

    # linearized products vbar_i = alpha * v_i for the free queries of this
    # block: because sum_i v_i = 1, conserving the total mass
    # (sum_i vbar_i = alpha) plus vbar_i <= D v_i is exact for binary v and
    # gives a far tighter relaxation than per-coordinate big-M rows
    vbar: list[list[int]] = []
    wbar: list[list[int]] = []
    for kf in range(n_free):
        a_var = alpha[H + n_prefix + kf]
        if mmu:
            vb = [m.add_var(f"vb_{label}_{kf}_{i}", 0.0, D) for i in qids]
            wb = [m.add_var(f"wb_{label}_{kf}_{i}", 0.0, D) for i in qids]
        else:
            vb = [m.add_var(f"vb_{label}_{kf}_{i}", -D, 0.0) for i in qids]
            wb = [m.add_var(f"wb_{label}_{kf}_{i}", -D, 0.0) for i in qids]
        for bars, sels in ((vb, encoding.v[kf]), (wb, encoding.w[kf])):
            m.add_constr([(bar, 1.0) for bar in bars] + [(a_var, -1.0)],
                         "==", 0.0)
            for bar, sel in zip(bars, sels):
                if mmu:
                    m.add_constr([(bar, 1.0), (sel, -D)], "<=", 0.0)
                else:
                    m.add_constr([(bar, 1.0), (sel, D)], ">=", 0.0)
        vbar.append(vb)
        wbar.append(wb)

    # dual balance, one row per attribute
    for j in range(J):
        terms = []
        for h, (q, resp) in enumerate(history):
            coef = float(resp * bank.query_diff(q)[j])
            if coef:
                terms.append((alpha[h], coef))
        for p, q in enumerate(encoding.fixed_prefix):
            coef = float(s[p] * bank.query_diff(q)[j])
            if coef:
                terms.append((alpha[H + p], coef))
        for kf in range(n_free):
            sk = float(s[n_prefix + kf])
            for t, i in enumerate(qids):
                coef = sk * float(bank.vector(i)[j])
                if coef:
                    terms.append((vbar[kf][t], coef))
                    terms.append((wbar[kf][t], -coef))
        for r in range(B.shape[0]):
            if B[r, j]:
                terms.append((beta[r], float(B[r, j])))
        rhs = 0.0
        if mmu:
            # = x^s, with x^s the selected recommendation
            for rid, var in rec_sel.items():
                terms.append((var, -float(bank.vector(rid)[j])))
        else:
            # = x' - x^s
            rhs = float(bank.vector(rival)[j])
            for rid, var in rec_sel.items():
                terms.append((var, float(bank.vector(rid)[j])))
        m.add_constr(terms, "==", rhs)

    block_vars[tag] = {
        "alpha": alpha,
        "beta": beta,
        "mu": [mu] if mu is not None else [],
    }


def _add_pair_rows(m: solver.LinearModel, encoding: QueryEncoding,
                   lex: bool) -> solver.LinearModel:
    """Pairwise query rows: always forbid repeating any query of the plan
    (repeats are outside the plan space; see QueryPlan), and optionally
    order the free queries lexicographically to break permutation symmetry.

    The y vector of a query marks its two items; z holds the coordinate-wise
    XOR of two y's (its four linking rows pin it exactly, so z can stay
    continuous).
    """
    if encoding.k_total <= 1:
        return m
    ids = encoding.item_ids
    n = len(ids)
    # y = v + w for free queries; constants for the fixed prefix
    encoding.y = []
    y_free: list[list[int]] = []
    for kf in range(encoding.num_free):
        y = [m.add_var(f"y{kf}_{t}", 0.0, 1.0) for t in range(n)]
        for t in range(n):
            m.add_constr([(y[t], 1.0), (encoding.v[kf][t], -1.0),
                          (encoding.w[kf][t], -1.0)], "==", 0.0)
        y_free.append(y)
        encoding.y.append(y)
    y_fixed = [membership_vector(q, ids) for q in encoding.fixed_prefix]

    def xor_vars(label: str, ya, yb) -> list[int]:
        # ya, yb: either var-id lists or constant 0/1 tuples
        z = [m.add_var(f"z{label}_{t}", 0.0, 1.0) for t in range(n)]
        for t in range(n):
            rows = [
                ([(z[t], 1.0)], "<=", 0.0, [(ya, 1.0), (yb, 1.0)]),
                ([(z[t], 1.0)], "<=", 2.0, [(ya, -1.0), (yb, -1.0)]),
                ([(z[t], 1.0)], ">=", 0.0, [(ya, 1.0), (yb, -1.0)]),
                ([(z[t], 1.0)], ">=", 0.0, [(ya, -1.0), (yb, 1.0)]),
            ]
            for terms, sense, rhs, contribs in rows:
                terms = list(terms)
                for y_ref, sign in contribs:
                    if isinstance(y_ref, tuple):
                        rhs += sign * y_ref[t]
                    else:
                        terms.append((y_ref[t], -sign))
                m.add_constr(terms, sense, rhs)
        return z

    pairs = []
    n_prefix = len(y_fixed)
    for a in range(n_prefix):
        for kf in range(encoding.num_free):
            pairs.append((f"p{a}f{kf}", y_fixed[a], y_free[kf], False))
    for ka in range(encoding.num_free):
        for kb in range(ka + 1, encoding.num_free):
            pairs.append((f"f{ka}f{kb}", y_free[ka], y_free[kb], lex))

    for label, ya, yb, order in pairs:
        z = xor_vars(label, ya, yb)
        # never ask the same query twice
        m.add_constr([(zt, 1.0) for zt in z], ">=", 1.0)
        if order:
            # at the first differing coordinate, the earlier query has 0
            for t in range(n):
                terms = [(yb[t], 1.0), (ya[t], -1.0)]
                terms += [(z[tt], 1.0) for tt in range(t)]
                m.add_constr(terms, ">=", 0.0)
    return m


def add_symmetry_breaking(m: solver.LinearModel, encoding: QueryEncoding,
                          ) -> solver.LinearModel:
    """Lexicographically order the free queries and forbid duplicates.
    No-op for plans with fewer than two queries."""
    return _add_pair_rows(m, encoding, lex=True)


# ---------------------------------------------------------------------------
# solving programs with a guard on the dual bounds
# ---------------------------------------------------------------------------


@dataclass
class OfflineSolution:
    plan: QueryPlan
    value: float
    rec_by_scenario: dict[Scenario, int]
    outcome: solver.SolveOutcome
    unbounded: bool = False
    criterion: str = "mmu"


def _duals_near_bound(program: OfflineProgram,
                      outcome: solver.SolveOutcome) -> bool:
    """True when a binding dual block presses against the dual bound, which
    would mean the bound may be distorting the optimum."""
    if outcome.values is None:
        return False
    mmu = program.criterion == "mmu"
    if mmu and outcome.objective >= program.unbounded_threshold:
        return False
    if not mmu and outcome.objective <= program.unbounded_threshold:
        return False
    D = program.dual_bound
    near = 0.999 * D
    b = program.umodel.base.b
    gamma = program.umodel.gamma
    tau_val = outcome.objective
    for tag, group in program.block_vars.items():
        beta_vals = outcome.values[group["beta"]]
        mu_val = outcome.values[group["mu"][0]] if group["mu"] else 0.0
        block_value = float(b @ beta_vals) + gamma * mu_val
        binding = (block_value <= tau_val + 1e-3) if mmu else (block_value >= tau_val - 1e-3)
        if not binding:
            continue
        # mu is excluded: it only caps alpha, so a saturated mu with slack
        # alphas is free parking, not distortion
        all_vals = np.concatenate([
            outcome.values[group["alpha"]] if group["alpha"] else np.zeros(0),
            beta_vals,
        ])
        if np.any(np.abs(all_vals) >= near):
            return True
    return False


def _solve_once(build, opts: CcgOptions,
                ) -> tuple[OfflineProgram, solver.SolveOutcome]:
    program = build(opts)
    outcome = program.model.solve()
    if outcome.status is solver.Status.TIME_LIMIT:
        raise RuntimeError("offline program hit the solver time limit")
    if outcome.status is not solver.Status.OPTIMAL:
        raise RuntimeError(
            f"offline program ended with status {outcome.status.value}: "
            f"{outcome.message}"
        )
    return program, outcome


def _solve_program(build, opts: CcgOptions,
                   ) -> tuple[OfflineProgram, solver.SolveOutcome]:
    """Solve ``build(opts)``, guarding against a too-small dual bound.

    When a binding block's duals saturate the bound, re-solve with a 10x
    bound and compare objectives: an unchanged objective means the
    saturation was benign slack (paired-equality rows leave that freedom),
    a changed one means the bound was distorting and the escalation sticks.
    """
    program, outcome = _solve_once(build, opts)
    if not _duals_near_bound(program, outcome):
        return program, outcome
    local = opts
    for attempt in range(2):
        local = replace(local, dual_bound=program.dual_bound * 10.0)
        program2, outcome2 = _solve_once(build, local)
        same = abs(outcome2.objective - outcome.objective) <= 1e-6 * max(
            1.0, abs(outcome.objective))
        if same:
            return program2, outcome2
        logger.warning(
            "dual bound %.3g was distorting the optimum (%.6g -> %.6g); "
            "kept the 10x bound",
            program.dual_bound, outcome.objective, outcome2.objective,
        )
        program, outcome = program2, outcome2
        if not _duals_near_bound(program, outcome):
            return program, outcome
    logger.warning("dual bound still saturated after escalation; keeping result")
    return program, outcome


def build_mmu_milp(bank: ItemBank, k: int, umodel: UncertaintyModel,
                   opts: Optional[CcgOptions] = None,
                   fixed_prefix: Sequence[Query] = (),
                   convex_recommendations: bool = False) -> OfflineProgram:
    """Exact program over all 2^k response scenarios.

    ``convex_recommendations`` relaxes the per-scenario recommendation to the
    convex hull of the recommendation set; it exists to check the known
    equivalence with the zero-query problem and is not a production path.
    """
    if k < 0:
        raise ValidationError("k must be >= 0")
    opts = opts or CcgOptions()
    if 2 ** k > 4096:
        raise ValidationError(
            f"2^{k} scenario blocks exceed the exact builder's budget; "
            "use the column-and-constraint solver instead"
        )
    scenarios = list(itertools.product((-1, 1), repeat=k))
    return _build_offline_program(bank, umodel, k, scenarios, opts, "mmu",
                                  fixed_prefix,
                                  convex_recommendations=convex_recommendations)


def solve_offline(program: OfflineProgram) -> OfflineSolution:
    """Solve a built offline program and decode plan + recommendations."""

    def rebuild(opts):
        if opts is program.opts:
            return program
        return _build_offline_program(
            program.bank, program.umodel, program.encoding.k_total,
            program.scenarios, opts, program.criterion,
            program.encoding.fixed_prefix, program.geometry,
            convex_recommendations=program.convex_recommendations,
        )

    prog, outcome = _solve_program(rebuild, program.opts)
    mmu = prog.criterion == "mmu"
    unbounded = (outcome.objective >= prog.unbounded_threshold if mmu
                 else outcome.objective <= prog.unbounded_threshold)
    plan = prog.extract_plan(outcome)
    recs = {} if _has_fractional_recs(prog) else prog.extract_recommendations(outcome)
    return OfflineSolution(plan, float(outcome.objective), recs, outcome,
                           unbounded=unbounded, criterion=prog.criterion)


def _has_fractional_recs(program: OfflineProgram) -> bool:
    # convex-hull recommendation selectors are continuous; skip decoding them
    return program.convex_recommendations


# ---------------------------------------------------------------------------
# plan evaluation (the single feasibility program of the decomposition)
# ---------------------------------------------------------------------------


def _response_big_m(geom: InstanceGeometry, gamma: float,
                    opts: CcgOptions) -> float:
    return opts.big_m if opts.big_m is not None else geom.max_query_gap + gamma + 1.0


def _build_feasibility(bank: ItemBank, umodel: UncertaintyModel,
                       queries: Sequence[Query], opts: CcgOptions,
                       criterion: str, geom: InstanceGeometry,
                       fixed_scenario: Optional[Scenario] = None):
    """Worst-scenario evaluation of a fixed plan.

    One weight-vector block per recommendable item, a shared binary response
    vector toggling each query's constraint via big-M, and an epigraph
    objective: minimized worst-case utility for mmu, maximized least
    achievable regret for mmr.

    With ``fixed_scenario`` the responses become data: the toggles collapse
    to plain rows and (for mmu) the program is a linear program.
    """
    mmu = criterion == "mmu"
    rids = sorted(bank.rec_ids)
    J = bank.num_attributes
    B, b = umodel.base.B, umodel.base.b
    gamma = umodel.gamma
    history = umodel.history
    H = len(history)
    N = len(queries)
    M_resp = _response_big_m(geom, gamma, opts)
    M_riv = 4.0 * geom.max_abs_value + 1.0

    m = solver.LinearModel(f"evaluate_{criterion}",
                           sense="min" if mmu else "max",
                           controls=opts.controls())
    cap = 2.0 * geom.max_abs_value + 1.0
    theta = m.add_var("theta", -cap, cap, obj=1.0)
    if fixed_scenario is None:
        sig = [m.add_binary(f"s{t}") for t in range(N)]
    else:
        sig = []

    for x_id in rids:
        x = bank.vector(x_id)
        u = [m.add_var(f"u{x_id}_{j}", float(geom.box_lo[j]), float(geom.box_hi[j]))
             for j in range(J)]
        eps = [m.add_var(f"e{x_id}_{t}", 0.0) for t in range(H + N)]
        for r in range(B.shape[0]):
            m.add_constr([(u[j], float(B[r, j])) for j in range(J) if B[r, j]],
                         ">=", float(b[r]))
        for h, (q, resp) in enumerate(history):
            diff = bank.query_diff(q)
            terms = [(u[j], float(resp * diff[j])) for j in range(J) if diff[j]]
            terms.append((eps[h], 1.0))
            m.add_constr(terms, ">=", 0.0)
        for t, q in enumerate(queries):
            diff = bank.query_diff(q)
            u_terms = [(u[j], float(diff[j])) for j in range(J) if diff[j]]
            if fixed_scenario is not None:
                s_t = fixed_scenario[t]
                terms = [(u[j], float(s_t * diff[j])) for j in range(J)
                         if diff[j]]
                terms.append((eps[H + t], 1.0))
                m.add_constr(terms, ">=", 0.0)
                continue
            # answer "+1" (sig=1) activates u.diff + eps >= 0
            m.add_constr(u_terms + [(eps[H + t], 1.0), (sig[t], -2.0 * M_resp)],
                         ">=", -2.0 * M_resp)
            # answer "-1" (sig=0) activates u.diff - eps <= 0
            m.add_constr(u_terms + [(eps[H + t], -1.0), (sig[t], -2.0 * M_resp)],
                         "<=", 0.0)
        if eps:
            m.add_constr([(e, 1.0) for e in eps], "<=", gamma)
        if mmu:
            m.add_constr([(theta, 1.0)] + [(u[j], -float(x[j]))
                                           for j in range(J) if x[j]],
                         ">=", 0.0)
        else:
            rho = [m.add_binary(f"r{x_id}_{rid}") for rid in rids]
            m.add_constr([(rv, 1.0) for rv in rho], "==", 1.0)
            for rv, rid in zip(rho, rids):
                diff = bank.vector(rid) - x
                terms = [(theta, 1.0)]
                terms += [(u[j], -float(diff[j])) for j in range(J) if diff[j]]
                terms.append((rv, M_riv))
                m.add_constr(terms, "<=", M_riv)
    return m, sig


def _evaluate_plan(bank: ItemBank, umodel: UncertaintyModel,
                   queries: Sequence[Query], opts: CcgOptions, criterion: str,
                   geom: Optional[InstanceGeometry] = None,
                   ) -> tuple[float, Scenario]:
    geom = geom or instance_geometry(bank, umodel)
    m, sig = _build_feasibility(bank, umodel, queries, opts, criterion, geom)
    outcome = m.solve()
    if outcome.status is not solver.Status.OPTIMAL:
        raise RuntimeError(
            f"plan evaluation ended with status {outcome.status.value}: "
            f"{outcome.message}"
        )
    scenario = tuple(2 * solver.extract(outcome, v) - 1 for v in sig)
    return float(outcome.objective), scenario


def evaluate_queries_mmu(plan: QueryPlan | Sequence[Query], bank: ItemBank,
                         umodel: UncertaintyModel,
                         opts: Optional[CcgOptions] = None) -> float:
    """Exact worst-case-utility value of a fixed plan: the adversary picks
    the response scenario, then the best recommendation is scored at its
    worst admissible weight vector."""
    value, _ = _evaluate_plan(bank, umodel, list(plan), opts or CcgOptions(),
                              "mmu")
    return value


def evaluate_scenario(bank: ItemBank, umodel: UncertaintyModel,
                      queries: Sequence[Query], scenario: Scenario,
                      criterion: str = "mmu",
                      opts: Optional[CcgOptions] = None,
                      geom: Optional[InstanceGeometry] = None,
                      ) -> Optional[float]:
    """Value of a plan under one fixed response scenario (no adversary);
    None when the scenario is incompatible with the prior.

    For mmu this is a single LP with one weight block per recommendable
    item, which makes scanning many candidate queries cheap.
    """
    opts = opts or CcgOptions()
    geom = geom or instance_geometry(bank, umodel)
    m, _ = _build_feasibility(bank, umodel, list(queries), opts, criterion,
                              geom, fixed_scenario=tuple(scenario))
    outcome = m.solve()
    if outcome.status is solver.Status.INFEASIBLE:
        return None
    if outcome.status is not solver.Status.OPTIMAL:
        raise RuntimeError(
            f"scenario evaluation ended with status {outcome.status.value}"
        )
    return float(outcome.objective)


# ---------------------------------------------------------------------------
# column-and-constraint generation
# ---------------------------------------------------------------------------


@dataclass
class CcgIteration:
    iteration: int
    lower: float
    upper: float
    pool_size: int
    added: Optional[Scenario]
    wall_time: float


@dataclass
class CcgState:
    pool: list[Scenario] = field(default_factory=list)
    incumbent: Optional[QueryPlan] = None
    lower: float = -np.inf
    upper: float = np.inf
    iterations: list[CcgIteration] = field(default_factory=list)
    status: str = "running"   # optimal | max_iterations | stalled | time_limit

    @property
    def gap(self) -> float:
        return self.upper - self.lower


@dataclass
class CcgResult:
    plan: QueryPlan
    value: float
    state: CcgState
    rec_by_scenario: dict[Scenario, int] = field(default_factory=dict)
    criterion: str = "mmu"


def _ccg(bank: ItemBank, k: int, umodel: UncertaintyModel,
         opts: CcgOptions, criterion: str,
         fixed_prefix: Sequence[Query] = (),
         initial_pool: Optional[Iterable[Scenario]] = None) -> CcgResult:
    mmu = criterion == "mmu"
    geom = instance_geometry(bank, umodel)
    state = CcgState()
    if initial_pool is not None:
        state.pool.extend(dict.fromkeys(tuple(s) for s in initial_pool))
    if not state.pool:
        # seed with the all-"+1" scenario so the first main solve is bounded
        state.pool.append(tuple([1] * k))
    sign = 1.0 if mmu else -1.0
    best_value = -np.inf
    best_plan: Optional[QueryPlan] = None
    recs: dict[Scenario, int] = {}
    start = time.perf_counter()

    for it in range(1, opts.max_iterations + 1):
        def build(o, pool=tuple(state.pool)):
            return _build_offline_program(bank, umodel, k, list(pool), o,
                                          criterion, fixed_prefix, geom)

        program, outcome = _solve_program(build, opts)
        tau = float(outcome.objective)
        plan = program.extract_plan(outcome)
        hit_cap = (tau >= program.unbounded_threshold if mmu
                   else tau <= program.unbounded_threshold)
        bound_from_main = (np.inf if mmu else -np.inf) if hit_cap else tau
        if mmu:
            state.upper = bound_from_main
        else:
            state.lower = bound_from_main

        theta, scenario = _evaluate_plan(bank, umodel, list(plan), opts,
                                         criterion, geom)
        if mmu:
            state.lower = theta
        else:
            state.upper = theta
        state.incumbent = plan
        if not hit_cap and sign * (theta - tau) > 1e-6:
            raise AssertionError(
                f"bound crossing: theta={theta} tau={tau} ({criterion})"
            )
        if sign * theta > best_value:
            best_value = sign * theta
            best_plan = plan
        added = None
        done = state.gap <= opts.delta
        if not done:
            if scenario in state.pool:
                logger.warning(
                    "scenario %s re-proposed with gap %.3g; stopping",
                    scenario, state.gap,
                )
                state.status = "stalled"
            else:
                state.pool.append(scenario)
                added = scenario
        state.iterations.append(CcgIteration(
            it, state.lower, state.upper, len(state.pool), added,
            time.perf_counter() - start,
        ))
        logger.info(
            "ccg %s iter=%d lb=%.6f ub=%.6f pool=%d wall=%.3fs",
            criterion, it, state.lower, state.upper, len(state.pool),
            time.perf_counter() - start,
        )
        if done:
            state.status = "optimal"
            recs = program.extract_recommendations(outcome)
            return CcgResult(plan, theta, state, recs, criterion)
        if state.status == "stalled":
            return CcgResult(best_plan, sign * best_value, state, recs,
                             criterion)

    state.status = "max_iterations"
    logger.warning("ccg stopped at max_iterations with gap %.3g", state.gap)
    return CcgResult(best_plan, sign * best_value, state, recs, criterion)


def ccg_mmu(bank: ItemBank, k: int, umodel: UncertaintyModel,
            opts: Optional[CcgOptions] = None,
            fixed_prefix: Sequence[Query] = (),
            initial_pool: Optional[Iterable[Scenario]] = None) -> CcgResult:
    """Column-and-constraint generation for the offline max-min-utility
    problem: alternate between a scenario-pool relaxation (upper bound) and
    an exact evaluation of its plan (lower bound), adding the evaluation's
    worst scenario until the gap closes."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    return _ccg(bank, k, umodel, opts or CcgOptions(), "mmu", fixed_prefix,
                initial_pool)


# ---------------------------------------------------------------------------
# warm starts and the greedy heuristic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WarmStartHint:
    """Abstract binary hint: a lexicographically sorted plan and one
    recommendation per response scenario."""

    plan: QueryPlan
    rec_by_scenario: dict[Scenario, int]


def warm_start_mmu(prev: OfflineSolution | CcgResult, bank: ItemBank,
                   umodel: UncertaintyModel,
                   rng: np.random.Generator) -> WarmStartHint:
    """Extend a K-query solution to a feasible (K+1)-query hint: append an
    unused query at random, keep recommending as if its answer were ignored,
    then reorder everything lexicographically so the symmetry rows hold."""
    plan = list(prev.plan)
    rec = dict(prev.rec_by_scenario)
    K = len(plan)
    used = set(plan)
    candidates = [q for q in bank.all_queries() if q not in used]
    if not candidates:
        raise ValidationError("query set exhausted")
    new_query = candidates[int(rng.integers(len(candidates)))]
    queries = plan + [new_query]

    chooser = recommend_mmu if _criterion_of(prev) == "mmu" else recommend_mmr
    for s in itertools.product((-1, 1), repeat=K):
        if s not in rec:
            updated = umodel
            for q, resp in zip(plan, s):
                updated = updated.with_response(q, resp)
            rec[s] = chooser(bank, updated).item

    ids = sorted(bank.query_ids)
    sorted_queries, order = lex_sort_queries(queries, ids)
    hint_rec: dict[Scenario, int] = {}
    for s_prime in itertools.product((-1, 1), repeat=K + 1):
        original = [0] * (K + 1)
        for j, t in enumerate(order):
            original[t] = s_prime[j]
        hint_rec[tuple(s_prime)] = rec[tuple(original[:K])]
    return WarmStartHint(QueryPlan(tuple(sorted_queries)), hint_rec)


def _criterion_of(prev) -> str:
    # GreedyResult/CcgResult do not carry the criterion; default to mmu
    return getattr(prev, "criterion", "mmu")


def apply_warm_start(program: OfflineProgram, hint: WarmStartHint,
                     ) -> dict[int, int]:
    """Attach a hint to a built program; returns the binary assignment."""
    assignment = program.hint_assignment(list(hint.plan), hint.rec_by_scenario)
    solver.warm_start(program.model, assignment)
    return assignment


def empty_solution(bank: ItemBank, umodel: UncertaintyModel,
                   criterion: str = "mmu") -> OfflineSolution:
    """The zero-query solution: recommend immediately."""
    rec = (recommend_mmu if criterion == "mmu" else recommend_mmr)(bank, umodel)
    return OfflineSolution(QueryPlan(()), rec.guarantee, {(): rec.item},
                           solver.SolveOutcome(solver.Status.OPTIMAL),
                           criterion=criterion)


@dataclass
class GreedyResult:
    plan: QueryPlan
    values: list[float]          # stage values, one per added query
    completed: bool = True


def _greedy(bank: ItemBank, k: int, umodel: UncertaintyModel,
            opts: CcgOptions, criterion: str) -> GreedyResult:
    prefix: tuple[Query, ...] = ()
    values: list[float] = []
    for stage in range(1, k + 1):
        try:
            result = _ccg(bank, stage, umodel, opts, criterion,
                          fixed_prefix=prefix)
        except (RuntimeError, AssertionError) as exc:
            logger.warning("greedy stage %d failed (%s); returning the "
                           "%d-query prefix", stage, exc, len(prefix))
            return GreedyResult(QueryPlan(prefix), values, completed=False)
        prefix = tuple(result.plan)
        values.append(result.value)
    return GreedyResult(QueryPlan(prefix), values)


def greedy_mmu(bank: ItemBank, k: int, umodel: UncertaintyModel,
               opts: Optional[CcgOptions] = None) -> GreedyResult:
    """Stage-wise heuristic: solve the one-query problem, fix its query,
    solve the two-query problem with the first query pinned, and so on.
    Feasible but possibly suboptimal; stage values are non-decreasing."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    return _greedy(bank, k, umodel, opts or CcgOptions(), "mmu")
