"""Core data model: items, queries, uncertainty sets and their update rule.

All types are immutable after construction; operations that "modify" a model
return a new value, so instances can be shared freely across threads.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np
from scipy.special import erfinv

from . import solver


class ValidationError(ValueError):
    """Raised when inputs violate a documented invariant."""


class ParseError(ValueError):
    """Raised when a tabular input stream violates the CSV contract."""


class InfeasibleUncertaintyError(RuntimeError):
    """Raised when an operation requires a non-empty uncertainty set."""


_TRUE_TOKENS = {"1", "true", "yes", "y"}
_FALSE_TOKENS = {"0", "false", "no", "n"}


@dataclass(frozen=True)
class ItemBank:
    """Indexed attribute vectors with query-set / recommendation-set membership.

    Item indices are 1-based throughout the public API (matching the usual
    pairwise-comparison notation); ``items`` itself is a 0-based array.
    """

    items: np.ndarray            # shape (I, J)
    ids: tuple[str, ...]
    query_ids: frozenset[int]    # 1-based indices allowed in queries
    rec_ids: frozenset[int]      # 1-based indices allowed as recommendations

    def __post_init__(self):
        items = np.asarray(self.items, dtype=float)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "query_ids", frozenset(self.query_ids))
        object.__setattr__(self, "rec_ids", frozenset(self.rec_ids))
        if items.ndim != 2 or items.shape[1] < 1:
            raise ValidationError("items must be a 2-D array with J >= 1 attributes")
        n = items.shape[0]
        if len(self.ids) != n:
            raise ValidationError("ids must match the number of items")
        if len(set(self.ids)) != n:
            dupes = sorted({i for i in self.ids if self.ids.count(i) > 1})
            raise ValidationError(f"duplicate item ids: {dupes}")
        for idx in self.query_ids | self.rec_ids:
            if not (1 <= idx <= n):
                raise ValidationError(f"item index {idx} out of range 1..{n}")
        if len(self.query_ids) < 2:
            raise ValidationError("query set must contain at least two items")
        if not self.rec_ids:
            raise ValidationError("recommendation set must not be empty")

    @property
    def size(self) -> int:
        return self.items.shape[0]

    @property
    def num_attributes(self) -> int:
        return self.items.shape[1]

    def vector(self, index: int) -> np.ndarray:
        """Attribute vector of the item with 1-based ``index``."""
        if not (1 <= index <= self.size):
            raise ValidationError(f"item index {index} out of range 1..{self.size}")
        return self.items[index - 1]

    def query_diff(self, query: "Query") -> np.ndarray:
        """x^first - x^second for a query."""
        return self.vector(query.first) - self.vector(query.second)

    def all_queries(self) -> list["Query"]:
        """Every admissible pair (i, i') with i < i', both in the query set."""
        ids = sorted(self.query_ids)
        return [Query(a, b) for k, a in enumerate(ids) for b in ids[k + 1:]]


@dataclass(frozen=True, order=True)
class Query:
    """A pairwise comparison between two query-set items, first < second."""

    first: int
    second: int

    def __post_init__(self):
        if self.first >= self.second:
            raise ValidationError(
                f"query must have first < second, got ({self.first}, {self.second})"
            )
        if self.first < 1:
            raise ValidationError("item indices are 1-based")


@dataclass(frozen=True)
class QueryPlan:
    """An ordered list of queries. Duplicates are rejected: asking the same
    comparison twice can never improve the guarantee."""

    queries: tuple[Query, ...]

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        if len(set(self.queries)) != len(self.queries):
            raise ValidationError("query plan contains duplicate queries")

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    @staticmethod
    def of(*pairs: tuple[int, int]) -> "QueryPlan":
        return QueryPlan(tuple(Query(a, b) for a, b in pairs))


@dataclass(frozen=True)
class ResponseVector:
    """Responses in {-1, +1}, aligned with a query plan of the same length."""

    responses: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "responses", tuple(int(s) for s in self.responses))
        if any(s not in (-1, 1) for s in self.responses):
            raise ValidationError("responses must be -1 or +1")

    def __len__(self) -> int:
        return len(self.responses)

    def __iter__(self):
        return iter(self.responses)


@dataclass(frozen=True)
class PreferencePolyhedron:
    """The prior weight set {u : B u >= b}. Must be non-empty and bounded.

    Equality rows are stored as paired inequalities, so lower-dimensional
    priors (e.g. the probability simplex) are supported.
    """

    B: np.ndarray   # (M, J)
    b: np.ndarray   # (M,)

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        if B.shape[0] != b.shape[0]:
            raise ValidationError("B and b row counts differ")
        if B.shape[1] < 1:
            raise ValidationError("polyhedron must live in dimension >= 1")
        self._check_nonempty_bounded()

    def _lp(self, objective: np.ndarray, sense: str) -> solver.SolveOutcome:
        m = solver.LinearModel("polyhedron_probe", sense=sense)
        u = [m.add_var(f"u{j}", obj=objective[j]) for j in range(self.dim)]
        for row, rhs in zip(self.B, self.b):
            m.add_constr([(u[j], row[j]) for j in range(self.dim)], ">=", rhs)
        return m.solve()

    def _check_nonempty_bounded(self):
        J = self.dim
        out = self._lp(np.zeros(J), "min")
        if out.status is solver.Status.INFEASIBLE:
            raise ValidationError("prior polyhedron is empty")
        if out.status is not solver.Status.OPTIMAL:
            raise ValidationError(f"prior polyhedron LP check failed: {out.message}")
        for j in range(J):
            for sense in ("min", "max"):
                c = np.zeros(J)
                c[j] = 1.0
                out = self._lp(c, sense)
                if out.status is solver.Status.UNBOUNDED:
                    raise ValidationError(
                        f"prior polyhedron is unbounded in coordinate {j}"
                    )

    @property
    def dim(self) -> int:
        return self.B.shape[1]

    @property
    def num_rows(self) -> int:
        return self.B.shape[0]

    def contains(self, u: np.ndarray, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(self.B @ u >= self.b - tol))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate-wise (lo, hi) bounds, each obtained by an LP."""
        J = self.dim
        lo = np.empty(J)
        hi = np.empty(J)
        for j in range(J):
            c = np.zeros(J)
            c[j] = 1.0
            lo[j] = self._lp(c, "min").objective
            hi[j] = self._lp(c, "max").objective
        return lo, hi

    @staticmethod
    def box(dim: int, lo: float = -1.0, hi: float = 1.0) -> "PreferencePolyhedron":
        """[lo, hi]^dim."""
        eye = np.eye(dim)
        B = np.vstack([eye, -eye])
        b = np.concatenate([np.full(dim, lo), np.full(dim, -hi)])
        return PreferencePolyhedron(B, b)

    @staticmethod
    def simplex(dim: int) -> "PreferencePolyhedron":
        """{u >= 0, sum(u) = 1}: non-negative part-worth weights."""
        ones = np.ones((1, dim))
        B = np.vstack([np.eye(dim), ones, -ones])
        b = np.concatenate([np.zeros(dim), [1.0], [-1.0]])
        return PreferencePolyhedron(B, b)


@dataclass(frozen=True)
class NoiseConfig:
    """Response-shock model: shocks have standard deviation ``sigma`` and the
    inconsistency budget is calibrated at confidence ``confidence``."""

    sigma: float
    confidence: float = 0.9

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0")
        if not (0.0 < self.confidence < 1.0):
            raise ValidationError("confidence must lie strictly in (0, 1)")


def budget_gamma(noise: NoiseConfig, k: int) -> float:
    """Inconsistency budget for ``k`` queries: 2*sigma*sqrt(k)*erfinv(2p - 1)."""
    if k < 0:
        raise ValidationError("query count must be >= 0")
    if noise.sigma == 0.0 or k == 0:
        return 0.0
    return float(2.0 * noise.sigma * math.sqrt(k) * erfinv(2.0 * noise.confidence - 1.0))


@dataclass(frozen=True)
class UncertaintyModel:
    """Base polyhedron plus budgeted response constraints.

    ``history`` holds (query, response) pairs already observed. A weight
    vector u is admissible iff there exists eps >= 0 with sum(eps) <= gamma
    such that every response constraint holds with slack eps.
    """

    base: PreferencePolyhedron
    gamma: float = 0.0
    history: tuple[tuple[Query, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "history",
            tuple((q, int(s)) for q, s in self.history),
        )
        if self.gamma < 0:
            raise ValidationError("gamma must be >= 0")
        for q, s in self.history:
            if s not in (-1, 1):
                raise ValidationError("history responses must be -1 or +1")

    @property
    def num_responses(self) -> int:
        return len(self.history)

    def with_response(self, query: Query, response: int) -> "UncertaintyModel":
        return replace(self, history=self.history + ((query, int(response)),))

    def with_responses(self, plan: QueryPlan,
                       responses: "ResponseVector") -> "UncertaintyModel":
        """Apply a whole plan's answers at once."""
        if len(plan) != len(responses):
            raise ValidationError(
                f"plan has {len(plan)} queries but {len(responses)} responses"
            )
        extended = self
        for query, s in zip(plan, responses):
            extended = extended.with_response(query, s)
        return extended

    def with_gamma(self, gamma: float) -> "UncertaintyModel":
        return replace(self, gamma=float(gamma))


@dataclass(frozen=True)
class ConstraintSystem:
    """Linear system A z >= rhs over z = (u, eps) with eps >= 0 rows included.

    Row layout: base polyhedron rows, one row per history response, the
    budget row -sum(eps) >= -gamma, then eps >= 0 rows.
    """

    A: np.ndarray
    rhs: np.ndarray
    num_u: int
    num_eps: int

    @property
    def dim(self) -> int:
        return self.num_u + self.num_eps


def updated_constraints(model: UncertaintyModel, bank: ItemBank) -> ConstraintSystem:
    """Constraint system of the updated uncertainty set over (u, eps).

    Response +1 to (i, i') contributes u.(x^i - x^i') + eps >= 0; response -1
    contributes -u.(x^i - x^i') + eps >= 0. All inequalities are loose.
    """
    J = bank.num_attributes
    if model.base.dim != J:
        raise ValidationError(
            f"polyhedron dimension {model.base.dim} != bank attributes {J}"
        )
    H = model.num_responses
    rows = []
    rhs = []
    for brow, bval in zip(model.base.B, model.base.b):
        rows.append(np.concatenate([brow, np.zeros(H)]))
        rhs.append(bval)
    for k, (q, s) in enumerate(model.history):
        if q.second > bank.size:
            raise ValidationError(
                f"history query ({q.first}, {q.second}) outside bank of size {bank.size}"
            )
        diff = bank.query_diff(q)
        row = np.zeros(J + H)
        row[:J] = s * diff
        row[J + k] = 1.0
        rows.append(row)
        rhs.append(0.0)
    budget = np.zeros(J + H)
    budget[J:] = -1.0
    rows.append(budget)
    rhs.append(-model.gamma)
    for k in range(H):
        row = np.zeros(J + H)
        row[J + k] = 1.0
        rows.append(row)
        rhs.append(0.0)
    return ConstraintSystem(np.array(rows), np.array(rhs), num_u=J, num_eps=H)


def contains_weight(model: UncertaintyModel, bank: ItemBank,
                    u: np.ndarray, tol: float = 1e-7) -> bool:
    """Membership test: is there an eps in the budget making ``u`` admissible?"""
    system = updated_constraints(model, bank)
    u = np.asarray(u, dtype=float)
    J = system.num_u
    residual = system.rhs - system.A[:, :J] @ u
    if system.num_eps == 0:
        return bool(np.all(residual <= tol))
    m = solver.LinearModel("membership", sense="min")
    eps = [m.add_var(f"e{t}") for t in range(system.num_eps)]
    for row, rhs in zip(system.A[:, J:], residual):
        m.add_constr([(eps[t], row[t]) for t in range(system.num_eps)
                      if row[t] != 0.0], ">=", float(rhs - tol))
    return m.solve().status is solver.Status.OPTIMAL


def is_nonempty(model: UncertaintyModel, bank: ItemBank) -> bool:
    """LP feasibility of the updated uncertainty set."""
    system = updated_constraints(model, bank)
    m = solver.LinearModel("uncertainty_feasibility", sense="min")
    z = [m.add_var(f"z{t}") for t in range(system.dim)]
    for row, rhs in zip(system.A, system.rhs):
        m.add_constr([(z[t], row[t]) for t in range(system.dim) if row[t] != 0.0],
                     ">=", rhs)
    out = m.solve()
    if out.status is solver.Status.INFEASIBLE:
        return False
    if out.status is not solver.Status.OPTIMAL:
        raise RuntimeError(f"feasibility LP failed: {out.message}")
    return True


def load_item_bank(source: io.TextIOBase | str | Iterable[str]) -> ItemBank:
    """Parse an item bank from CSV text.

    Contract: UTF-8, comma separator, header row; first column ``id``;
    optional boolean columns ``in_query_set`` / ``in_rec_set`` (default true);
    every remaining column is a numeric attribute.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: missing header row")
    header = [h.strip() for h in header]
    if not header or header[0] != "id":
        raise ParseError("first column must be named 'id'")
    flag_cols = {}
    attr_cols = []
    for pos, name in enumerate(header[1:], start=1):
        if name in ("in_query_set", "in_rec_set"):
            if name in flag_cols:
                raise ParseError(f"duplicate column '{name}'")
            flag_cols[name] = pos
        else:
            attr_cols.append(pos)
    if not attr_cols:
        raise ParseError("no attribute columns found")

    ids: list[str] = []
    vectors: list[list[float]] = []
    in_query: list[bool] = []
    in_rec: list[bool] = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"row {row_no}: expected {len(header)} fields, got {len(row)}"
            )
        ids.append(row[0].strip())
        vec = []
        for pos in attr_cols:
            cell = row[pos].strip()
            try:
                vec.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"row {row_no}, column '{header[pos]}': "
                    f"non-numeric attribute value {cell!r}"
                )
        vectors.append(vec)
        for name, store, default in (
            ("in_query_set", in_query, True),
            ("in_rec_set", in_rec, True),
        ):
            if name in flag_cols:
                cell = row[flag_cols[name]].strip().lower()
                if cell in _TRUE_TOKENS:
                    store.append(True)
                elif cell in _FALSE_TOKENS:
                    store.append(False)
                else:
                    raise ParseError(
                        f"row {row_no}, column '{name}': bad boolean {cell!r}"
                    )
            else:
                store.append(default)

    if not ids:
        raise ParseError("no data rows")
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValidationError(f"duplicate item ids: {dupes}")
    query_ids = frozenset(i + 1 for i, f in enumerate(in_query) if f)
    rec_ids = frozenset(i + 1 for i, f in enumerate(in_rec) if f)
    return ItemBank(np.array(vectors), tuple(ids), query_ids, rec_ids)
