"""Thin modelling layer over the HiGHS LP / branch-and-bound engine (scipy).

Every optimization module in this package builds its programs through
:class:`LinearModel` only, so the backend can be swapped in one place.
Solves are single-threaded and deterministic for a fixed model.

Mixed-binary warm starts are advisory: the backend exposes no incumbent
injection, so a hint never changes the solve result. Hints can still be
validated exactly with :func:`check_assignment`, which fixes the hinted
binaries and solves the remaining LP.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp


class SolverUsageError(RuntimeError):
    """Misuse of the solver interface (not a numerical failure)."""


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIME_LIMIT = "time_limit"
    ERROR = "error"


@dataclass
class SolverControls:
    time_limit: Optional[float] = None      # seconds
    mip_rel_gap: float = 1e-6
    feasibility_tol: float = 1e-7
    integrality_tol: float = 1e-6


@dataclass
class _Constraint:
    indices: np.ndarray
    coefs: np.ndarray
    sense: str            # "<=", ">=", "=="
    rhs: float
    name: str = ""


@dataclass
class SolveOutcome:
    status: Status
    objective: Optional[float] = None
    values: Optional[np.ndarray] = None
    marginals: Optional[np.ndarray] = None   # per-constraint, LP solves only
    message: str = ""
    _binary_mask: Optional[np.ndarray] = None
    _integrality_tol: float = 1e-6


class LinearModel:
    """A linear / mixed-binary program under construction."""

    def __init__(self, name: str = "", sense: str = "max",
                 controls: Optional[SolverControls] = None):
        if sense not in ("max", "min"):
            raise SolverUsageError("sense must be 'max' or 'min'")
        self.name = name
        self.sense = sense
        self.controls = controls or SolverControls()
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._binary: list[bool] = []
        self._obj: list[float] = []
        self._names: list[str] = []
        self._constraints: list[_Constraint] = []
        self._hint: dict[int, int] = {}

    # -- variables ---------------------------------------------------------

    def add_var(self, name: str = "", lo: float = -math.inf,
                hi: float = math.inf, obj: float = 0.0) -> int:
        if lo > hi:
            raise SolverUsageError(f"variable bounds lo={lo} > hi={hi}")
        self._lo.append(lo)
        self._hi.append(hi)
        self._binary.append(False)
        self._obj.append(obj)
        self._names.append(name or f"x{len(self._names)}")
        return len(self._names) - 1

    def add_binary(self, name: str = "", obj: float = 0.0) -> int:
        v = self.add_var(name, 0.0, 1.0, obj)
        self._binary[v] = True
        return v

    @property
    def num_vars(self) -> int:
        return len(self._names)

    def set_objective_coef(self, var: int, coef: float) -> None:
        self._check_vars([var])
        self._obj[var] = coef

    # -- constraints --------------------------------------------------------

    def add_constr(self, terms: Iterable[tuple[int, float]], sense: str,
                   rhs: float, name: str = "") -> int:
        if sense not in ("<=", ">=", "=="):
            raise SolverUsageError(f"bad constraint sense {sense!r}")
        pairs = [(v, c) for v, c in terms if c != 0.0]
        self._check_vars([v for v, _ in pairs])
        self._constraints.append(_Constraint(
            np.array([v for v, _ in pairs], dtype=int),
            np.array([c for _, c in pairs], dtype=float),
            sense, float(rhs), name,
        ))
        return len(self._constraints) - 1

    def fix_var(self, var: int, value: float) -> None:
        self._check_vars([var])
        self._lo[var] = value
        self._hi[var] = value

    def _check_vars(self, ids: Sequence[int]) -> None:
        for v in ids:
            if not (0 <= v < self.num_vars):
                raise SolverUsageError(f"unregistered variable id {v}")

    # -- warm start ---------------------------------------------------------

    def set_warm_start(self, assignment: Mapping[int, int]) -> None:
        for v, val in assignment.items():
            self._check_vars([v])
            if not self._binary[v]:
                raise SolverUsageError(
                    f"warm-start hint covers non-binary variable {self._names[v]}"
                )
            if val not in (0, 1):
                raise SolverUsageError("warm-start values must be 0 or 1")
        self._hint = dict(assignment)

    @property
    def warm_start_hint(self) -> dict[int, int]:
        return dict(self._hint)

    # -- solve ---------------------------------------------------------------

    def _build_arrays(self):
        n = self.num_vars
        c = np.array(self._obj, dtype=float)
        if self.sense == "max":
            c = -c
        return c, np.array(self._lo), np.array(self._hi)

    def solve(self) -> SolveOutcome:
        if self.num_vars == 0:
            raise SolverUsageError("model has no variables")
        if any(self._binary):
            return self._solve_milp()
        return self._solve_lp()

    def _solve_lp(self) -> SolveOutcome:
        n = self.num_vars
        c, lo, hi = self._build_arrays()
        a_ub_rows, b_ub, ub_map = [], [], []
        a_eq_rows, b_eq, eq_map = [], [], []
        for k, con in enumerate(self._constraints):
            row = np.zeros(n)
            row[con.indices] = con.coefs
            if con.sense == "<=":
                a_ub_rows.append(row)
                b_ub.append(con.rhs)
                ub_map.append((k, 1.0))
            elif con.sense == ">=":
                a_ub_rows.append(-row)
                b_ub.append(-con.rhs)
                ub_map.append((k, -1.0))
            else:
                a_eq_rows.append(row)
                b_eq.append(con.rhs)
                eq_map.append(k)
        options = {
            "presolve": True,
            "primal_feasibility_tolerance": self.controls.feasibility_tol,
            "dual_feasibility_tolerance": self.controls.feasibility_tol,
        }
        if self.controls.time_limit is not None:
            options["time_limit"] = self.controls.time_limit
        res = linprog(
            c,
            A_ub=np.array(a_ub_rows) if a_ub_rows else None,
            b_ub=np.array(b_ub) if b_ub else None,
            A_eq=np.array(a_eq_rows) if a_eq_rows else None,
            b_eq=np.array(b_eq) if b_eq else None,
            bounds=np.column_stack([lo, hi]),
            method="highs",
            options=options,
        )
        status = _LP_STATUS.get(res.status, Status.ERROR)
        objective = None
        values = None
        marginals = None
        if status is Status.OPTIMAL:
            values = np.asarray(res.x)
            objective = float(res.fun)
            if self.sense == "max":
                objective = -objective
            marginals = np.zeros(len(self._constraints))
            sign = -1.0 if self.sense == "max" else 1.0
            for (k, flip), m in zip(ub_map, res.ineqlin.marginals):
                # marginal w.r.t. the constraint's own rhs, in the model's sense
                marginals[k] = sign * flip * m
            for k, m in zip(eq_map, res.eqlin.marginals):
                marginals[k] = sign * m
        return SolveOutcome(status, objective, values, marginals,
                            message=res.message,
                            _binary_mask=np.array(self._binary),
                            _integrality_tol=self.controls.integrality_tol)

    def _solve_milp(self) -> SolveOutcome:
        n = self.num_vars
        c, lo, hi = self._build_arrays()
        constraints = []
        for con in self._constraints:
            row = np.zeros(n)
            row[con.indices] = con.coefs
            if con.sense == "<=":
                constraints.append(LinearConstraint(row, -np.inf, con.rhs))
            elif con.sense == ">=":
                constraints.append(LinearConstraint(row, con.rhs, np.inf))
            else:
                constraints.append(LinearConstraint(row, con.rhs, con.rhs))
        options = {
            "mip_rel_gap": self.controls.mip_rel_gap,
            "presolve": True,
            # passed to HiGHS verbatim; keeps integer incumbents from
            # exploiting loose default feasibility tolerances
            "mip_abs_gap": self.controls.feasibility_tol,
            "mip_feasibility_tolerance": self.controls.feasibility_tol,
            "primal_feasibility_tolerance": self.controls.feasibility_tol,
        }
        if self.controls.time_limit is not None:
            options["time_limit"] = self.controls.time_limit
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="Unrecognized options")
            res = milp(
                c,
                constraints=constraints or None,
                integrality=np.array(self._binary, dtype=int),
                bounds=Bounds(lo, hi),
                options=options,
            )
        status = _MILP_STATUS.get(res.status, Status.ERROR)
        if status is Status.TIME_LIMIT and res.x is None:
            status = Status.ERROR
        objective = None
        values = None
        if res.x is not None:
            values = np.asarray(res.x)
            objective = float(res.fun)
            if self.sense == "max":
                objective = -objective
        return SolveOutcome(status, objective, values, None,
                            message=res.message,
                            _binary_mask=np.array(self._binary),
                            _integrality_tol=self.controls.integrality_tol)

    # -- debugging ------------------------------------------------------------

    def write_lp(self, path: str) -> None:
        """Dump the model as CPLEX-LP text (debug aid)."""
        lines = [f"\\ {self.name or 'model'}"]
        lines.append("Maximize" if self.sense == "max" else "Minimize")
        terms = " + ".join(
            f"{self._obj[v]} {self._names[v]}"
            for v in range(self.num_vars) if self._obj[v] != 0.0
        )
        lines.append(f" obj: {terms or '0 ' + self._names[0]}")
        lines.append("Subject To")
        op = {"<=": "<=", ">=": ">=", "==": "="}
        for k, con in enumerate(self._constraints):
            expr = " + ".join(
                f"{c} {self._names[v]}" for v, c in zip(con.indices, con.coefs)
            )
            lines.append(f" {con.name or f'c{k}'}: {expr or '0 ' + self._names[0]} "
                         f"{op[con.sense]} {con.rhs}")
        lines.append("Bounds")
        for v in range(self.num_vars):
            lo, hi = self._lo[v], self._hi[v]
            if lo == -math.inf and hi == math.inf:
                lines.append(f" {self._names[v]} free")
            else:
                lo_s = "-inf" if lo == -math.inf else str(lo)
                hi_s = "+inf" if hi == math.inf else str(hi)
                lines.append(f" {lo_s} <= {self._names[v]} <= {hi_s}")
        binaries = [self._names[v] for v in range(self.num_vars) if self._binary[v]]
        if binaries:
            lines.append("Binaries")
            lines.append(" " + " ".join(binaries))
        lines.append("End")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


_LP_STATUS = {
    0: Status.OPTIMAL,
    1: Status.TIME_LIMIT,
    2: Status.INFEASIBLE,
    3: Status.UNBOUNDED,
    4: Status.ERROR,
}

_MILP_STATUS = {
    0: Status.OPTIMAL,
    1: Status.TIME_LIMIT,
    2: Status.INFEASIBLE,
    3: Status.UNBOUNDED,
    4: Status.ERROR,
}


def solve(model: LinearModel) -> SolveOutcome:
    return model.solve()


def extract(outcome: SolveOutcome, variables):
    """Read variable values from an outcome; binaries are rounded and checked.

    ``variables`` may be a single id or a sequence of ids.
    """
    if outcome.values is None:
        raise SolverUsageError(
            f"no assignment available on a {outcome.status.value} outcome"
        )
    single = np.isscalar(variables)
    ids = [variables] if single else list(variables)
    out = []
    tol = outcome._integrality_tol
    for v in ids:
        val = float(outcome.values[v])
        if outcome._binary_mask is not None and outcome._binary_mask[v]:
            rounded = round(val)
            if abs(val - rounded) > tol + 1e-9:
                raise SolverUsageError(
                    f"binary variable {v} has fractional value {val}"
                )
            val = int(rounded)
        out.append(val)
    return out[0] if single else out


def warm_start(model: LinearModel, assignment: Mapping[int, int]) -> LinearModel:
    """Attach a binary hint. The solve result is unchanged in value."""
    model.set_warm_start(assignment)
    return model


def check_assignment(model: LinearModel, assignment: Mapping[int, int],
                     ) -> tuple[bool, Optional[float]]:
    """Exactly test a binary assignment: fix the binaries, solve the rest.

    Returns (feasible, objective-with-binaries-fixed).
    """
    import copy

    probe = copy.deepcopy(model)
    for v, val in assignment.items():
        if not probe._binary[v]:
            raise SolverUsageError(f"variable {v} in assignment is not binary")
        probe.fix_var(v, float(val))
    outcome = probe.solve()
    if outcome.status is Status.OPTIMAL:
        return True, outcome.objective
    if outcome.status is Status.INFEASIBLE:
        return False, None
    raise RuntimeError(f"assignment check ended with status {outcome.status.value}")
