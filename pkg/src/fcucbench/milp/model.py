"""Solver-agnostic MILP intermediate representation.

Variables, linear and indicator constraints and a linear objective are
held in plain containers so formulation builders stay independent of any
particular solver.  Construction is single-threaded per model; distinct
models can be built and solved concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

INF = math.inf

CONTINUOUS = "continuous"
BINARY = "binary"

_SENSES = ("<=", ">=", "==")


@dataclass
class Variable:
    index: int
    name: str
    kind: str
    lb: float
    ub: float


@dataclass
class LinearConstraint:
    name: str
    coeffs: dict[int, float]  # variable index -> coefficient
    sense: str
    rhs: float


@dataclass
class IndicatorConstraint:
    """switch == active_value implies the linear constraint holds."""

    name: str
    switch: int
    active_value: int
    constraint: LinearConstraint


@dataclass(frozen=True)
class ModelStats:
    n_constraints: int
    n_variables: int
    n_discrete: int


@dataclass
class SolveOptions:
    relative_gap: float = 0.001
    time_limit: float = 900.0
    thread_count: int = 1
    seed: int = 0

    def validate(self):
        if self.relative_gap < 0.0:
            raise ValueError(f"relative_gap must be >= 0, got {self.relative_gap}")
        if self.time_limit <= 0.0:
            raise ValueError(f"time_limit must be > 0, got {self.time_limit}")


@dataclass
class Solution:
    status: str  # optimal | gap_reached | infeasible | time_limit
    objective: float | None
    values: list[float] | None
    best_bound: float | None
    wall_time: float
    names: tuple[str, ...] = ()

    _by_name: dict | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "gap_reached")

    def value(self, name: str) -> float:
        if self._by_name is None:
            if self.values is None:
                raise ValueError(f"no incumbent available (status {self.status})")
            self._by_name = dict(zip(self.names, self.values))
        return self._by_name[name]

    def gap(self) -> float | None:
        if self.objective is None or self.best_bound is None:
            return None
        return abs(self.objective - self.best_bound) / max(1.0, abs(self.objective))


class ModelIR:
    """A mixed-integer linear program under construction."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[LinearConstraint] = []
        self.indicators: list[IndicatorConstraint] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0
        self._names: dict[str, int] = {}
        # caches for product linearizations, keyed by operand indices
        self._bb_cache: dict[tuple[int, int], int] = {}
        self._bc_cache: dict[tuple[int, int], int] = {}
        # audit registries: big-M uses and piecewise-square instances
        self.bigm_audit: list[tuple[str, float, float]] = []
        self.pwl_audit: list[tuple[int, int, tuple[float, ...]]] = []

    # -- variables ----------------------------------------------------------

    def add_var(self, name: str, kind: str = CONTINUOUS,
                lb: float = 0.0, ub: float = INF) -> int:
        if name in self._names:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        if lb > ub:
            raise ValueError(f"variable {name!r}: lb {lb} > ub {ub}")
        idx = len(self.variables)
        self.variables.append(Variable(idx, name, kind, lb, ub))
        self._names[name] = idx
        return idx

    def var(self, name: str) -> int:
        return self._names[name]

    def bounds(self, idx: int) -> tuple[float, float]:
        v = self.variables[idx]
        return v.lb, v.ub

    def require_finite_bounds(self, idx: int, context: str) -> tuple[float, float]:
        v = self.variables[idx]
        if not (math.isfinite(v.lb) and math.isfinite(v.ub)):
            raise ValueError(
                f"{context}: variable {v.name!r} needs finite bounds, "
                f"got [{v.lb}, {v.ub}]"
            )
        return v.lb, v.ub

    # -- constraints and objective ------------------------------------------

    def _check_expr(self, coeffs: dict[int, float], name: str):
        for idx in coeffs:
            if not (0 <= idx < len(self.variables)):
                raise ValueError(f"constraint {name!r} references unknown "
                                 f"variable index {idx}")

    def add_linear(self, name: str, coeffs: dict[int, float], sense: str,
                   rhs: float) -> LinearConstraint:
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        self._check_expr(coeffs, name)
        con = LinearConstraint(name, dict(coeffs), sense, float(rhs))
        self.constraints.append(con)
        return con

    def add_indicator(self, name: str, switch: int, active_value: int,
                      coeffs: dict[int, float], sense: str, rhs: float
                      ) -> IndicatorConstraint:
        if self.variables[switch].kind != BINARY:
            raise ValueError(f"indicator {name!r}: switch must be binary")
        if active_value not in (0, 1):
            raise ValueError(f"indicator {name!r}: active_value must be 0 or 1")
        self._check_expr(coeffs, name)
        inner = LinearConstraint(name, dict(coeffs), sense, float(rhs))
        ind = IndicatorConstraint(name, switch, active_value, inner)
        self.indicators.append(ind)
        return ind

    def set_objective(self, coeffs: dict[int, float], constant: float = 0.0):
        """Minimization objective; sense is always min."""
        self._check_expr(coeffs, "objective")
        self.objective = dict(coeffs)
        self.objective_constant = float(constant)

    def add_objective_terms(self, coeffs: dict[int, float]):
        self._check_expr(coeffs, "objective")
        for idx, c in coeffs.items():
            self.objective[idx] = self.objective.get(idx, 0.0) + c

    # -- interval arithmetic over affine expressions -------------------------

    def expr_range(self, coeffs: dict[int, float], constant: float = 0.0
                   ) -> tuple[float, float]:
        """Tight [min, max] of an affine expression over the variable box."""
        lo = hi = constant
        for idx, c in coeffs.items():
            vlb, vub = self.bounds(idx)
            if c >= 0.0:
                lo += c * vlb
                hi += c * vub
            else:
                lo += c * vub
                hi += c * vlb
        return lo, hi

    def note_bigm(self, name: str, used: float, tightest: float):
        self.bigm_audit.append((name, float(used), float(tightest)))

    # -- stats and transforms -------------------------------------------------

    def stats(self) -> ModelStats:
        return ModelStats(
            n_constraints=len(self.constraints) + len(self.indicators),
            n_variables=len(self.variables),
            n_discrete=sum(1 for v in self.variables if v.kind == BINARY),
        )

    def materialized(self) -> "ModelIR":
        """Copy with every indicator constraint rewritten as a big-M pair.

        The big-M is derived from the inner expression's own bound over
        the variable box, never from a global constant.
        """
        if not self.indicators:
            return self
        out = ModelIR(self.name)
        out.variables = [Variable(v.index, v.name, v.kind, v.lb, v.ub)
                         for v in self.variables]
        out._names = dict(self._names)
        out.constraints = [LinearConstraint(c.name, dict(c.coeffs), c.sense, c.rhs)
                           for c in self.constraints]
        out.objective = dict(self.objective)
        out.objective_constant = self.objective_constant
        out.bigm_audit = list(self.bigm_audit)
        out.pwl_audit = list(self.pwl_audit)
        for ind in self.indicators:
            inner = ind.constraint
            lo, hi = out.expr_range(inner.coeffs)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(
                    f"indicator {ind.name!r}: cannot derive big-M, expression "
                    f"unbounded over the variable box"
                )
            # switch-side coefficient that deactivates the row when
            # switch != active_value
            senses = [inner.sense] if inner.sense != "==" else ["<=", ">="]
            for sense in senses:
                coeffs = dict(inner.coeffs)
                if sense == "<=":
                    m = hi - inner.rhs
                else:
                    m = inner.rhs - lo
                m = max(m, 0.0)
                sign = 1.0 if sense == "<=" else -1.0
                if ind.active_value == 1:
                    # violated only allowed when switch == 0
                    coeffs[ind.switch] = coeffs.get(ind.switch, 0.0) + sign * m
                    rhs = inner.rhs + sign * m
                else:
                    coeffs[ind.switch] = coeffs.get(ind.switch, 0.0) - sign * m
                    rhs = inner.rhs
                out.add_linear(f"{ind.name}#bigm{sense}", coeffs, sense, rhs)
                out.note_bigm(f"{ind.name}#bigm{sense}", m, m)
        return out
