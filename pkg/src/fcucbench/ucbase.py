"""Base unit-commitment MILP: builder, schedule extraction, independent
re-validation, and pricing.

The builder covers commitment logic, minimum up/down times, capacity and
ramp limits, power balance, convex piecewise-linear costs and N-1
spinning-reserve adequacy.  Initial conditions are all-off with no
residual run obligations; ramp limits are skipped at the first hour.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .milp.model import BINARY, CONTINUOUS, ModelIR, Solution
from .system import Scenario


class ScheduleExtractionError(ValueError):
    pass


@dataclass
class UcSchedule:
    """Per-unit, per-hour commitment, startup/shutdown, dispatch, reserve."""

    unit_ids: tuple[str, ...]
    u: np.ndarray  # (n, T) int
    v: np.ndarray
    w: np.ndarray
    p: np.ndarray  # (n, T) MW
    r: np.ndarray  # (n, T) MW

    @property
    def horizon(self) -> int:
        return self.u.shape[1]

    def online_outages(self):
        """(hour, unit_id) pairs with positive dispatch, deterministic order."""
        n, horizon = self.u.shape
        for t in range(horizon):
            for i in range(n):
                if self.u[i, t] and self.p[i, t] > 0.0:
                    yield t, self.unit_ids[i]


@dataclass(frozen=True)
class UnitCost:
    """Convex piecewise-linear generation cost over [p_min, p_max]."""

    base: float  # EUR/h at p_min while committed
    starts: tuple[float, ...]  # segment left edges, MW
    widths: tuple[float, ...]
    slopes: tuple[float, ...]  # EUR/MWh, nondecreasing
    startup: float

    def energy_cost(self, p: float) -> float:
        """Generation cost at output p MW (unit committed)."""
        lo = self.starts[0]
        hi = self.starts[-1] + self.widths[-1]
        if p < lo - 1e-6 or p > hi + 1e-6:
            raise ValueError(f"dispatch {p} MW outside cost domain [{lo}, {hi}]")
        total = self.base
        for s, wdt, slope in zip(self.starts, self.widths, self.slopes):
            total += slope * min(wdt, max(0.0, p - s))
        return total


@dataclass(frozen=True)
class CostModel:
    units: tuple[UnitCost, ...]


def _interp_points(points, x: float) -> float:
    xs = [a for a, _ in points]
    ys = [b for _, b in points]
    return float(np.interp(x, xs, ys))


def cost_model_from(scenario: Scenario) -> CostModel:
    units = []
    for g in scenario.generators:
        edges = [g.p_min]
        edges += [x for x, _ in g.cost_points if g.p_min < x < g.p_max]
        edges.append(g.p_max)
        vals = [_interp_points(g.cost_points, x) for x in edges]
        starts = tuple(edges[:-1])
        widths = tuple(b - a for a, b in zip(edges, edges[1:]))
        slopes = tuple((v2 - v1) / wdt
                       for v1, v2, wdt in zip(vals, vals[1:], widths))
        units.append(UnitCost(base=vals[0], starts=starts, widths=widths,
                              slopes=slopes, startup=g.startup_cost))
    return CostModel(units=tuple(units))


def vn(prefix: str, unit_id: str, t: int) -> str:
    """Variable name for unit/hour; hours 1-based in names and files."""
    return f"{prefix}[{unit_id},{t + 1}]"


@dataclass
class UcModel:
    """A formulation under construction: the IR plus variable handles."""

    scenario: Scenario
    model: ModelIR
    u: list[list[int]]
    v: list[list[int]]
    w: list[list[int]]
    p: list[list[int]]
    r: list[list[int]]
    cost_model: CostModel


def build_uc_core(scenario: Scenario, name: str = "uc") -> UcModel:
    """Everything except the reserve-adequacy rule: objective, logic,
    min up/down, capacity, ramps, and power balance."""
    feasibility_precheck(scenario)
    gens = scenario.generators
    horizon = scenario.horizon
    cm = cost_model_from(scenario)
    m = ModelIR(name)

    u = [[m.add_var(vn("u", g.id, t), BINARY) for t in range(horizon)] for g in gens]
    v = [[m.add_var(vn("v", g.id, t), BINARY) for t in range(horizon)] for g in gens]
    w = [[m.add_var(vn("w", g.id, t), BINARY) for t in range(horizon)] for g in gens]
    p = [[m.add_var(vn("p", g.id, t), CONTINUOUS, 0.0, g.p_max)
          for t in range(horizon)] for g in gens]
    r = [[m.add_var(vn("r", g.id, t), CONTINUOUS, 0.0, g.p_max)
          for t in range(horizon)] for g in gens]

    obj: dict[int, float] = {}
    for i, g in enumerate(gens):
        uc = cm.units[i]
        for t in range(horizon):
            obj[u[i][t]] = obj.get(u[i][t], 0.0) + uc.base
            obj[v[i][t]] = obj.get(v[i][t], 0.0) + uc.startup
            segs = []
            link = {p[i][t]: -1.0, u[i][t]: g.p_min}
            for k, (wdt, slope) in enumerate(zip(uc.widths, uc.slopes)):
                s = m.add_var(f"pseg{k}[{g.id},{t + 1}]", CONTINUOUS, 0.0, wdt)
                obj[s] = slope
                link[s] = 1.0
                segs.append(s)
            m.add_linear(f"cost_link[{g.id},{t + 1}]", link, "==", 0.0)

    for i, g in enumerate(gens):
        for t in range(horizon):
            # commitment logic; all units start offline
            logic = {u[i][t]: 1.0, v[i][t]: -1.0, w[i][t]: 1.0}
            if t > 0:
                logic[u[i][t - 1]] = -1.0
            m.add_linear(f"logic[{g.id},{t + 1}]", logic, "==", 0.0)
            m.add_linear(f"excl[{g.id},{t + 1}]",
                         {v[i][t]: 1.0, w[i][t]: 1.0}, "<=", 1.0)
            m.add_linear(f"min_output[{g.id},{t + 1}]",
                         {p[i][t]: 1.0, u[i][t]: -g.p_min}, ">=", 0.0)
            m.add_linear(f"capacity[{g.id},{t + 1}]",
                         {p[i][t]: 1.0, r[i][t]: 1.0, u[i][t]: -g.p_max},
                         "<=", 0.0)
            if t > 0:
                m.add_linear(f"ramp_up[{g.id},{t + 1}]",
                             {p[i][t]: 1.0, p[i][t - 1]: -1.0}, "<=", g.ramp_up)
                m.add_linear(f"ramp_down[{g.id},{t + 1}]",
                             {p[i][t - 1]: 1.0, p[i][t]: -1.0}, "<=",
                             g.ramp_down)
        # minimum run windows, imposed only once a full window fits
        for t in range(g.min_up - 1, horizon):
            coeffs = {v[i][s]: 1.0 for s in range(t - g.min_up + 1, t + 1)}
            coeffs[u[i][t]] = coeffs.get(u[i][t], 0.0) - 1.0
            m.add_linear(f"min_up[{g.id},{t + 1}]", coeffs, "<=", 0.0)
        for t in range(g.min_down - 1, horizon):
            coeffs = {w[i][s]: 1.0 for s in range(t - g.min_down + 1, t + 1)}
            coeffs[u[i][t]] = coeffs.get(u[i][t], 0.0) + 1.0
            m.add_linear(f"min_down[{g.id},{t + 1}]", coeffs, "<=", 1.0)

    for t in range(horizon):
        m.add_linear(f"balance[{t + 1}]",
                     {p[i][t]: 1.0 for i in range(len(gens))}, "==",
                     scenario.profiles.net_demand(t))

    m.set_objective(obj)
    return UcModel(scenario=scenario, model=m, u=u, v=v, w=w, p=p, r=r,
                   cost_model=cm)


def add_reserve_adequacy(uc: UcModel) -> None:
    """N-1 rule: surviving reserve covers each unit's dispatch."""
    n = uc.scenario.n_units
    for t in range(uc.scenario.horizon):
        for ell, g in enumerate(uc.scenario.generators):
            coeffs = {uc.r[i][t]: 1.0 for i in range(n) if i != ell}
            coeffs[uc.p[ell][t]] = -1.0
            uc.model.add_linear(f"reserve_n1[{g.id},{t + 1}]", coeffs, ">=", 0.0)


def build_buc(scenario: Scenario) -> UcModel:
    """The benchmark formulation: core constraints plus N-1 reserve."""
    uc = build_uc_core(scenario, name="buc")
    add_reserve_adequacy(uc)
    return uc


def feasibility_precheck(scenario: Scenario) -> None:
    if scenario.n_units < 2:
        raise ValueError(
            "single-generator scenarios are rejected: the N-1 reserve rule "
            "reads 0 >= dispatch and admits no positive output"
        )
    total = sum(g.p_max for g in scenario.generators)
    for t in range(scenario.horizon):
        need = scenario.profiles.net_demand(t)
        if need > total + 1e-9:
            raise ValueError(
                f"hour {t + 1}: net demand {need:.2f} MW exceeds total "
                f"capacity {total:.2f} MW"
            )


# ---------------------------------------------------------------------------
# Extraction, validation, pricing


def extract_schedule(solution: Solution, scenario: Scenario,
                     integrality_tol: float = 1e-6) -> UcSchedule:
    """Round binaries from a solved model and re-verify every schedule
    invariant; raises if any binary is non-integral beyond tolerance or a
    rounded schedule fails validation."""
    if not solution.ok:
        raise ScheduleExtractionError(
            f"cannot extract from solution with status {solution.status!r}"
        )
    n = scenario.n_units
    horizon = scenario.horizon
    arr = {}
    for prefix in ("u", "v", "w"):
        a = np.zeros((n, horizon), dtype=np.int64)
        for i, g in enumerate(scenario.generators):
            for t in range(horizon):
                raw = solution.value(vn(prefix, g.id, t))
                rounded = round(raw)
                if abs(raw - rounded) > integrality_tol or rounded not in (0, 1):
                    raise ScheduleExtractionError(
                        f"{vn(prefix, g.id, t)} = {raw} is not integral within "
                        f"{integrality_tol}"
                    )
                a[i, t] = rounded
        arr[prefix] = a
    pq = np.zeros((n, horizon))
    rq = np.zeros((n, horizon))
    for i, g in enumerate(scenario.generators):
        for t in range(horizon):
            pq[i, t] = solution.value(vn("p", g.id, t))
            rq[i, t] = solution.value(vn("r", g.id, t))
    # snap solver noise on offline hours
    pq[arr["u"] == 0] = 0.0
    rq[arr["u"] == 0] = 0.0
    pq = np.maximum(pq, 0.0)
    rq = np.maximum(rq, 0.0)
    schedule = UcSchedule(unit_ids=tuple(g.id for g in scenario.generators),
                          u=arr["u"], v=arr["v"], w=arr["w"], p=pq, r=rq)
    violations = validate_schedule(schedule, scenario)
    if violations:
        raise ScheduleExtractionError(
            "rounded schedule fails validation:\n  "
            + "\n  ".join(v.describe() for v in violations)
        )
    return schedule


@dataclass(frozen=True)
class Violation:
    constraint: str
    unit: str | None
    hour: int | None  # 1-based
    magnitude: float

    def describe(self) -> str:
        where = []
        if self.unit is not None:
            where.append(f"unit {self.unit}")
        if self.hour is not None:
            where.append(f"hour {self.hour}")
        loc = ", ".join(where) or "global"
        return f"{self.constraint} ({loc}): violated by {self.magnitude:.6g}"


def violations_report(violations: list[Violation]) -> str:
    if not violations:
        return "schedule OK: no violations\n"
    return (f"schedule INVALID: {len(violations)} violation(s)\n"
            + "\n".join("  " + v.describe() for v in violations) + "\n")


def validate_schedule(schedule: UcSchedule, scenario: Scenario,
                      tol: float = 1e-5) -> list[Violation]:
    """Re-check every schedule invariant outside the solver.

    Returns violations as data (constraint name, unit, hour, magnitude);
    an empty list means the schedule is feasible for the core rules.
    """
    out: list[Violation] = []
    gens = scenario.generators
    n, horizon = schedule.u.shape

    def bad(name, unit, hour, mag):
        if mag > tol:
            out.append(Violation(name, unit, hour, float(mag)))

    for i, g in enumerate(gens):
        u, v, w = schedule.u[i], schedule.v[i], schedule.w[i]
        p, r = schedule.p[i], schedule.r[i]
        for t in range(horizon):
            prev = u[t - 1] if t > 0 else 0
            bad("logic", g.id, t + 1, abs((u[t] - prev) - (v[t] - w[t])))
            bad("startup_shutdown_excl", g.id, t + 1, v[t] + w[t] - 1)
            bad("min_output", g.id, t + 1, g.p_min * u[t] - p[t])
            bad("capacity", g.id, t + 1, p[t] + r[t] - g.p_max * u[t])
            if t > 0:
                bad("ramp_up", g.id, t + 1, (p[t] - p[t - 1]) - g.ramp_up)
                bad("ramp_down", g.id, t + 1, (p[t - 1] - p[t]) - g.ramp_down)
        for t in range(g.min_up - 1, horizon):
            run = sum(v[s] for s in range(t - g.min_up + 1, t + 1))
            bad("min_up", g.id, t + 1, run - u[t])
        for t in range(g.min_down - 1, horizon):
            stop = sum(w[s] for s in range(t - g.min_down + 1, t + 1))
            bad("min_down", g.id, t + 1, stop - (1 - u[t]))

    for t in range(horizon):
        need = scenario.profiles.net_demand(t)
        gap = abs(float(schedule.p[:, t].sum()) - need)
        if gap > max(tol, 1e-6 * scenario.profiles.demand[t]):
            out.append(Violation("balance", None, t + 1, gap))
    return out


def reserve_shortfalls(schedule: UcSchedule, scenario: Scenario,
                       tol: float = 1e-6) -> list[Violation]:
    """N-1 adequacy check, kept separate because corrective formulations
    relax it on purpose."""
    out = []
    n, horizon = schedule.u.shape
    for t in range(horizon):
        rsum = float(schedule.r[:, t].sum())
        for ell in range(n):
            if not schedule.u[ell, t]:
                continue
            short = schedule.p[ell, t] - (rsum - schedule.r[ell, t])
            if short > tol:
                out.append(Violation("reserve_n1", schedule.unit_ids[ell],
                                     t + 1, float(short)))
    return out


def schedule_cost(schedule: UcSchedule, cost_model: CostModel) -> float:
    """Generation plus startup cost of a schedule, EUR."""
    total = 0.0
    n, horizon = schedule.u.shape
    for i in range(n):
        uc = cost_model.units[i]
        for t in range(horizon):
            if schedule.u[i, t]:
                total += uc.energy_cost(float(schedule.p[i, t]))
            total += uc.startup * int(schedule.v[i, t])
    return total


# ---------------------------------------------------------------------------
# Schedule CSV I/O: unit,hour,u,p_mw,r_mw (hour 1-based)


def save_schedule_csv(schedule: UcSchedule, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["unit", "hour", "u", "p_mw", "r_mw"])
        n, horizon = schedule.u.shape
        for i in range(n):
            for t in range(horizon):
                writer.writerow([
                    schedule.unit_ids[i], t + 1, int(schedule.u[i, t]),
                    repr(float(schedule.p[i, t])), repr(float(schedule.r[i, t])),
                ])


def load_schedule_csv(path: str, scenario: Scenario) -> UcSchedule:
    n = scenario.n_units
    horizon = scenario.horizon
    u = np.zeros((n, horizon), dtype=np.int64)
    p = np.zeros((n, horizon))
    r = np.zeros((n, horizon))
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for col in ("unit", "hour", "u", "p_mw", "r_mw"):
            if col not in (reader.fieldnames or []):
                raise ValueError(f"{path}: missing column {col!r}")
        for row in reader:
            i = scenario.unit_index(row["unit"])
            t = int(row["hour"]) - 1
            if not 0 <= t < horizon:
                raise ValueError(f"{path}: hour {t + 1} outside 1..{horizon}")
            u[i, t] = int(row["u"])
            p[i, t] = float(row["p_mw"])
            r[i, t] = float(row["r_mw"])
    v = np.zeros((n, horizon), dtype=np.int64)
    w = np.zeros((n, horizon), dtype=np.int64)
    for i in range(n):
        for t in range(horizon):
            prev = u[i, t - 1] if t > 0 else 0
            v[i, t] = max(u[i, t] - prev, 0)
            w[i, t] = max(prev - u[i, t], 0)
    return UcSchedule(unit_ids=tuple(g.id for g in scenario.generators),
                      u=u, v=v, w=w, p=p, r=r)
