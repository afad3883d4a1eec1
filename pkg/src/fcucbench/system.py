"""Island power-system data model.

Holds the immutable study input (generators, system constants, hourly
profiles, UFLS scheme), its file I/O and validation, and the shared
physical aggregates (post-outage inertia, weighted governor gain,
operating-point features) used by the schedulers, the frequency
simulator, and the learned models.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Sequence


class ScenarioParseError(ValueError):
    """Raised when a scenario or profiles file is malformed."""


class ScenarioValidationError(ValueError):
    """Raised when input data violates an invariant.

    Carries every violation found, each tagged with the field path.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "scenario validation failed:\n  " + "\n  ".join(self.violations)
        )


@dataclass(frozen=True)
class GeneratorParams:
    """One thermal unit: ratings, dynamics, UC limits and cost data.

    Powers in MW, machine rating in MVA, inertia constant in seconds on
    the machine base, governor-turbine gain in per-unit on the machine
    base with its time constant in seconds.  ``cost_points`` is a convex
    piecewise-linear curve as (MW, EUR/h) breakpoints covering
    [p_min, p_max].
    """

    id: str
    p_max: float
    p_min: float
    m_base: float
    h: float
    k: float
    t_gov: float
    ramp_up: float
    ramp_down: float
    min_up: int
    min_down: int
    for_rate: float
    cost_points: tuple[tuple[float, float], ...]
    startup_cost: float

    def validate(self, path: str) -> list[str]:
        bad = []
        if not (self.p_min > 0.0):
            bad.append(f"{path}.p_min: must be > 0, got {self.p_min}")
        if not (self.p_max >= self.p_min):
            bad.append(
                f"{path}.p_max: must be >= p_min ({self.p_min}), got {self.p_max}"
            )
        if not (self.m_base > 0.0):
            bad.append(f"{path}.m_base: must be > 0, got {self.m_base}")
        if not (self.h > 0.0):
            bad.append(f"{path}.h: must be > 0, got {self.h}")
        if not (self.k > 0.0):
            bad.append(f"{path}.k: must be > 0, got {self.k}")
        if not (self.t_gov > 0.0):
            bad.append(f"{path}.t_gov: must be > 0, got {self.t_gov}")
        if self.min_up < 1:
            bad.append(f"{path}.min_up: must be >= 1, got {self.min_up}")
        if self.min_down < 1:
            bad.append(f"{path}.min_down: must be >= 1, got {self.min_down}")
        if not (0.0 <= self.for_rate <= 1.0):
            bad.append(f"{path}.for_rate: must be in [0, 1], got {self.for_rate}")
        pts = self.cost_points
        if len(pts) < 2:
            bad.append(f"{path}.cost_points: need at least 2 breakpoints")
        else:
            xs = [x for x, _ in pts]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                bad.append(f"{path}.cost_points: breakpoints must strictly increase")
            if xs[0] > self.p_min + 1e-9 or xs[-1] < self.p_max - 1e-9:
                bad.append(
                    f"{path}.cost_points: breakpoints must cover "
                    f"[{self.p_min}, {self.p_max}], got [{xs[0]}, {xs[-1]}]"
                )
            slopes = [
                (y2 - y1) / (x2 - x1)
                for (x1, y1), (x2, y2) in zip(pts, pts[1:])
            ]
            if any(s2 < s1 - 1e-9 for s1, s2 in zip(slopes, slopes[1:])):
                bad.append(f"{path}.cost_points: curve must be convex")
        return bad


@dataclass(frozen=True)
class SystemConfig:
    """System-wide constants and frequency-security limits."""

    f0: float  # nominal frequency, Hz
    s_base: float  # system base, MVA
    d: float  # load damping, fraction of demand per Hz
    reserve_delivery_time: float  # s, time for reserve to fully deploy
    rocof_limit: float  # Hz/s
    qss_limit: float  # Hz
    nadir_limit: float  # Hz
    ufls_cost: float  # EUR per MW shed

    def validate(self, path: str = "system") -> list[str]:
        bad = []
        for name in ("f0", "s_base", "reserve_delivery_time", "rocof_limit",
                     "qss_limit", "nadir_limit"):
            if not (getattr(self, name) > 0.0):
                bad.append(f"{path}.{name}: must be > 0, got {getattr(self, name)}")
        if self.d < 0.0:
            bad.append(f"{path}.d: must be >= 0, got {self.d}")
        if self.ufls_cost < 0.0:
            bad.append(f"{path}.ufls_cost: must be >= 0, got {self.ufls_cost}")
        return bad


@dataclass(frozen=True)
class Profiles:
    """Hourly demand and renewable infeed, MW, one value per hour."""

    demand: tuple[float, ...]
    wind: tuple[float, ...]
    solar: tuple[float, ...]

    @property
    def horizon(self) -> int:
        return len(self.demand)

    def net_demand(self, t: int) -> float:
        return self.demand[t] - self.wind[t] - self.solar[t]

    def validate(self, path: str = "profiles") -> list[str]:
        bad = []
        n = len(self.demand)
        if len(self.wind) != n or len(self.solar) != n:
            bad.append(f"{path}: demand/wind/solar lengths differ "
                       f"({n}/{len(self.wind)}/{len(self.solar)})")
            return bad
        if n == 0:
            bad.append(f"{path}: empty horizon")
        for t in range(n):
            for name in ("demand", "wind", "solar"):
                if getattr(self, name)[t] < 0.0:
                    bad.append(f"{path}.{name}[{t + 1}]: must be >= 0")
            if self.demand[t] - self.wind[t] - self.solar[t] <= 0.0:
                bad.append(f"{path}[{t + 1}]: net demand must be positive")
        return bad


@dataclass(frozen=True)
class UflsStage:
    trigger_freq: float  # absolute Hz; stage arms when f <= trigger_freq
    shed_fraction: float  # fraction of instantaneous remaining load
    relay_delay: float  # s the crossing must persist

    def validate(self, path: str) -> list[str]:
        bad = []
        if not (0.0 < self.shed_fraction <= 1.0):
            bad.append(f"{path}.shed_fraction: must be in (0, 1], "
                       f"got {self.shed_fraction}")
        if self.relay_delay < 0.0:
            bad.append(f"{path}.relay_delay: must be >= 0")
        return bad


@dataclass(frozen=True)
class UflsScheme:
    """Staged conventional under-frequency load-shedding relays."""

    stages: tuple[UflsStage, ...]
    breaker_delay: float

    def validate(self, path: str = "ufls") -> list[str]:
        bad = []
        if self.breaker_delay < 0.0:
            bad.append(f"{path}.breaker_delay: must be >= 0")
        freqs = [s.trigger_freq for s in self.stages]
        if any(b >= a for a, b in zip(freqs, freqs[1:])):
            bad.append(f"{path}.stages: trigger frequencies must strictly decrease")
        for i, s in enumerate(self.stages):
            bad.extend(s.validate(f"{path}.stages[{i}]"))
        return bad


@dataclass(frozen=True)
class Scenario:
    """The immutable study input; safe to share across threads."""

    generators: tuple[GeneratorParams, ...]
    system: SystemConfig
    profiles: Profiles
    ufls: UflsScheme

    @property
    def n_units(self) -> int:
        return len(self.generators)

    @property
    def horizon(self) -> int:
        return self.profiles.horizon

    def unit_index(self, unit_id: str) -> int:
        for i, g in enumerate(self.generators):
            if g.id == unit_id:
                return i
        raise KeyError(f"unknown unit id {unit_id!r}")

    def validate(self) -> list[str]:
        bad = []
        if len(self.generators) < 2:
            bad.append("generators: need at least 2 units")
        seen = set()
        for i, g in enumerate(self.generators):
            if g.id in seen:
                bad.append(f"generators[{i}].id: duplicate id {g.id!r}")
            seen.add(g.id)
            bad.extend(g.validate(f"generators[{i}]"))
        bad.extend(self.system.validate())
        bad.extend(self.profiles.validate())
        bad.extend(self.ufls.validate())
        if not bad:
            total = sum(g.p_max for g in self.generators)
            peak = max(self.profiles.net_demand(t)
                       for t in range(self.profiles.horizon))
            if total < peak:
                bad.append(f"generators: total capacity {total:.2f} MW below "
                           f"peak net demand {peak:.2f} MW")
        return bad


@dataclass(frozen=True)
class FeatureVector:
    """Operating-point features for one prospective outage.

    h_post
        post-outage inertia, sum of H*M_base over surviving committed
        units, MW*s.
    k_hat
        sum of K/T over surviving committed units, pu/s.
    p_lost
        dispatch of the lost unit, MW.
    r_post
        spinning reserve held by surviving units, MW.
    """

    h_post: float
    k_hat: float
    p_lost: float
    r_post: float

    def as_array(self):
        return [self.h_post, self.k_hat, self.p_lost, self.r_post]


FEATURE_ORDER = ("h_mws", "khat_pu_s", "p_lost_mw", "r_post_mw")


# ---------------------------------------------------------------------------
# Physical aggregates


def _check_outage(scenario: Scenario, commitment: Sequence[int], excluded: str) -> int:
    if len(commitment) != scenario.n_units:
        raise ValueError(
            f"commitment length {len(commitment)} != unit count {scenario.n_units}"
        )
    idx = scenario.unit_index(excluded)
    if not commitment[idx]:
        raise ValueError(
            f"unit {excluded!r} is offline; outage of an offline unit is undefined"
        )
    return idx


def aggregate_inertia(scenario: Scenario, commitment: Sequence[int],
                      excluded: str) -> float:
    """Post-outage system inertia sum(H_i * M_base_i) over committed
    survivors, MW*s."""
    ell = _check_outage(scenario, commitment, excluded)
    return math.fsum(
        g.h * g.m_base
        for i, g in enumerate(scenario.generators)
        if i != ell and commitment[i]
    )


def weighted_gain(scenario: Scenario, commitment: Sequence[int],
                  excluded: str) -> float:
    """Post-outage weighted governor-turbine gain sum(K_i / T_i) over
    committed survivors, pu/s."""
    ell = _check_outage(scenario, commitment, excluded)
    return math.fsum(
        g.k / g.t_gov
        for i, g in enumerate(scenario.generators)
        if i != ell and commitment[i]
    )


def compute_features(scenario: Scenario, schedule, t: int,
                     excluded: str) -> FeatureVector:
    """Assemble the feature vector for losing unit ``excluded`` at hour
    index ``t`` (0-based) of ``schedule``."""
    ell = scenario.unit_index(excluded)
    commitment = [int(schedule.u[i][t]) for i in range(scenario.n_units)]
    if not commitment[ell] or schedule.p[ell][t] <= 0.0:
        raise ValueError(
            f"unit {excluded!r} not dispatching at hour {t + 1}; no outage to assess"
        )
    return FeatureVector(
        h_post=aggregate_inertia(scenario, commitment, excluded),
        k_hat=weighted_gain(scenario, commitment, excluded),
        p_lost=float(schedule.p[ell][t]),
        r_post=math.fsum(
            float(schedule.r[i][t])
            for i in range(scenario.n_units)
            if i != ell and commitment[i]
        ),
    )


# ---------------------------------------------------------------------------
# File I/O
#
# System file: JSON with sections "system", "generators", "ufls" and an
# optional "profiles_csv" reference.  Profiles file: CSV with header
# hour,demand_mw,wind_mw,solar_mw, hour 1-based.

_GEN_KEYS = {
    "id": str,
    "p_max_mw": float,
    "p_min_mw": float,
    "m_base_mva": float,
    "inertia_h_s": float,
    "gov_gain_pu": float,
    "gov_time_s": float,
    "ramp_up_mw_per_h": float,
    "ramp_down_mw_per_h": float,
    "min_up_h": int,
    "min_down_h": int,
    "forced_outage_rate": float,
    "startup_cost_eur": float,
}

_SYS_KEYS = {
    "f0_hz": "f0",
    "s_base_mva": "s_base",
    "load_damping_per_hz": "d",
    "reserve_delivery_time_s": "reserve_delivery_time",
    "rocof_limit_hz_per_s": "rocof_limit",
    "qss_limit_hz": "qss_limit",
    "nadir_limit_hz": "nadir_limit",
    "ufls_cost_eur_per_mw": "ufls_cost",
}


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ScenarioParseError(f"{where}: missing required key {key!r}")
    return section[key]


def load_profiles(path: str) -> Profiles:
    """Read the hourly profiles CSV (hour,demand_mw,wind_mw,solar_mw)."""
    demand, wind, solar = [], [], []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for col in ("hour", "demand_mw", "wind_mw", "solar_mw"):
            if col not in header:
                raise ScenarioParseError(f"{path}: missing column {col!r}")
        for lineno, row in enumerate(reader, start=2):
            try:
                hour = int(row["hour"])
                demand.append(float(row["demand_mw"]))
                wind.append(float(row["wind_mw"]))
                solar.append(float(row["solar_mw"]))
            except (TypeError, ValueError) as exc:
                raise ScenarioParseError(f"{path}:{lineno}: {exc}") from exc
            if hour != len(demand):
                raise ScenarioParseError(
                    f"{path}:{lineno}: hours must run 1..N, got {hour}"
                )
    if not demand:
        raise ScenarioParseError(f"{path}: no profile rows")
    return Profiles(tuple(demand), tuple(wind), tuple(solar))


def load_scenario(path: str, profiles_path: str | None = None) -> Scenario:
    """Load and fully validate a scenario.

    ``profiles_path`` overrides the file's own ``profiles_csv`` reference
    (which is resolved relative to the scenario file).
    """
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: invalid JSON at offset {exc.pos}") from exc

    for section in ("system", "generators", "ufls"):
        if section not in raw:
            raise ScenarioParseError(f"{path}: missing section {section!r}")

    sys_raw = raw["system"]
    system = SystemConfig(**{
        attr: float(_require(sys_raw, key, f"{path}: system"))
        for key, attr in _SYS_KEYS.items()
    })

    gens = []
    for i, g in enumerate(raw["generators"]):
        where = f"{path}: generators[{i}]"
        vals = {key: cast(_require(g, key, where)) for key, cast in _GEN_KEYS.items()}
        pts = _require(g, "cost_points_mw_eur", where)
        try:
            cost_points = tuple((float(x), float(y)) for x, y in pts)
        except (TypeError, ValueError) as exc:
            raise ScenarioParseError(
                f"{where}: cost_points_mw_eur must be [MW, EUR/h] pairs"
            ) from exc
        gens.append(GeneratorParams(
            id=vals["id"],
            p_max=vals["p_max_mw"],
            p_min=vals["p_min_mw"],
            m_base=vals["m_base_mva"],
            h=vals["inertia_h_s"],
            k=vals["gov_gain_pu"],
            t_gov=vals["gov_time_s"],
            ramp_up=vals["ramp_up_mw_per_h"],
            ramp_down=vals["ramp_down_mw_per_h"],
            min_up=vals["min_up_h"],
            min_down=vals["min_down_h"],
            for_rate=vals["forced_outage_rate"],
            cost_points=cost_points,
            startup_cost=vals["startup_cost_eur"],
        ))

    ufls_raw = raw["ufls"]
    stages = tuple(
        UflsStage(
            trigger_freq=float(_require(s, "trigger_hz", f"{path}: ufls.stages[{i}]")),
            shed_fraction=float(_require(s, "shed_fraction", f"{path}: ufls.stages[{i}]")),
            relay_delay=float(_require(s, "relay_delay_s", f"{path}: ufls.stages[{i}]")),
        )
        for i, s in enumerate(ufls_raw.get("stages", []))
    )
    ufls = UflsScheme(stages=stages,
                      breaker_delay=float(_require(ufls_raw, "breaker_delay_s",
                                                   f"{path}: ufls")))

    if profiles_path is None:
        ref = raw.get("profiles_csv")
        if ref is None:
            raise ScenarioParseError(
                f"{path}: no profiles_csv reference and no profiles path given"
            )
        profiles_path = os.path.join(os.path.dirname(os.path.abspath(path)), ref)
    profiles = load_profiles(profiles_path)

    scenario = Scenario(generators=tuple(gens), system=system,
                        profiles=profiles, ufls=ufls)
    violations = scenario.validate()
    if violations:
        raise ScenarioValidationError(violations)
    return scenario


def save_scenario(scenario: Scenario, path: str,
                  profiles_name: str | None = None) -> None:
    """Write the scenario JSON plus its profiles CSV next to it."""
    if profiles_name is None:
        profiles_name = os.path.splitext(os.path.basename(path))[0] + "_profiles.csv"
    doc = {
        "system": {
            "f0_hz": scenario.system.f0,
            "s_base_mva": scenario.system.s_base,
            "load_damping_per_hz": scenario.system.d,
            "reserve_delivery_time_s": scenario.system.reserve_delivery_time,
            "rocof_limit_hz_per_s": scenario.system.rocof_limit,
            "qss_limit_hz": scenario.system.qss_limit,
            "nadir_limit_hz": scenario.system.nadir_limit,
            "ufls_cost_eur_per_mw": scenario.system.ufls_cost,
        },
        "generators": [
            {
                "id": g.id,
                "p_max_mw": g.p_max,
                "p_min_mw": g.p_min,
                "m_base_mva": g.m_base,
                "inertia_h_s": g.h,
                "gov_gain_pu": g.k,
                "gov_time_s": g.t_gov,
                "ramp_up_mw_per_h": g.ramp_up,
                "ramp_down_mw_per_h": g.ramp_down,
                "min_up_h": g.min_up,
                "min_down_h": g.min_down,
                "forced_outage_rate": g.for_rate,
                "cost_points_mw_eur": [[x, y] for x, y in g.cost_points],
                "startup_cost_eur": g.startup_cost,
            }
            for g in scenario.generators
        ],
        "ufls": {
            "breaker_delay_s": scenario.ufls.breaker_delay,
            "stages": [
                {
                    "trigger_hz": s.trigger_freq,
                    "shed_fraction": s.shed_fraction,
                    "relay_delay_s": s.relay_delay,
                }
                for s in scenario.ufls.stages
            ],
        },
        "profiles_csv": profiles_name,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    prof_path = os.path.join(os.path.dirname(os.path.abspath(path)), profiles_name)
    with open(prof_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["hour", "demand_mw", "wind_mw", "solar_mw"])
        p = scenario.profiles
        for t in range(p.horizon):
            writer.writerow([t + 1, repr(p.demand[t]), repr(p.wind[t]),
                             repr(p.solar[t])])
