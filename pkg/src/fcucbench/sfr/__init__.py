"""Time-domain system-frequency-response simulator.

A swing equation on aggregated post-outage inertia, one second-order
governor-turbine response per surviving unit (two cascaded lags, unity
steady-state path scaled by the governor gain), and a staged
conventional under-frequency load-shedding relay.  Serves both as the
training-label generator and as the ground-truth evaluator for every
formulation's schedule.

The integration loop runs in a compiled extension when available and
falls back to a pure-Python kernel otherwise; set FCUC_SFR_KERNEL to
``python`` or ``compiled`` to force one.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..system import Scenario

from . import _kernel_py

_FORCED = os.environ.get("FCUC_SFR_KERNEL", "").strip().lower()
if _FORCED == "python":
    _impl = _kernel_py
    KERNEL = "python"
else:
    try:
        from . import _kernel as _impl  # type: ignore[attr-defined]
        KERNEL = "compiled"
    except ImportError:
        if _FORCED == "compiled":
            raise ImportError(
                "FCUC_SFR_KERNEL=compiled but the extension is not built; "
                "run `python setup.py build_ext --inplace`"
            )
        _impl = _kernel_py
        KERNEL = "python"


def kernel_name() -> str:
    return KERNEL


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.005  # s
    horizon: float = 60.0  # s
    integrator: str = "rk4"  # rk4 | euler
    gov_second_ratio: float = 0.1  # fast lag = ratio * t_gov
    saturate_at_reserve: bool = True  # False: full physical headroom
    rocof_window: float = 0.0  # s; 0 means instantaneous at t=0+
    trace_decimation: int = 0  # keep every k-th sample; 0 disables

    def validate(self, max_t_gov: float) -> None:
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.horizon < 10.0 * max_t_gov:
            raise ValueError(
                f"horizon {self.horizon}s too short; need >= 10x the largest "
                f"governor time constant ({10.0 * max_t_gov}s)"
            )
        if self.integrator not in ("rk4", "euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


@dataclass(frozen=True)
class ShedEvent:
    time: float  # s after the outage
    stage: int  # 0-based stage index
    mw: float


@dataclass(frozen=True)
class OutageResult:
    """Outcome of one (hour, lost unit) simulation."""

    nadir: float  # Hz, min frequency deviation (<= 0)
    max_rocof: float  # Hz/s, magnitude
    shed_mw: float
    shed_events: tuple[ShedEvent, ...]
    qss: float  # Hz, mean deviation over the final 10 % of the horizon
    trace: tuple | None = None  # (t, delta_f, p_gov, shed) arrays


@dataclass(frozen=True)
class SweepResult:
    results: dict  # (hour, unit_id) -> OutageResult, insertion-ordered
    total_shed_mw: float
    avg_nadir_hz: float

    @property
    def n_outages(self) -> int:
        return len(self.results)


def analytic_oracles(h_sys_mws: float, k_m_sum_mva: float, p_lost_mw: float,
                     f0: float, d_mw_per_hz: float = 0.0
                     ) -> tuple[float, float]:
    """Closed-form initial RoCoF and quasi-steady-state deviation.

    ``k_m_sum_mva`` is the sum of governor gain times machine base over
    the surviving committed units.  Used to cross-validate the
    integrator; governor output is zero at t = 0 so the initial slope is
    set by inertia alone.
    """
    if p_lost_mw == 0.0:
        return 0.0, 0.0
    if h_sys_mws <= 0.0:
        raise ValueError("no surviving inertia: initial RoCoF undefined")
    rocof = -f0 * p_lost_mw / (2.0 * h_sys_mws)
    denom = k_m_sum_mva / f0 + d_mw_per_hz
    if denom <= 0.0:
        raise ValueError("no frequency containment: QSS deviation undefined")
    qss = -p_lost_mw / denom
    return rocof, qss


def simulate_outage(scenario: Scenario, schedule, t: int, lost: str,
                    config: SimConfig | None = None) -> OutageResult:
    """Simulate the loss of unit ``lost`` at hour index ``t`` (0-based)."""
    if config is None:
        config = SimConfig()
    gens = scenario.generators
    ell = scenario.unit_index(lost)
    if not schedule.u[ell][t]:
        raise ValueError(f"unit {lost!r} is offline at hour {t + 1}")
    p_lost = float(schedule.p[ell][t])

    survivors = [i for i in range(len(gens)) if i != ell and schedule.u[i][t]]
    if not survivors:
        raise ValueError(
            f"no surviving units at hour {t + 1}; post-outage system undefined"
        )
    config.validate(max(gens[i].t_gov for i in survivors))

    h_sys = math.fsum(gens[i].h * gens[i].m_base for i in survivors)
    gain = [gens[i].k * gens[i].m_base for i in survivors]
    tg = [gens[i].t_gov for i in survivors]
    sat_hi, sat_lo = [], []
    for i in survivors:
        head = gens[i].p_max - float(schedule.p[i][t])
        if config.saturate_at_reserve:
            head = min(float(schedule.r[i][t]), head)
        sat_hi.append(max(head, 0.0))
        sat_lo.append(-max(float(schedule.p[i][t]) - gens[i].p_min, 0.0))

    f0 = scenario.system.f0
    demand = scenario.profiles.demand[t]
    stages = scenario.ufls.stages
    trig = [s.trigger_freq - f0 for s in stages]
    frac = [s.shed_fraction for s in stages]
    relay = [s.relay_delay for s in stages]

    n_steps = int(round(config.horizon / config.dt))
    status, df, pgov, shed, ev_t, ev_s, ev_mw = _impl.run_sfr(
        h_sys, f0, scenario.system.d, demand, p_lost,
        gain, tg, config.gov_second_ratio, sat_lo, sat_hi,
        trig, frac, relay, scenario.ufls.breaker_delay,
        config.dt, n_steps, config.integrator == "rk4",
    )
    if status != 0:
        raise RuntimeError(
            f"integration unstable at t={len(df) * config.dt:.3f}s "
            f"(|frequency step| > 1 Hz); reduce dt={config.dt}"
        )

    df = np.asarray(df)
    events = tuple(ShedEvent(time=et, stage=es, mw=em)
                   for et, es, em in zip(ev_t, ev_s, ev_mw))
    nadir = float(df.min())
    if config.rocof_window > 0.0:
        k = max(1, int(round(config.rocof_window / config.dt)))
        slopes = (df[k:] - df[:-k]) / (k * config.dt)
        max_rocof = float(np.abs(slopes).max()) if len(slopes) else 0.0
    else:
        max_rocof = abs(f0 * p_lost / (2.0 * h_sys))
    tail = max(1, n_steps // 10)
    qss = float(df[-tail:].mean())

    trace = None
    if config.trace_decimation > 0:
        k = config.trace_decimation
        ts = np.arange(n_steps + 1)[::k] * config.dt
        trace = (ts, df[::k].copy(), np.asarray(pgov)[::k],
                 np.asarray(shed)[::k])

    return OutageResult(nadir=nadir, max_rocof=max_rocof,
                        shed_mw=math.fsum(ev_mw), shed_events=events,
                        qss=qss, trace=trace)


def sweep_outages(scenario: Scenario, schedule,
                  config: SimConfig | None = None) -> SweepResult:
    """One simulation per (hour, online unit with positive dispatch).

    Aggregates use exact summation so evaluation order cannot change
    them.
    """
    results = {}
    for t, unit in schedule.online_outages():
        results[(t, unit)] = simulate_outage(scenario, schedule, t, unit,
                                             config)
    total = math.fsum(res.shed_mw for res in results.values())
    avg = (math.fsum(res.nadir for res in results.values()) / len(results)
           if results else 0.0)
    return SweepResult(results=results, total_shed_mw=total, avg_nadir_hz=avg)


def save_trace_csv(result: OutageResult, path: str) -> None:
    """Write the sampled trajectory: t_s,delta_f_hz,p_gov_mw,shed_mw."""
    if result.trace is None:
        raise ValueError("result holds no trace; set trace_decimation > 0")
    ts, df, pgov, shed = result.trace
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t_s", "delta_f_hz", "p_gov_mw", "shed_mw"])
        for row in zip(ts, df, pgov, shed):
            writer.writerow([repr(float(x)) for x in row])
