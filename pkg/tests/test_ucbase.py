import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from fcucbench.milp.backend import solve
from fcucbench.milp.model import SolveOptions
from fcucbench.system import Profiles, Scenario, SystemConfig, UflsScheme
from fcucbench.ucbase import (ScheduleExtractionError, UcSchedule, build_buc,
                              cost_model_from, extract_schedule,
                              load_schedule_csv, reserve_shortfalls,
                              save_schedule_csv, schedule_cost,
                              validate_schedule, violations_report)

from conftest import make_gen, make_scenario

TIGHT = SolveOptions(relative_gap=1e-7, time_limit=120.0)


def brute_force_uc(scenario, tol=1e-9):
    """Exhaustive enumeration oracle: every commitment pattern, with an
    LP dispatch solved directly through scipy.linprog.

    Stays independent of the MILP route: no shared model builder.
    """
    gens = scenario.generators
    n = len(gens)
    horizon = scenario.horizon
    cm = cost_model_from(scenario)
    best = np.inf

    def logic_ok(u):
        for i, g in enumerate(gens):
            prev = 0
            v = [max(u[i][t] - (u[i][t - 1] if t else 0), 0)
                 for t in range(horizon)]
            w = [max((u[i][t - 1] if t else 0) - u[i][t], 0)
                 for t in range(horizon)]
            for t in range(g.min_up - 1, horizon):
                if sum(v[s] for s in range(t - g.min_up + 1, t + 1)) > u[i][t]:
                    return False
            for t in range(g.min_down - 1, horizon):
                if sum(w[s] for s in range(t - g.min_down + 1, t + 1)) \
                        > 1 - u[i][t]:
                    return False
        return True

    for bits in itertools.product((0, 1), repeat=n * horizon):
        u = [list(bits[i * horizon:(i + 1) * horizon]) for i in range(n)]
        if any(sum(u[i][t] * gens[i].p_max for i in range(n))
               < scenario.profiles.net_demand(t) - 1e-9
               for t in range(horizon)):
            continue
        if not logic_ok(u):
            continue
        # LP over p, r and cost segments for this commitment
        # variable layout: per (i,t): p, r, seg_0..seg_{k-1}
        nseg = [len(cm.units[i].slopes) for i in range(n)]
        idx = {}
        nv = 0
        for i in range(n):
            for t in range(horizon):
                idx[("p", i, t)] = nv
                idx[("r", i, t)] = nv + 1
                for s in range(nseg[i]):
                    idx[("s", i, t, s)] = nv + 2 + s
                nv += 2 + nseg[i]
        c = np.zeros(nv)
        fixed = 0.0
        lb = np.zeros(nv)
        ub = np.full(nv, np.inf)
        a_eq, b_eq, a_ub, b_ub = [], [], [], []
        for i, g in enumerate(gens):
            uc = cm.units[i]
            for t in range(horizon):
                fixed += uc.base * u[i][t]
                fixed += uc.startup * max(
                    u[i][t] - (u[i][t - 1] if t else 0), 0)
                for s, (wd, sl) in enumerate(zip(uc.widths, uc.slopes)):
                    c[idx[("s", i, t, s)]] = sl
                    ub[idx[("s", i, t, s)]] = wd if u[i][t] else 0.0
                # p = pmin*u + sum(segments)
                row = np.zeros(nv)
                row[idx[("p", i, t)]] = 1.0
                for s in range(nseg[i]):
                    row[idx[("s", i, t, s)]] = -1.0
                a_eq.append(row)
                b_eq.append(g.p_min * u[i][t])
                lb[idx[("p", i, t)]] = g.p_min * u[i][t]
                row = np.zeros(nv)
                row[idx[("p", i, t)]] = 1.0
                row[idx[("r", i, t)]] = 1.0
                a_ub.append(row)
                b_ub.append(g.p_max * u[i][t])
                if t:
                    row = np.zeros(nv)
                    row[idx[("p", i, t)]] = 1.0
                    row[idx[("p", i, t - 1)]] = -1.0
                    a_ub.append(row)
                    b_ub.append(g.ramp_up)
                    row = -row
                    a_ub.append(row)
                    b_ub.append(g.ramp_down)
        for t in range(horizon):
            row = np.zeros(nv)
            for i in range(n):
                row[idx[("p", i, t)]] = 1.0
            a_eq.append(row)
            b_eq.append(scenario.profiles.net_demand(t))
            for ell in range(n):
                row = np.zeros(nv)
                for i in range(n):
                    if i != ell:
                        row[idx[("r", i, t)]] = -1.0
                row[idx[("p", ell, t)]] = 1.0
                a_ub.append(row)
                b_ub.append(0.0)
        res = linprog(c, A_ub=np.array(a_ub), b_ub=np.array(b_ub),
                      A_eq=np.array(a_eq), b_eq=np.array(b_eq),
                      bounds=list(zip(lb, ub)), method="highs")
        if res.status == 0:
            best = min(best, res.fun + fixed)
    return best


def small_random_scenario(rng):
    gens = tuple(
        make_gen(str(i + 1),
                 p_max=float(rng.uniform(6.0, 10.0)),
                 p_min=float(rng.uniform(1.0, 2.5)),
                 m_base=10.0, h=2.0, k=20.0,
                 marginal=float(rng.uniform(40.0, 90.0)),
                 startup=float(rng.uniform(50.0, 300.0)),
                 min_up=int(rng.integers(1, 3)),
                 min_down=int(rng.integers(1, 3)),
                 ramp=float(rng.uniform(5.0, 10.0)))
        for i in range(3)
    )
    demand = tuple(float(rng.uniform(4.0, 11.0)) for _ in range(4))
    return make_scenario(gens, demand)


def test_milp_matches_brute_force_once():
    rng = np.random.default_rng(123)
    sc = small_random_scenario(rng)
    uc = build_buc(sc)
    sol = solve(uc.model, options=TIGHT)
    assert sol.ok
    best = brute_force_uc(sc)
    assert sol.objective == pytest.approx(best, rel=1e-6)


def test_single_generator_scenario_rejected():
    gens = (make_gen("only", 10.0, 2.0, 12.0, 2.0, 20.0),)
    sysc = SystemConfig(f0=50.0, s_base=100.0, d=0.0,
                        reserve_delivery_time=2.0, rocof_limit=4.0,
                        qss_limit=0.5, nadir_limit=2.5, ufls_cost=2e4)
    sc = Scenario(generators=gens, system=sysc,
                  profiles=Profiles((3.0,), (0.0,), (0.0,)),
                  ufls=UflsScheme(stages=(), breaker_delay=0.1))
    assert any("at least 2" in v for v in sc.validate())
    from fcucbench.ucbase import feasibility_precheck
    with pytest.raises(ValueError, match="single-generator"):
        feasibility_precheck(sc)


def test_capacity_shortfall_detected_pre_build(toy3):
    import dataclasses
    prof = Profiles(demand=(100.0,), wind=(0.0,), solar=(0.0,))
    sc = dataclasses.replace(toy3, profiles=prof)
    with pytest.raises(ValueError, match="exceeds total capacity"):
        build_buc(sc)


def test_model_stats_stable_regression(island):
    uc = build_buc(island)
    stats = uc.model.stats()
    again = build_buc(island).model.stats()
    assert stats == again
    # frozen snapshot: 11 units x 24 h
    assert stats.n_variables == 1848
    assert stats.n_discrete == 792
    assert stats.n_constraints == 2608


def test_extraction_rounds_near_integral(toy3):
    uc = build_buc(toy3)
    sol = solve(uc.model, options=TIGHT)
    # nudge one commitment value within tolerance
    name = "u[1,1]"
    i = dict(zip(sol.names, range(len(sol.names))))[name]
    sol.values[i] = round(sol.values[i]) + 3e-7
    sol._by_name = None
    sched = extract_schedule(sol, toy3)
    assert sched.u[0, 0] in (0, 1)


def test_extraction_rejects_fractional(toy3):
    uc = build_buc(toy3)
    sol = solve(uc.model, options=TIGHT)
    i = dict(zip(sol.names, range(len(sol.names))))["u[1,1]"]
    sol.values[i] = 0.5
    sol._by_name = None
    with pytest.raises(ScheduleExtractionError, match="not integral"):
        extract_schedule(sol, toy3)


def test_validate_flags_min_output(toy3):
    uc = build_buc(toy3)
    sol = solve(uc.model, options=TIGHT)
    sched = extract_schedule(sol, toy3)
    assert validate_schedule(sched, toy3) == []
    bad = UcSchedule(sched.unit_ids, sched.u.copy(), sched.v.copy(),
                     sched.w.copy(), sched.p.copy(), sched.r.copy())
    t = int(np.argmax(bad.u[0]))
    bad.p[0, t] = toy3.generators[0].p_min - 1.0
    names = {v.constraint for v in validate_schedule(bad, toy3)}
    assert "min_output" in names


def test_validate_flags_min_up_window():
    gens = (make_gen("a", 10.0, 2.0, 12.0, 2.0, 20.0, min_up=3, min_down=1),
            make_gen("b", 10.0, 2.0, 12.0, 2.0, 20.0))
    sc = make_scenario(gens, demand=(4.0, 4.0, 4.0, 4.0))
    u = np.array([[1, 1, 0, 0], [1, 1, 1, 1]])  # unit a up 2h < min_up 3
    v = np.array([[1, 0, 0, 0], [1, 0, 0, 0]])
    w = np.array([[0, 0, 1, 0], [0, 0, 0, 0]])
    p = np.array([[2.0, 2.0, 0.0, 0.0], [2.0, 2.0, 4.0, 4.0]])
    r = np.zeros((2, 4))
    sched = UcSchedule(("a", "b"), u, v, w, p, r)
    hits = [x for x in validate_schedule(sched, sc) if x.constraint == "min_up"]
    assert hits and hits[0].unit == "a" and hits[0].hour == 3


def test_violations_report_text(toy3):
    uc = build_buc(toy3)
    sol = solve(uc.model, options=TIGHT)
    sched = extract_schedule(sol, toy3)
    assert "no violations" in violations_report(validate_schedule(sched, toy3))


def test_schedule_cost_zero_when_all_off(toy3):
    n, horizon = 3, 4
    sched = UcSchedule(tuple(g.id for g in toy3.generators),
                       np.zeros((n, horizon), dtype=int),
                       np.zeros((n, horizon), dtype=int),
                       np.zeros((n, horizon), dtype=int),
                       np.zeros((n, horizon)), np.zeros((n, horizon)))
    assert schedule_cost(sched, cost_model_from(toy3)) == 0.0


def test_schedule_cost_single_linear_segment():
    # 10 EUR/MWh through the origin: curve (2,20) -> (8,80)
    from fcucbench.system import GeneratorParams
    g = GeneratorParams(id="g", p_max=8.0, p_min=2.0, m_base=10.0, h=2.0,
                        k=20.0, t_gov=2.0, ramp_up=8.0, ramp_down=8.0,
                        min_up=1, min_down=1, for_rate=0.0,
                        cost_points=((2.0, 20.0), (8.0, 80.0)),
                        startup_cost=0.0)
    g2 = make_gen("h", 8.0, 2.0, 10.0, 2.0, 20.0)
    sc = make_scenario((g, g2), demand=(6.0,))
    cm = cost_model_from(sc)
    sched = UcSchedule(("g", "h"), np.array([[1], [0]]), np.array([[1], [0]]),
                       np.zeros((2, 1), dtype=int), np.array([[5.0], [0.0]]),
                       np.zeros((2, 1)))
    assert schedule_cost(sched, cm) == pytest.approx(50.0)


def test_cost_matches_solver_objective_on_solved_instances():
    rng = np.random.default_rng(5)
    for _ in range(6):
        sc = small_random_scenario(rng)
        uc = build_buc(sc)
        sol = solve(uc.model, options=TIGHT)
        if not sol.ok:
            continue
        sched = extract_schedule(sol, sc)
        cost = schedule_cost(sched, uc.cost_model)
        assert cost == pytest.approx(sol.objective, rel=1e-6)


def test_reserve_rule_holds_in_extracted_schedules(island_buc):
    _, _, sched = island_buc
    assert reserve_shortfalls(sched, sched_scenario(island_buc)) == []


def sched_scenario(island_buc):
    uc, _, _ = island_buc
    return uc.scenario


def test_demand_scaling_monotonicity(toy3):
    import dataclasses
    uc = build_buc(toy3)
    base = solve(uc.model, options=TIGHT)
    prof = toy3.profiles
    scaled = dataclasses.replace(toy3, profiles=Profiles(
        demand=tuple(1.1 * d for d in prof.demand),
        wind=prof.wind, solar=prof.solar))
    up = solve(build_buc(scaled).model, options=TIGHT)
    assert up.ok
    assert up.objective >= base.objective - 1e-6


def test_schedule_csv_round_trip(tmp_path, toy3):
    uc = build_buc(toy3)
    sol = solve(uc.model, options=TIGHT)
    sched = extract_schedule(sol, toy3)
    path = str(tmp_path / "sched.csv")
    save_schedule_csv(sched, path)
    back = load_schedule_csv(path, toy3)
    assert np.array_equal(back.u, sched.u)
    assert np.array_equal(back.v, sched.v)
    assert np.array_equal(back.w, sched.w)
    assert np.allclose(back.p, sched.p)
    assert np.allclose(back.r, sched.r)
