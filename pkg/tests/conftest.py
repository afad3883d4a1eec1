import os

import numpy as np
import pytest

from fcucbench.system import (GeneratorParams, Profiles, Scenario,
                              SystemConfig, UflsScheme, UflsStage,
                              load_scenario)

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "fcucbench",
                        "data")


def make_gen(uid, p_max, p_min, m_base, h, k, t_gov=2.0, marginal=50.0,
             startup=100.0, min_up=1, min_down=1, ramp=None, for_rate=0.02):
    """Convex 3-point cost curve with a mild quadratic lift."""
    ramp = p_max if ramp is None else ramp
    mid = (p_min + p_max) / 2.0
    pts = ((p_min, p_min * marginal),
           (mid, mid * marginal * 1.02),
           (p_max, p_max * marginal * 1.08))
    return GeneratorParams(
        id=uid, p_max=p_max, p_min=p_min, m_base=m_base, h=h, k=k,
        t_gov=t_gov, ramp_up=ramp, ramp_down=ramp, min_up=min_up,
        min_down=min_down, for_rate=for_rate, cost_points=pts,
        startup_cost=startup,
    )


DEFAULT_STAGES = (
    UflsStage(trigger_freq=49.0, shed_fraction=0.10, relay_delay=0.30),
    UflsStage(trigger_freq=48.8, shed_fraction=0.10, relay_delay=0.30),
    UflsStage(trigger_freq=48.6, shed_fraction=0.15, relay_delay=0.30),
    UflsStage(trigger_freq=48.4, shed_fraction=0.20, relay_delay=0.30),
)


def make_scenario(gens, demand, wind=None, solar=None, d=0.0,
                  delivery_time=2.0, rocof_limit=4.0, qss_limit=0.5,
                  nadir_limit=2.5, stages=DEFAULT_STAGES, breaker=0.25):
    n = len(demand)
    wind = tuple(wind) if wind is not None else (0.0,) * n
    solar = tuple(solar) if solar is not None else (0.0,) * n
    return Scenario(
        generators=tuple(gens),
        system=SystemConfig(f0=50.0, s_base=100.0, d=d,
                            reserve_delivery_time=delivery_time,
                            rocof_limit=rocof_limit, qss_limit=qss_limit,
                            nadir_limit=nadir_limit, ufls_cost=20000.0),
        profiles=Profiles(demand=tuple(demand), wind=wind, solar=solar),
        ufls=UflsScheme(stages=stages, breaker_delay=breaker),
    )


@pytest.fixture(scope="session")
def toy3():
    """Three units, four hours; enough inertia for every formulation."""
    gens = (make_gen("1", 10.0, 3.0, 12.0, 2.0, 20.0, marginal=50.0,
                     startup=200.0, min_up=2, min_down=2),
            make_gen("2", 8.0, 2.0, 10.0, 1.8, 20.0, marginal=60.0,
                     startup=150.0, min_up=2, min_down=2),
            make_gen("3", 6.0, 1.5, 8.0, 1.5, 20.0, marginal=75.0,
                     startup=100.0, min_up=2, min_down=2))
    return make_scenario(gens, demand=(8.0, 12.0, 15.0, 10.0),
                         wind=(1.0, 1.0, 2.0, 1.0),
                         solar=(0.0, 1.0, 1.0, 0.0), d=0.01)


@pytest.fixture(scope="session")
def island(request):
    return load_scenario(os.path.join(DATA_DIR, "island11.json"))


@pytest.fixture(scope="session")
def island_buc(island):
    """Solved benchmark schedule on the shipped scenario, shared across
    tests that only read it."""
    from fcucbench.milp.backend import solve
    from fcucbench.milp.model import SolveOptions
    from fcucbench.ucbase import build_buc, extract_schedule

    uc = build_buc(island)
    sol = solve(uc.model, options=SolveOptions(relative_gap=0.001,
                                               time_limit=600.0))
    assert sol.ok
    return uc, sol, extract_schedule(sol, island)
