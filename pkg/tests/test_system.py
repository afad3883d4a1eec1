import dataclasses
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcucbench.system import (FeatureVector, ScenarioParseError,
                              ScenarioValidationError, aggregate_inertia,
                              compute_features, load_scenario, save_scenario,
                              weighted_gain)

from conftest import DATA_DIR, make_gen, make_scenario

ISLAND = os.path.join(DATA_DIR, "island11.json")


class FakeSchedule:
    def __init__(self, u, p, r):
        self.u = np.asarray(u)
        self.p = np.asarray(p)
        self.r = np.asarray(r)


def test_sample_scenario_loads():
    sc = load_scenario(ISLAND)
    assert sc.n_units == 11
    assert sc.horizon == 24
    u11 = sc.generators[sc.unit_index("11")]
    assert u11.p_max == 21.0
    assert u11.h == 6.5
    assert u11.m_base == 26.82
    assert u11.k == 21.25


def test_pmin_above_pmax_names_unit(tmp_path):
    sc = load_scenario(ISLAND)
    bad = dataclasses.replace(sc.generators[2], p_min=5.0, p_max=4.0)
    gens = list(sc.generators)
    gens[2] = bad
    broken = dataclasses.replace(sc, generators=tuple(gens))
    violations = broken.validate()
    assert any("generators[2]" in v and "p_max" in v for v in violations)


def test_missing_solar_column_is_parse_error(tmp_path):
    prof = tmp_path / "p.csv"
    prof.write_text("hour,demand_mw,wind_mw\n1,10,1\n")
    with pytest.raises(ScenarioParseError, match="solar_mw"):
        load_scenario(ISLAND, profiles_path=str(prof))


def test_validation_error_lists_every_violation():
    gens = (make_gen("a", 5.0, 1.0, 6.0, 1.5, 20.0),
            make_gen("b", 5.0, 1.0, 6.0, 1.5, 20.0))
    sc = make_scenario(gens, demand=(4.0,))
    bad = dataclasses.replace(
        sc,
        generators=(dataclasses.replace(gens[0], h=-1.0, t_gov=0.0), gens[1]),
    )
    violations = bad.validate()
    assert any(".h:" in v for v in violations)
    assert any(".t_gov:" in v for v in violations)


def test_aggregate_inertia_pair():
    sc = load_scenario(ISLAND)
    commitment = [0] * 11
    commitment[sc.unit_index("1")] = 1
    commitment[sc.unit_index("11")] = 1
    # only unit 1 survives: 1.75 s on 5.4 MVA
    assert aggregate_inertia(sc, commitment, "11") == pytest.approx(9.45)


def test_aggregate_inertia_all_on():
    sc = load_scenario(ISLAND)
    commitment = [1] * 11
    expected = sum(g.h * g.m_base for g in sc.generators
                   if g.id != "1")
    assert aggregate_inertia(sc, commitment, "1") == pytest.approx(expected)


def test_offline_excluded_unit_is_error():
    sc = load_scenario(ISLAND)
    commitment = [1] * 11
    commitment[sc.unit_index("11")] = 0
    with pytest.raises(ValueError, match="offline"):
        aggregate_inertia(sc, commitment, "11")
    only = [0] * 11
    only[sc.unit_index("11")] = 1
    # outage of the only online unit leaves nothing to aggregate but is
    # itself well-defined; excluding an offline one is not
    with pytest.raises(ValueError, match="offline"):
        weighted_gain(sc, only, "1")


def test_weighted_gain_with_5s_constant():
    gens = (make_gen("1", 5.0, 1.0, 6.0, 1.5, 20.0, t_gov=5.0),
            make_gen("11", 21.0, 4.85, 26.82, 6.5, 21.25, t_gov=5.0))
    sc = make_scenario(gens, demand=(4.0,))
    assert weighted_gain(sc, [1, 1], "11") == pytest.approx(4.0)


def test_weighted_gain_linearity():
    gens = (make_gen("a", 5.0, 1.0, 6.0, 1.5, 20.0),
            make_gen("b", 5.0, 1.0, 6.0, 1.5, 20.0),
            make_gen("l", 5.0, 1.0, 6.0, 1.5, 20.0))
    sc = make_scenario(gens, demand=(4.0,))
    one = weighted_gain(sc, [1, 0, 1], "l")
    two = weighted_gain(sc, [1, 1, 1], "l")
    assert two == pytest.approx(2.0 * one)


def test_compute_features_composition():
    sc = load_scenario(ISLAND)
    i1 = sc.unit_index("1")
    i11 = sc.unit_index("11")
    u = np.zeros((11, 1), dtype=int)
    p = np.zeros((11, 1))
    r = np.zeros((11, 1))
    u[i1, 0] = u[i11, 0] = 1
    p[i11, 0] = 21.0
    p[i1, 0] = 2.35
    r[i1, 0] = 1.47
    fv = compute_features(sc, FakeSchedule(u, p, r), 0, "11")
    assert fv.h_post == pytest.approx(9.45)
    assert fv.k_hat == pytest.approx(10.0)  # K/T = 20/2 for the sample
    assert fv.p_lost == pytest.approx(21.0)
    assert fv.r_post == pytest.approx(1.47)


def test_compute_features_zero_reserve():
    sc = load_scenario(ISLAND)
    u = np.ones((11, 1), dtype=int)
    p = np.full((11, 1), 5.0)
    r = np.zeros((11, 1))
    fv = compute_features(sc, FakeSchedule(u, p, r), 0, "5")
    assert fv.r_post == 0.0


def test_features_match_manual_recomputation(toy3):
    u = np.array([[1], [1], [1]])
    p = np.array([[5.0], [4.0], [2.0]])
    r = np.array([[1.0], [2.0], [0.5]])
    sched = FakeSchedule(u, p, r)
    for lost in ("1", "2", "3"):
        ell = toy3.unit_index(lost)
        fv = compute_features(toy3, sched, 0, lost)
        gens = toy3.generators
        assert fv.h_post == pytest.approx(sum(
            g.h * g.m_base for i, g in enumerate(gens) if i != ell))
        assert fv.k_hat == pytest.approx(sum(
            g.k / g.t_gov for i, g in enumerate(gens) if i != ell))
        assert fv.p_lost == pytest.approx(p[ell, 0])
        assert fv.r_post == pytest.approx(sum(
            r[i, 0] for i in range(3) if i != ell))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.booleans(), min_size=10, max_size=10),
       st.lists(st.booleans(), min_size=10, max_size=10))
def test_aggregates_are_additive(part_a, part_b):
    sc = load_scenario(ISLAND)
    ell = sc.unit_index("11")
    # disjoint split of the surviving units
    a = [0] * 11
    b = [0] * 11
    union = [0] * 11
    others = [i for i in range(11) if i != ell]
    for i, (in_a, in_b) in zip(others, zip(part_a, part_b)):
        if in_a:
            a[i] = union[i] = 1
        elif in_b:
            b[i] = union[i] = 1
    a[ell] = b[ell] = union[ell] = 1
    total = aggregate_inertia(sc, union, "11")
    assert total == pytest.approx(
        aggregate_inertia(sc, a, "11") + aggregate_inertia(sc, b, "11"))
    total_k = weighted_gain(sc, union, "11")
    assert total_k == pytest.approx(
        weighted_gain(sc, a, "11") + weighted_gain(sc, b, "11"))


def test_removing_a_unit_strictly_decreases_aggregates():
    sc = load_scenario(ISLAND)
    full = [1] * 11
    ell = sc.unit_index("11")
    base_h = aggregate_inertia(sc, full, "11")
    base_k = weighted_gain(sc, full, "11")
    for j in range(11):
        if j == ell:
            continue
        reduced = list(full)
        reduced[j] = 0
        assert aggregate_inertia(sc, reduced, "11") < base_h
        assert weighted_gain(sc, reduced, "11") < base_k


def test_scenario_round_trip(tmp_path):
    sc = load_scenario(ISLAND)
    out = tmp_path / "copy.json"
    save_scenario(sc, str(out))
    back = load_scenario(str(out))
    assert back == sc


def test_two_decimal_precision_preserved(tmp_path):
    sc = load_scenario(ISLAND)
    assert sc.profiles.demand[0] == 44.0
    out = tmp_path / "copy.json"
    save_scenario(sc, str(out))
    again = load_scenario(str(out))
    assert again.profiles.demand == sc.profiles.demand
