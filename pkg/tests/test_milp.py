import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcucbench.milp import (BINARY, CONTINUOUS, INF, ModelIR, SolveOptions,
                            add_complementary_pair, add_pwl_square,
                            export_model, import_model,
                            linearize_bin_bin_product,
                            linearize_bin_cont_product,
                            pwl_square_error_bound, solve)
from fcucbench.milp.backend import BackendUnavailableError, get_backend

TIGHT = SolveOptions(relative_gap=1e-9, time_limit=60.0)


def _pwl_value(model, x_value, pwl_index=0):
    """Chord interpolation the model encodes, evaluated directly."""
    _, _, points = model.pwl_audit[pwl_index]
    xs = np.array(points)
    return float(np.interp(x_value, xs, xs ** 2))


# ---------------------------------------------------------------------------
# solve / backend


def test_solve_simple_bound():
    m = ModelIR()
    x = m.add_var("x", CONTINUOUS, 0.0, INF)
    m.add_linear("c", {x: 1.0}, ">=", 3.0)
    m.set_objective({x: 1.0})
    sol = solve(m, options=TIGHT)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(3.0)


def test_solve_infeasible_is_status_not_exception():
    m = ModelIR()
    x = m.add_var("x", CONTINUOUS, 0.0, INF)
    m.add_linear("lo", {x: 1.0}, ">=", 2.0)
    m.add_linear("hi", {x: 1.0}, "<=", 1.0)
    m.set_objective({x: 1.0})
    assert solve(m, options=TIGHT).status == "infeasible"


def test_knapsack_matches_enumeration():
    values = [5.0, 4.0, 3.0, 7.0, 6.0]
    weights = [2.0, 3.0, 1.0, 4.0, 5.0]
    cap = 8.0
    m = ModelIR()
    xs = [m.add_var(f"x{i}", BINARY) for i in range(5)]
    m.add_linear("wt", {x: w for x, w in zip(xs, weights)}, "<=", cap)
    m.set_objective({x: -v for x, v in zip(xs, values)})
    sol = solve(m, options=TIGHT)
    best = min(
        -sum(v for v, pick in zip(values, picks) if pick)
        for picks in itertools.product((0, 1), repeat=5)
        if sum(w for w, pick in zip(weights, picks) if pick) <= cap
    )
    assert sol.objective == pytest.approx(best)


def test_solution_gap_invariant():
    m = ModelIR()
    xs = [m.add_var(f"x{i}", BINARY) for i in range(6)]
    m.add_linear("c", {x: 1.0 for x in xs}, ">=", 3.0)
    m.set_objective({x: float(i + 1) for i, x in enumerate(xs)})
    opts = SolveOptions(relative_gap=0.05, time_limit=30.0)
    sol = solve(m, options=opts)
    assert sol.ok
    assert sol.gap() <= opts.relative_gap + 1e-12


def test_unknown_backend():
    with pytest.raises(BackendUnavailableError):
        get_backend("nosuchsolver")


# ---------------------------------------------------------------------------
# piecewise-linear squares


def _solve_pwl_at(x_value, n_breakpoints=5, lo=0.0, hi=4.0):
    m = ModelIR()
    x = m.add_var("x", CONTINUOUS, lo, hi)
    y = add_pwl_square(m, x, n_breakpoints)
    m.add_linear("pin", {x: 1.0}, "==", x_value)
    m.set_objective({y: 1.0})
    sol = solve(m, options=TIGHT)
    assert sol.ok
    return sol.objective, m


def test_pwl_exact_at_breakpoint():
    val, _ = _solve_pwl_at(2.0)
    assert val == pytest.approx(4.0, abs=1e-8)


def test_pwl_chord_between_breakpoints():
    val, _ = _solve_pwl_at(1.5)
    assert val == pytest.approx(2.5, abs=1e-8)


def test_pwl_max_overestimation_is_quarter_step_squared():
    m = ModelIR()
    x = m.add_var("x", CONTINUOUS, 0.0, 4.0)
    add_pwl_square(m, x, 5)
    xs = np.linspace(0.0, 4.0, 1000)
    errs = np.array([_pwl_value(m, v) - v * v for v in xs])
    assert errs.min() >= -1e-12
    assert errs.max() == pytest.approx(0.25, abs=1e-6)
    assert errs.max() <= pwl_square_error_bound(0.0, 4.0, 5) + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(-8.0, -0.5), st.floats(0.5, 8.0), st.integers(3, 12))
def test_pwl_error_bound_property(lo, hi, n):
    m = ModelIR()
    x = m.add_var("x", CONTINUOUS, lo, hi)
    add_pwl_square(m, x, n)
    bound = pwl_square_error_bound(lo, hi, n)
    xs = np.linspace(lo, hi, 1000)
    errs = np.array([_pwl_value(m, v) - v * v for v in xs])
    assert errs.min() >= -1e-9
    assert errs.max() <= bound + 1e-9


def test_pwl_requires_bounded_variable():
    m = ModelIR()
    x = m.add_var("x", CONTINUOUS, 0.0, INF)
    with pytest.raises(ValueError, match="finite bounds"):
        add_pwl_square(m, x, 5)


# ---------------------------------------------------------------------------
# products


def _product_model(b1v, b2v):
    m = ModelIR()
    b1 = m.add_var("b1", BINARY)
    b2 = m.add_var("b2", BINARY)
    z = linearize_bin_bin_product(m, b1, b2)
    m.add_linear("f1", {b1: 1.0}, "==", b1v)
    m.add_linear("f2", {b2: 1.0}, "==", b2v)
    m.set_objective({})
    sol = solve(m, options=TIGHT)
    return sol.value(m.variables[z].name)


@pytest.mark.parametrize("b1,b2", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_bin_bin_truth_table(b1, b2):
    assert _product_model(b1, b2) == pytest.approx(b1 * b2, abs=1e-9)


def test_bin_bin_diagonal_short_circuits():
    m = ModelIR()
    b = m.add_var("b", BINARY)
    assert linearize_bin_bin_product(m, b, b) == b
    assert not m.constraints


def test_bin_bin_cache_shares_variable():
    m = ModelIR()
    b1 = m.add_var("b1", BINARY)
    b2 = m.add_var("b2", BINARY)
    z1 = linearize_bin_bin_product(m, b1, b2)
    z2 = linearize_bin_bin_product(m, b2, b1)
    assert z1 == z2


def test_bin_bin_matrix_against_brute_force():
    rng = np.random.default_rng(7)
    n = 11
    for _ in range(100):
        commitment = rng.integers(0, 2, size=n)
        m = ModelIR()
        us = [m.add_var(f"u{i}", BINARY) for i in range(n)]
        zs = {}
        for i in range(n):
            for j in range(i, n):
                zs[(i, j)] = linearize_bin_bin_product(m, us[i], us[j])
        for i, val in enumerate(commitment):
            m.add_linear(f"fix{i}", {us[i]: 1.0}, "==", float(val))
        m.set_objective({})
        sol = solve(m, options=TIGHT)
        for (i, j), z in zs.items():
            want = commitment[i] * commitment[j]
            assert sol.value(m.variables[z].name) == pytest.approx(
                want, abs=1e-8), (i, j)


@pytest.mark.parametrize("b,x,expect", [(1, 3.7, 3.7), (0, 3.7, 0.0)])
def test_bin_cont_product(b, x, expect):
    m = ModelIR()
    bv = m.add_var("b", BINARY)
    xv = m.add_var("x", CONTINUOUS, 0.0, 5.0)
    z = linearize_bin_cont_product(m, bv, xv)
    m.add_linear("fb", {bv: 1.0}, "==", b)
    m.add_linear("fx", {xv: 1.0}, "==", x)
    m.set_objective({})
    sol = solve(m, options=TIGHT)
    assert sol.value(m.variables[z].name) == pytest.approx(expect, abs=1e-9)


def test_bin_cont_product_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(25):
        b = int(rng.integers(0, 2))
        x = float(rng.uniform(0.0, 9.0))
        m = ModelIR()
        bv = m.add_var("b", BINARY)
        xv = m.add_var("x", CONTINUOUS, 0.0, 9.0)
        z = linearize_bin_cont_product(m, bv, xv)
        m.add_linear("fb", {bv: 1.0}, "==", b)
        m.add_linear("fx", {xv: 1.0}, "==", x)
        m.set_objective({})
        sol = solve(m, options=TIGHT)
        assert abs(sol.value(m.variables[z].name) - b * x) <= 1e-8


def test_bin_cont_requires_upper_bound():
    m = ModelIR()
    b = m.add_var("b", BINARY)
    x = m.add_var("x", CONTINUOUS, 0.0, INF)
    with pytest.raises(ValueError, match="finite bounds"):
        linearize_bin_cont_product(m, b, x)


# ---------------------------------------------------------------------------
# complementary pair


def _comp_model(lhs_value, use_indicators):
    m = ModelIR()
    lv = m.add_var("l", CONTINUOUS, -10.0, 10.0)
    pos = m.add_var("pos", CONTINUOUS, 0.0, 10.0)
    neg = m.add_var("neg", CONTINUOUS, 0.0, 10.0)
    sw = m.add_var("sw", BINARY)
    add_complementary_pair(m, "cp", {lv: 1.0}, pos, neg, sw, 10.0,
                           use_indicators=use_indicators)
    m.add_linear("pin", {lv: 1.0}, "==", lhs_value)
    m.set_objective({})
    return m, solve(m, options=TIGHT)


@pytest.mark.parametrize("use_indicators", [True, False])
def test_complementary_sign_split(use_indicators):
    _, sol = _comp_model(5.0, use_indicators)
    assert sol.value("pos") == pytest.approx(5.0, abs=1e-8)
    assert sol.value("neg") == pytest.approx(0.0, abs=1e-8)
    _, sol = _comp_model(-3.0, use_indicators)
    assert sol.value("pos") == pytest.approx(0.0, abs=1e-8)
    assert sol.value("neg") == pytest.approx(3.0, abs=1e-8)


def test_complementary_sweep_product_zero():
    for lhs in np.linspace(-10.0, 10.0, 21):
        _, sol = _comp_model(float(lhs), True)
        assert sol.value("pos") * sol.value("neg") <= 1e-9


def test_complementary_rejects_nonpositive_m():
    m = ModelIR()
    lv = m.add_var("l", CONTINUOUS, -1.0, 1.0)
    pos = m.add_var("pos", CONTINUOUS, 0.0, 1.0)
    neg = m.add_var("neg", CONTINUOUS, 0.0, 1.0)
    sw = m.add_var("sw", BINARY)
    with pytest.raises(ValueError, match="big_m"):
        add_complementary_pair(m, "cp", {lv: 1.0}, pos, neg, sw, 0.0)


# ---------------------------------------------------------------------------
# big-M audit


def test_bigm_audit_within_factor_ten():
    m = ModelIR()
    b = m.add_var("b", BINARY)
    x = m.add_var("x", CONTINUOUS, 0.0, 7.0)
    linearize_bin_cont_product(m, b, x)
    lv = m.add_var("l", CONTINUOUS, -4.0, 4.0)
    pos = m.add_var("pos", CONTINUOUS, 0.0, 4.0)
    neg = m.add_var("neg", CONTINUOUS, 0.0, 4.0)
    sw = m.add_var("sw", BINARY)
    add_complementary_pair(m, "cp", {lv: 1.0}, pos, neg, sw, 4.0)
    for name, used, tight in m.bigm_audit:
        assert used <= 10.0 * tight + 1e-9, name


# ---------------------------------------------------------------------------
# export / import


def _random_model(rng, with_indicators=False):
    m = ModelIR("rnd")
    n = int(rng.integers(3, 7))
    xs = []
    for i in range(n):
        if rng.random() < 0.5:
            xs.append(m.add_var(f"b{i}", BINARY))
        else:
            xs.append(m.add_var(f"x{i}", CONTINUOUS, 0.0,
                                float(rng.uniform(1.0, 10.0))))
    for j in range(int(rng.integers(2, 5))):
        coeffs = {x: float(rng.uniform(-3.0, 3.0)) for x in xs
                  if rng.random() < 0.8}
        if not coeffs:
            coeffs = {xs[0]: 1.0}
        sense = ("<=", ">=")[int(rng.integers(0, 2))]
        bound = sum(abs(c) for c in coeffs.values())
        rhs = float(rng.uniform(0.2, 0.8)) * bound
        m.add_linear(f"c{j}", coeffs, sense, rhs if sense == "<=" else -rhs)
    if with_indicators:
        sw = m.add_var("sw", BINARY)
        m.add_indicator("ind", sw, 1, {xs[0]: 1.0}, "<=", 0.5)
    m.set_objective({x: float(rng.uniform(-2.0, 2.0)) for x in xs},
                    constant=float(rng.uniform(-1.0, 1.0)))
    return m


@pytest.mark.parametrize("fmt", ["lp", "mps"])
def test_round_trip_ten_random_models(fmt, tmp_path):
    rng = np.random.default_rng(11)
    for k in range(10):
        m = _random_model(rng)
        direct = solve(m, options=TIGHT)
        path = str(tmp_path / f"m{k}.{fmt}")
        export_model(m, fmt, path)
        back = solve(import_model(path), options=TIGHT)
        assert back.status == direct.status
        if direct.ok:
            assert back.objective == pytest.approx(direct.objective,
                                                   abs=1e-9, rel=1e-9)


def test_lp_objective_lists_all_items(tmp_path):
    m = ModelIR("knap")
    xs = [m.add_var(f"item{i}", BINARY) for i in range(5)]
    m.add_linear("wt", {x: 1.0 for x in xs}, "<=", 3.0)
    m.set_objective({x: -float(i + 1) for i, x in enumerate(xs)})
    path = str(tmp_path / "knap.lp")
    export_model(m, "lp", path)
    text = open(path).read()
    obj_line = [ln for ln in text.splitlines() if "obj:" in ln][0]
    for i in range(5):
        assert f"x{i}" in obj_line


def test_mps_with_indicators_warns_and_solves(tmp_path):
    m, direct = _comp_model(5.0, use_indicators=True)
    path = str(tmp_path / "ind.mps")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        export_model(m, "mps", path)
    assert any("big-M" in str(w.message) for w in caught)
    back = solve(import_model(path), options=TIGHT)
    assert back.ok
    assert back.value("x1") == pytest.approx(5.0, abs=1e-8)  # pos


def test_lp_keeps_indicators(tmp_path):
    m, direct = _comp_model(-3.0, use_indicators=True)
    path = str(tmp_path / "ind.lp")
    export_model(m, "lp", path)
    assert "->" in open(path).read()
    back = solve(import_model(path), options=TIGHT)
    assert back.value("x2") == pytest.approx(3.0, abs=1e-8)  # neg


def test_duplicate_variable_names_rejected():
    m = ModelIR()
    m.add_var("x", CONTINUOUS, 0.0, 1.0)
    with pytest.raises(ValueError, match="duplicate"):
        m.add_var("x", CONTINUOUS, 0.0, 1.0)


def test_constraint_references_declared_variables_only():
    m = ModelIR()
    m.add_var("x", CONTINUOUS, 0.0, 1.0)
    with pytest.raises(ValueError, match="unknown"):
        m.add_linear("c", {5: 1.0}, "<=", 1.0)
