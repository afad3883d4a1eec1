"""Corrective load-shedding machinery for a unit-commitment model.

Builds the critical-loss estimate (inertia*gain product expanded through
a binary product matrix, squared loss through a chord interpolation),
the shed/slack switch, the response-speed headroom rows, the modified
objective that prices expected shedding, the relaxed reserve rules, and
the embedded regression-tree shed estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .milp.linearize import (add_complementary_pair, add_pwl_square,
                             linearize_bin_bin_product,
                             linearize_bin_cont_product)
from .milp.model import BINARY, CONTINUOUS
from .system import FEATURE_ORDER, Scenario
from .ucbase import UcModel


@dataclass(frozen=True)
class CorrectiveParams:
    """Tunables of the corrective constraint set.

    ``nadir_threshold`` is the deviation at which shedding is deemed to
    start (defaults to the first relay stage); ``ufls_cost`` prices one
    MW of expected shed in EUR.  Big-M constants are always derived from
    variable bounds.
    """

    nadir_threshold: float
    ufls_cost: float
    s_base: float
    pwl_breakpoints: int = 10
    use_indicators: bool = True
    include_rocof: bool = True

    @classmethod
    def from_scenario(cls, scenario: Scenario, ufls_cost: float | None = None,
                      nadir_threshold: float | None = None,
                      pwl_breakpoints: int = 10) -> "CorrectiveParams":
        if nadir_threshold is None:
            if scenario.ufls.stages:
                nadir_threshold = (scenario.system.f0
                                   - scenario.ufls.stages[0].trigger_freq)
            else:
                nadir_threshold = scenario.system.nadir_limit
        return cls(
            nadir_threshold=nadir_threshold,
            ufls_cost=(scenario.system.ufls_cost if ufls_cost is None
                       else ufls_cost),
            s_base=scenario.system.s_base,
            pwl_breakpoints=pwl_breakpoints,
        )

    def validate(self):
        if self.nadir_threshold <= 0.0:
            raise ValueError("nadir_threshold must be > 0")
        if self.ufls_cost < 0.0:
            raise ValueError("ufls_cost must be >= 0")
        if self.s_base <= 0.0:
            raise ValueError("s_base must be > 0")


def _gain_rates(scenario: Scenario) -> list[float]:
    return [g.k / g.t_gov for g in scenario.generators]


def add_pcrit_constraints(uc: UcModel, params: CorrectiveParams) -> dict:
    """Critical loss size per (unit, hour): the largest outage the
    surviving inertia and governor speed can absorb within the
    threshold.

    All quantities enter per-unit on the system base; the commitment
    product matrix is linearized pairwise (diagonals collapse to the
    commitment variable itself) and the squared critical loss uses a
    chord interpolation, so the estimate is exact at grid points.
    Returns (unit index, hour) -> critical-loss variable, MW.
    """
    params.validate()
    scenario = uc.scenario
    gens = scenario.generators
    m = uc.model
    s = params.s_base
    h_pu = [g.h * g.m_base / s for g in gens]
    k_pu = [(g.k / g.t_gov) * (g.m_base / s) for g in gens]
    df_pu = params.nadir_threshold / scenario.system.f0
    scale = 2.0 * df_pu * df_pu * s * s

    pcrit: dict[tuple[int, int], int] = {}
    for t in range(scenario.horizon):
        for ell, g in enumerate(gens):
            others = [i for i in range(len(gens)) if i != ell]
            ub = math.sqrt(scale * sum(h_pu[i] for i in others)
                           * sum(k_pu[j] for j in others))
            tag = f"[{g.id},{t + 1}]"
            pc = m.add_var(f"pcrit{tag}", CONTINUOUS, 0.0, ub)
            y = add_pwl_square(m, pc, params.pwl_breakpoints, f"pcrit_sq{tag}")
            coeffs = {y: 1.0}
            for i in others:
                coeffs[uc.u[i][t]] = (coeffs.get(uc.u[i][t], 0.0)
                                      - scale * h_pu[i] * k_pu[i])
            for a in range(len(others)):
                for b in range(a + 1, len(others)):
                    i, j = others[a], others[b]
                    z = linearize_bin_bin_product(m, uc.u[i][t], uc.u[j][t])
                    coeffs[z] = (coeffs.get(z, 0.0)
                                 - scale * (h_pu[i] * k_pu[j]
                                            + h_pu[j] * k_pu[i]))
            m.add_linear(f"crit_def{tag}", coeffs, "==", 0.0)
            pcrit[(ell, t)] = pc
    return pcrit


def add_ufls_switch(uc: UcModel, pcrit: dict, params: CorrectiveParams) -> dict:
    """Shed estimate per (unit, hour): the dispatch excess over the
    critical loss when positive, zero otherwise, enforced through a
    complementary pos/neg split."""
    scenario = uc.scenario
    m = uc.model
    pufls: dict[tuple[int, int], int] = {}
    for t in range(scenario.horizon):
        for ell, g in enumerate(scenario.generators):
            tag = f"[{g.id},{t + 1}]"
            pc = pcrit[(ell, t)]
            pc_ub = m.bounds(pc)[1]
            pos = m.add_var(f"pufls{tag}", CONTINUOUS, 0.0, g.p_max)
            neg = m.add_var(f"shed_slack{tag}", CONTINUOUS, 0.0, pc_ub)
            switch = m.add_var(f"shed_on{tag}", BINARY)
            add_complementary_pair(
                m, f"shed_split{tag}",
                {uc.p[ell][t]: 1.0, pc: -1.0},
                pos, neg, switch,
                big_m=max(g.p_max, pc_ub),
                use_indicators=params.use_indicators,
            )
            pufls[(ell, t)] = pos
    return pufls


def add_reserve_speed(uc: UcModel, pcrit: dict,
                      params: CorrectiveParams) -> None:
    """Headroom rows: every surviving unit must fit its speed-weighted
    share of the critical loss under its capacity; offline units are
    released through a bound-derived big-M."""
    scenario = uc.scenario
    gens = scenario.generators
    m = uc.model
    k = _gain_rates(scenario)
    for t in range(scenario.horizon):
        for ell, gl in enumerate(gens):
            pc = pcrit[(ell, t)]
            pc_ub = m.bounds(pc)[1]
            for i, gi in enumerate(gens):
                if i == ell:
                    continue
                big_m = k[i] * pc_ub
                coeffs: dict[int, float] = {}
                for j in range(len(gens)):
                    if j == ell:
                        continue
                    if j == i:
                        # p_i * u_i == p_i whenever the capacity rule holds
                        coeffs[uc.p[i][t]] = coeffs.get(uc.p[i][t], 0.0) + k[j]
                    else:
                        w = linearize_bin_cont_product(m, uc.u[j][t], uc.p[i][t])
                        coeffs[w] = coeffs.get(w, 0.0) + k[j]
                    coeffs[uc.u[j][t]] = (coeffs.get(uc.u[j][t], 0.0)
                                          - gi.p_max * k[j])
                coeffs[pc] = k[i]
                coeffs[uc.u[i][t]] = coeffs.get(uc.u[i][t], 0.0) + big_m
                name = f"headroom[{gi.id},{gl.id},{t + 1}]"
                m.add_linear(name, coeffs, "<=", big_m)
                m.note_bigm(name, big_m, big_m)


def apply_corrective_objective(uc: UcModel, pufls: dict,
                               params: CorrectiveParams) -> None:
    """Price expected shedding: cost per MW times each unit's forced
    outage rate times its shed estimate."""
    gens = uc.scenario.generators
    uc.model.add_objective_terms({
        var: params.ufls_cost * gens[ell].for_rate
        for (ell, t), var in sorted(pufls.items())
    })


def apply_corrective_reserve(uc: UcModel, pufls: dict, variant: str,
                             params: CorrectiveParams | None = None) -> None:
    """Reserve rules that account for the shed estimate.

    ``aggregate``: surviving reserve covers the loss net of shedding.
    ``speed_share``: each survivor holds reserve proportional to its
    governor speed share of the net loss, linearized like the headroom
    rows.
    """
    scenario = uc.scenario
    gens = scenario.generators
    m = uc.model
    if variant == "aggregate":
        for t in range(scenario.horizon):
            for ell, g in enumerate(gens):
                coeffs = {uc.r[i][t]: 1.0
                          for i in range(len(gens)) if i != ell}
                coeffs[uc.p[ell][t]] = -1.0
                coeffs[pufls[(ell, t)]] = 1.0
                m.add_linear(f"reserve_shed[{g.id},{t + 1}]", coeffs, ">=", 0.0)
    elif variant == "speed_share":
        k = _gain_rates(scenario)
        for t in range(scenario.horizon):
            for ell, gl in enumerate(gens):
                for i, gi in enumerate(gens):
                    if i == ell:
                        continue
                    big_m = k[i] * gl.p_max
                    coeffs: dict[int, float] = {}
                    for j in range(len(gens)):
                        if j == ell:
                            continue
                        if j == i:
                            coeffs[uc.r[i][t]] = (coeffs.get(uc.r[i][t], 0.0)
                                                  + k[j])
                        else:
                            w = linearize_bin_cont_product(m, uc.u[j][t],
                                                           uc.r[i][t])
                            coeffs[w] = coeffs.get(w, 0.0) + k[j]
                    coeffs[uc.p[ell][t]] = -k[i]
                    coeffs[pufls[(ell, t)]] = k[i]
                    coeffs[uc.u[i][t]] = coeffs.get(uc.u[i][t], 0.0) - big_m
                    name = f"reserve_share[{gi.id},{gl.id},{t + 1}]"
                    m.add_linear(name, coeffs, ">=", -big_m)
                    m.note_bigm(name, big_m, big_m)
    else:
        raise ValueError(f"unknown reserve variant {variant!r}")


# ---------------------------------------------------------------------------
# Regression-tree shed estimator


@dataclass(frozen=True)
class UflsTreeModel:
    """Two-node, three-leaf regression tree on the outage features.

    Each internal node carries a linear classifier (intercept + one
    coefficient per feature); ``leaf_partition[n]`` lists the leaves on
    the nonnegative and negative side of node n.  Leaves carry linear
    regressions; ``epsilon`` realizes the strict inequality of the
    negative side, and ``bounds`` records the training feature box.
    """

    node_coeffs: tuple[tuple[float, ...], ...]  # 2 x 5
    leaf_coeffs: tuple[tuple[float, ...], ...]  # 3 x 5
    leaf_partition: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    epsilon: float
    bounds: tuple[tuple[float, float], ...]  # 4 x (lo, hi)
    feature_order: tuple[str, ...] = FEATURE_ORDER
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.node_coeffs) != 2 or any(len(c) != 5 for c in self.node_coeffs):
            raise ValueError("node_coeffs must be 2 x 5")
        if len(self.leaf_coeffs) != 3 or any(len(c) != 5 for c in self.leaf_coeffs):
            raise ValueError("leaf_coeffs must be 3 x 5")
        if len(self.leaf_partition) != 2:
            raise ValueError("need one partition per node")
        for ge, lt in self.leaf_partition:
            if sorted(ge) + sorted(lt) and set(ge) & set(lt):
                raise ValueError("partition sides overlap")
        all_leaves = set(self.leaf_partition[0][0]) | set(self.leaf_partition[0][1])
        if all_leaves != {0, 1, 2}:
            raise ValueError("root partition must cover leaves {0, 1, 2}")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be > 0")
        for coeffs in self.node_coeffs + self.leaf_coeffs:
            if any(not math.isfinite(c) for c in coeffs):
                raise ValueError("coefficients must be finite")

    def node_value(self, n: int, x) -> float:
        c = self.node_coeffs[n]
        return c[0] + sum(ci * xi for ci, xi in zip(c[1:], x))

    def leaf_value(self, e: int, x) -> float:
        c = self.leaf_coeffs[e]
        return c[0] + sum(ci * xi for ci, xi in zip(c[1:], x))

    def route(self, features) -> int:
        """Leaf index for a feature vector, following both splits."""
        x = (features.as_array() if hasattr(features, "as_array")
             else list(features))
        candidates = {0, 1, 2}
        for n, (ge, lt) in enumerate(self.leaf_partition):
            side = ge if self.node_value(n, x) >= 0.0 else lt
            remaining = candidates & set(side)
            if remaining:
                candidates = remaining
        # both splits applied; exactly one leaf survives
        return min(candidates)

    def evaluate(self, features, clamp: bool = True) -> float:
        x = (features.as_array() if hasattr(features, "as_array")
             else list(features))
        val = self.leaf_value(self.route(x), x)
        return max(val, 0.0) if clamp else val

    def near_boundary(self, features, margin: float | None = None) -> bool:
        """True when either split value sits within the strictness margin."""
        if margin is None:
            margin = self.epsilon
        x = (features.as_array() if hasattr(features, "as_array")
             else list(features))
        return any(abs(self.node_value(n, x)) <= margin for n in range(2))


def add_tree_embedding(uc: UcModel, tree: UflsTreeModel,
                       params: CorrectiveParams) -> dict:
    """Embed the tree: leaf-choice binaries, routing rows per node, the
    chosen leaf's regression value, and a clamp at zero.

    Feature expressions are affine in the commitment, dispatch and
    reserve variables; routing big-Ms come from those expressions'
    bounds.  Returns (unit index, hour) -> shed-estimate variable.
    """
    scenario = uc.scenario
    gens = scenario.generators
    m = uc.model
    eps = tree.epsilon
    pufls: dict[tuple[int, int], int] = {}

    for t in range(scenario.horizon):
        for ell, g in enumerate(gens):
            tag = f"[{g.id},{t + 1}]"

            def affine(c) -> tuple[dict[int, float], float]:
                coeffs: dict[int, float] = {}
                for i in range(len(gens)):
                    if i == ell:
                        continue
                    coeffs[uc.u[i][t]] = (c[1] * gens[i].h * gens[i].m_base
                                          + c[2] * gens[i].k / gens[i].t_gov)
                    coeffs[uc.r[i][t]] = c[4]
                coeffs[uc.p[ell][t]] = c[3]
                return coeffs, c[0]

            zs = [m.add_var(f"leaf{e}{tag}", BINARY) for e in range(3)]
            m.add_linear(f"leaf_pick{tag}", {z: 1.0 for z in zs}, "==", 1.0)

            for n in range(2):
                coeffs, const = affine(tree.node_coeffs[n])
                lo, hi = m.expr_range(coeffs, const)
                ge, lt = tree.leaf_partition[n]
                m_lo = min(lo, 0.0)
                m_hi = max(hi + eps, eps)
                row = dict(coeffs)
                for e in ge:
                    row[zs[e]] = row.get(zs[e], 0.0) + m_lo
                m.add_linear(f"node{n}_ge{tag}", row, ">=", m_lo - const)
                m.note_bigm(f"node{n}_ge{tag}", -m_lo if m_lo else eps,
                            max(-lo, eps))
                row = dict(coeffs)
                for e in lt:
                    row[zs[e]] = row.get(zs[e], 0.0) + m_hi
                m.add_linear(f"node{n}_lt{tag}", row, "<=", m_hi - eps - const)
                m.note_bigm(f"node{n}_lt{tag}", m_hi, max(hi + eps, eps))

            leaf_ranges = [m.expr_range(*affine(c)) for c in tree.leaf_coeffs]
            p_lo = min(lo for lo, _ in leaf_ranges)
            p_hi = max(hi for _, hi in leaf_ranges)
            p_hat = m.add_var(f"shed_hat{tag}", CONTINUOUS, p_lo, p_hi)
            for e in range(3):
                coeffs, const = affine(tree.leaf_coeffs[e])
                row = dict(coeffs)
                row[p_hat] = row.get(p_hat, 0.0) - 1.0
                if params.use_indicators:
                    m.add_indicator(f"leaf_val{e}{tag}", zs[e], 1, row,
                                    "==", -const)
                else:
                    lo_e, hi_e = leaf_ranges[e]
                    m_up = max(hi_e - p_lo, 0.0)
                    m_dn = max(p_hi - lo_e, 0.0)
                    up = dict(row)
                    up[zs[e]] = up.get(zs[e], 0.0) + m_up
                    m.add_linear(f"leaf_val{e}_hi{tag}", up, "<=",
                                 -const + m_up)
                    dn = dict(row)
                    dn[zs[e]] = dn.get(zs[e], 0.0) - m_dn
                    m.add_linear(f"leaf_val{e}_lo{tag}", dn, ">=",
                                 -const - m_dn)
                    m.note_bigm(f"leaf_val{e}{tag}", max(m_up, m_dn),
                                max(m_up, m_dn))

            shed = m.add_var(f"pufls{tag}", CONTINUOUS, 0.0, max(p_hi, 0.0))
            m.add_linear(f"shed_floor{tag}", {shed: 1.0, p_hat: -1.0},
                         ">=", 0.0)
            pos = m.add_var(f"shed_pos{tag}", BINARY)
            if params.use_indicators:
                m.add_indicator(f"shed_track{tag}", pos, 1,
                                {shed: 1.0, p_hat: -1.0}, "<=", 0.0)
                m.add_indicator(f"shed_zero{tag}", pos, 0, {shed: 1.0},
                                "<=", 0.0)
            else:
                m_neg = max(-p_lo, 0.0)
                m_pos = max(p_hi, 1e-9)
                m.add_linear(f"shed_track{tag}",
                             {shed: 1.0, p_hat: -1.0, pos: m_neg},
                             "<=", m_neg)
                m.add_linear(f"shed_zero{tag}", {shed: 1.0, pos: -m_pos},
                             "<=", 0.0)
                m.note_bigm(f"shed_clamp{tag}", max(m_neg, m_pos),
                            max(m_neg, m_pos, 1e-9))
            pufls[(ell, t)] = shed
    return pufls
