"""Preventive frequency constraints for a unit-commitment model.

Adds rate-of-change-of-frequency and quasi-steady-state limits as plain
linear rows, a separable-programming frequency-nadir constraint (change
of variables plus piecewise-linear squares), and the learned linear
nadir-adequacy constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .milp.linearize import add_pwl_square
from .milp.model import CONTINUOUS
from .system import FEATURE_ORDER, Scenario
from .ucbase import UcModel


@dataclass(frozen=True)
class PreventiveParams:
    """Tunables of the preventive constraint set.

    ``alpha``/``beta`` rescale inertia and reserve before the
    difference-of-squares substitution; the defaults equalize both
    ranges (1/max) which conditions the piecewise grids.
    """

    rocof_limit: float
    qss_limit: float
    nadir_limit: float
    delivery_time: float = 15.0
    alpha: float | None = None
    beta: float | None = None
    pwl_breakpoints: int = 10

    @classmethod
    def from_scenario(cls, scenario: Scenario, nadir_limit: float | None = None,
                      pwl_breakpoints: int = 10) -> "PreventiveParams":
        s = scenario.system
        return cls(
            rocof_limit=s.rocof_limit,
            qss_limit=s.qss_limit,
            nadir_limit=nadir_limit if nadir_limit is not None else s.nadir_limit,
            delivery_time=s.reserve_delivery_time,
            pwl_breakpoints=pwl_breakpoints,
        )

    def validate(self):
        for name in ("rocof_limit", "qss_limit", "nadir_limit", "delivery_time"):
            if not (getattr(self, name) > 0.0):
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.pwl_breakpoints < 2:
            raise ValueError("pwl_breakpoints must be >= 2")


@dataclass(frozen=True)
class NadirClassifier:
    """Linear nadir-adequacy rule on raw features.

    ``theta`` holds the intercept followed by one coefficient per
    feature in FEATURE_ORDER; positive decision values mean the
    post-outage nadir stays within the threshold.
    """

    theta: tuple[float, ...]
    threshold_hz: float
    feature_order: tuple[str, ...] = FEATURE_ORDER
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.theta) != 5:
            raise ValueError(f"theta must have 5 entries, got {len(self.theta)}")
        if any(not math.isfinite(t) for t in self.theta):
            raise ValueError("theta must be finite")
        if tuple(self.feature_order) != FEATURE_ORDER:
            raise ValueError(f"feature_order must be {FEATURE_ORDER}")

    def decision_value(self, features) -> float:
        x = features.as_array() if hasattr(features, "as_array") else list(features)
        return self.theta[0] + sum(t * v for t, v in zip(self.theta[1:], x))

    def predict(self, features) -> int:
        """+1 for acceptable nadir, 0 for unacceptable."""
        return 1 if self.decision_value(features) >= 0.0 else 0


def add_rocof_constraints(uc: UcModel, rocof_limit: float | None = None) -> None:
    """Inertia floor per prospective outage: surviving H*M_base must keep
    the initial frequency slope within the limit; vacuous when the unit
    is offline (zero dispatch)."""
    scenario = uc.scenario
    if rocof_limit is None:
        rocof_limit = scenario.system.rocof_limit
    gens = scenario.generators
    factor = scenario.system.f0 / (2.0 * rocof_limit)
    for t in range(scenario.horizon):
        for ell, g in enumerate(gens):
            coeffs = {uc.u[i][t]: gens[i].h * gens[i].m_base
                      for i in range(len(gens)) if i != ell}
            coeffs[uc.p[ell][t]] = -factor
            uc.model.add_linear(f"rocof[{g.id},{t + 1}]", coeffs, ">=", 0.0)


def add_qss_constraints(uc: UcModel, qss_limit: float | None = None) -> None:
    """Reserve adequacy with load-damping relief: surviving reserve must
    cover the loss minus what damping absorbs at the settled deviation."""
    scenario = uc.scenario
    if qss_limit is None:
        qss_limit = scenario.system.qss_limit
    d = scenario.system.d
    for t in range(scenario.horizon):
        relief = d * scenario.profiles.demand[t] * qss_limit
        for ell, g in enumerate(scenario.generators):
            coeffs = {uc.r[i][t]: 1.0
                      for i in range(scenario.n_units) if i != ell}
            coeffs[uc.p[ell][t]] = -1.0
            uc.model.add_linear(f"qss[{g.id},{t + 1}]", coeffs, ">=", -relief)


def add_nadir_analytical(uc: UcModel, params: PreventiveParams) -> None:
    """Separable-programming nadir constraint.

    The inertia*reserve product is rewritten as a difference of squares
    of two auxiliary variables, each square (and the squared dispatch)
    approximated by a chord interpolation; the resulting row keeps the
    ramp-delivered reserve deep enough for the nadir threshold.  Offline
    units satisfy the row trivially because the dispatch terms vanish.
    """
    params.validate()
    scenario = uc.scenario
    gens = scenario.generators
    m = uc.model
    f0 = scenario.system.f0
    d = scenario.system.d
    t_del = params.delivery_time

    h_all = sum(g.h * g.m_base for g in gens)
    r_all = sum(g.p_max for g in gens)
    alpha = params.alpha if params.alpha is not None else 1.0 / h_all
    beta = params.beta if params.beta is not None else 1.0 / r_all
    if alpha * beta <= 0.0:
        raise ValueError("alpha * beta must be positive")
    q_coef = f0 * t_del / (4.0 * params.nadir_limit)

    total_cap = sum(g.p_max for g in gens)
    for t in range(scenario.horizon):
        relief = d * scenario.profiles.demand[t] * t_del * f0 / 4.0
        # capacity minus served demand caps the reserve any hour can hold
        r_cap_t = max(total_cap - scenario.profiles.net_demand(t), 0.0)
        for ell, g in enumerate(gens):
            h_max = sum(gens[i].h * gens[i].m_base
                        for i in range(len(gens)) if i != ell)
            r_max = min(sum(gens[i].p_max for i in range(len(gens))
                            if i != ell), r_cap_t)
            tag = f"[{g.id},{t + 1}]"
            x1 = m.add_var(f"nadir_x1{tag}", CONTINUOUS,
                           0.0, (alpha * h_max + beta * r_max) / 2.0)
            x2 = m.add_var(f"nadir_x2{tag}", CONTINUOUS,
                           -beta * r_max / 2.0, alpha * h_max / 2.0)
            # x1 = (alpha*H + beta*R)/2 ; x2 = (alpha*H - beta*R)/2
            c1 = {x1: 2.0}
            c2 = {x2: 2.0}
            for i in range(len(gens)):
                if i == ell:
                    continue
                hm = gens[i].h * gens[i].m_base
                c1[uc.u[i][t]] = -alpha * hm
                c2[uc.u[i][t]] = -alpha * hm
                c1[uc.r[i][t]] = -beta
                c2[uc.r[i][t]] = beta
            m.add_linear(f"nadir_x1def{tag}", c1, "==", 0.0)
            m.add_linear(f"nadir_x2def{tag}", c2, "==", 0.0)

            # only y1's pressure is upward in the nadir row; y2 and q ride
            # the hull's lower boundary (the chord) at any optimum, so
            # their adjacency binaries are redundant
            y1 = add_pwl_square(m, x1, params.pwl_breakpoints, f"nadir_y1{tag}")
            y2 = add_pwl_square(m, x2, params.pwl_breakpoints,
                                f"nadir_y2{tag}", adjacency=False)
            q = add_pwl_square(m, uc.p[ell][t], params.pwl_breakpoints,
                               f"nadir_q{tag}", adjacency=False)
            inv = 1.0 / (alpha * beta)
            m.add_linear(
                f"nadir_sep{tag}",
                {y1: inv, y2: -inv, q: -q_coef, uc.p[ell][t]: relief},
                ">=", 0.0,
            )


def add_nadir_datadriven(uc: UcModel, classifier: NadirClassifier) -> None:
    """One linear adequacy row per prospective outage; adds no binaries.

    The learned coefficients weight post-outage inertia, weighted
    governor gain, lost dispatch and surviving reserve, all affine in
    the commitment variables.
    """
    th = classifier.theta
    scenario = uc.scenario
    gens = scenario.generators
    for t in range(scenario.horizon):
        for ell, g in enumerate(gens):
            coeffs: dict[int, float] = {}
            for i in range(len(gens)):
                if i == ell:
                    continue
                coeffs[uc.u[i][t]] = (th[1] * gens[i].h * gens[i].m_base
                                      + th[2] * gens[i].k / gens[i].t_gov)
                coeffs[uc.r[i][t]] = th[4]
            coeffs[uc.p[ell][t]] = th[3]
            uc.model.add_linear(f"nadir_ml[{g.id},{t + 1}]", coeffs,
                                ">=", -th[0])
