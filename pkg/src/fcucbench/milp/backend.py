"""Pluggable solve backends.

The reference backend drives HiGHS through scipy.optimize.milp.  It has
no indicator-constraint support, so models are materialized to big-M
form before the call; it runs single-threaded, which makes solves
deterministic regardless of the seed option.
"""

from __future__ import annotations

import math
import time

import numpy as np
import scipy.optimize as sopt
import scipy.sparse as sp

from .model import BINARY, ModelIR, Solution, SolveOptions


class BackendUnavailableError(RuntimeError):
    pass


class SolverBackend:
    """Interface every backend implements.

    ``shareable`` declares whether one instance may serve concurrent
    solves; the default policy is one instance per solve.
    """

    name = "abstract"
    supports_indicators = False
    shareable = False

    def solve(self, model: ModelIR, options: SolveOptions) -> Solution:
        raise NotImplementedError


class HighsBackend(SolverBackend):
    name = "highs"
    supports_indicators = False
    shareable = True  # scipy call is stateless

    def solve(self, model: ModelIR, options: SolveOptions) -> Solution:
        options.validate()
        mat = model.materialized() if model.indicators else model
        n = len(mat.variables)
        c = np.zeros(n)
        for idx, coef in mat.objective.items():
            c[idx] += coef
        integrality = np.array(
            [1 if v.kind == BINARY else 0 for v in mat.variables], dtype=np.uint8
        )
        lb = np.array([v.lb for v in mat.variables])
        ub = np.array([v.ub for v in mat.variables])

        rows, cols, vals = [], [], []
        con_lb = np.empty(len(mat.constraints))
        con_ub = np.empty(len(mat.constraints))
        for i, con in enumerate(mat.constraints):
            for idx, coef in con.coeffs.items():
                if coef != 0.0:
                    rows.append(i)
                    cols.append(idx)
                    vals.append(coef)
            if con.sense == "<=":
                con_lb[i], con_ub[i] = -np.inf, con.rhs
            elif con.sense == ">=":
                con_lb[i], con_ub[i] = con.rhs, np.inf
            else:
                con_lb[i] = con_ub[i] = con.rhs
        a = sp.csc_array((vals, (rows, cols)), shape=(len(mat.constraints), n))

        t0 = time.perf_counter()
        res = sopt.milp(
            c=c,
            constraints=sopt.LinearConstraint(a, con_lb, con_ub),
            integrality=integrality,
            bounds=sopt.Bounds(lb, ub),
            options={
                "mip_rel_gap": options.relative_gap,
                "time_limit": options.time_limit,
                "presolve": True,
                "disp": False,
            },
        )
        wall = time.perf_counter() - t0

        names = tuple(v.name for v in mat.variables)
        if res.status == 2:
            return Solution("infeasible", None, None, None, wall, names)
        values = None if res.x is None else [float(x) for x in res.x]
        objective = None
        if values is not None:
            objective = float(res.fun) + mat.objective_constant
        bound = getattr(res, "mip_dual_bound", None)
        if bound is not None:
            bound = float(bound) + mat.objective_constant
        elif objective is not None:
            bound = objective  # LP relaxation-free problems: exact
        if values is None:
            return Solution("time_limit", None, None, bound, wall, names)
        gap = abs(objective - bound) / max(1.0, abs(objective))
        if res.status == 0:
            status = "optimal" if gap <= 1e-9 else "gap_reached"
        elif gap <= options.relative_gap + 1e-12:
            status = "gap_reached"
        else:
            status = "time_limit"
        return Solution(status, objective, values, bound, wall, names)


_BACKENDS = {"highs": HighsBackend}


def get_backend(name: str) -> SolverBackend:
    try:
        cls = _BACKENDS[name]
    except KeyError:
        raise BackendUnavailableError(
            f"unknown solver backend {name!r}; available: {sorted(_BACKENDS)}"
        ) from None
    return cls()


def register_backend(name: str, cls) -> None:
    _BACKENDS[name] = cls


def solve(model: ModelIR, backend: str | SolverBackend = "highs",
          options: SolveOptions | None = None) -> Solution:
    """Solve a model, returning a Solution whose status is data, not an
    exception (infeasibility included)."""
    if isinstance(backend, str):
        backend = get_backend(backend)
    if options is None:
        options = SolveOptions()
    return backend.solve(model, options)
