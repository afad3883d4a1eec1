"""Linearization primitives shared by every formulation builder.

Covers piecewise-linear squares (lambda formulation with adjacency
binaries), binary*binary and binary*continuous products, and the
complementary split used for switched estimators.  Every big-M is
derived from the operand variable's own bounds and registered on the
model's audit trail.
"""

from __future__ import annotations

from .model import BINARY, CONTINUOUS, ModelIR


def add_pwl_square(model: ModelIR, x: int, n_breakpoints: int = 10,
                   name: str | None = None, adjacency: bool = True) -> int:
    """Add y restricted to the chord interpolation of x**2.

    Equally spaced breakpoints over x's bounds; a convex-combination
    (lambda) formulation restricted to one segment by adjacency
    binaries.  At breakpoints y == x**2 exactly; in between y
    overestimates x**2 by at most step**2 / 4.

    With ``adjacency=False`` the binaries are dropped and y may float up
    to the hull of the breakpoints; sound only where the constraint
    pressure on y is downward (then the optimum lands on the chord, so
    the projected feasible set is unchanged).
    """
    if n_breakpoints < 2:
        raise ValueError(f"need at least 2 breakpoints, got {n_breakpoints}")
    lo, hi = model.require_finite_bounds(x, "add_pwl_square")
    if not lo < hi:
        raise ValueError(f"add_pwl_square: need lo < hi, got [{lo}, {hi}]")
    if name is None:
        name = f"sq({model.variables[x].name})"

    step = (hi - lo) / (n_breakpoints - 1)
    points = tuple(lo + step * k for k in range(n_breakpoints))
    y = model.add_var(name, CONTINUOUS,
                      lb=min(p * p for p in points),
                      ub=max(p * p for p in points))
    lams = [model.add_var(f"{name}#lam{k}", CONTINUOUS, 0.0, 1.0)
            for k in range(n_breakpoints)]

    model.add_linear(f"{name}#sum", {l: 1.0 for l in lams}, "==", 1.0)
    cx = {l: points[k] for k, l in enumerate(lams)}
    cx[x] = -1.0
    model.add_linear(f"{name}#x", cx, "==", 0.0)
    cy = {l: points[k] ** 2 for k, l in enumerate(lams)}
    cy[y] = -1.0
    model.add_linear(f"{name}#y", cy, "==", 0.0)

    if adjacency:
        segs = [model.add_var(f"{name}#seg{k}", BINARY)
                for k in range(n_breakpoints - 1)]
        model.add_linear(f"{name}#one_seg", {s: 1.0 for s in segs}, "==", 1.0)
        for k, l in enumerate(lams):
            cover = {l: 1.0}
            if k > 0:
                cover[segs[k - 1]] = -1.0
            if k < n_breakpoints - 1:
                cover[segs[k]] = cover.get(segs[k], 0.0) - 1.0
            model.add_linear(f"{name}#adj{k}", cover, "<=", 0.0)

    model.pwl_audit.append((x, y, points))
    return y


def pwl_square_error_bound(lo: float, hi: float, n_breakpoints: int) -> float:
    """Worst-case chord overestimation of x**2: step**2 / 4."""
    step = (hi - lo) / (n_breakpoints - 1)
    return step * step / 4.0


def linearize_bin_bin_product(model: ModelIR, b1: int, b2: int) -> int:
    """z == b1*b2 via the standard three-inequality envelope.

    Diagonal products short-circuit to the operand itself.  Results are
    cached so repeated requests share one variable.
    """
    for b in (b1, b2):
        if model.variables[b].kind != BINARY:
            raise ValueError(
                f"linearize_bin_bin_product: {model.variables[b].name!r} "
                "is not binary"
            )
    if b1 == b2:
        return b1
    key = (min(b1, b2), max(b1, b2))
    cached = model._bb_cache.get(key)
    if cached is not None:
        return cached
    n1 = model.variables[key[0]].name
    n2 = model.variables[key[1]].name
    z = model.add_var(f"and({n1},{n2})", BINARY)
    model.add_linear(f"and({n1},{n2})#le1", {z: 1.0, key[0]: -1.0}, "<=", 0.0)
    model.add_linear(f"and({n1},{n2})#le2", {z: 1.0, key[1]: -1.0}, "<=", 0.0)
    model.add_linear(f"and({n1},{n2})#ge",
                     {z: 1.0, key[0]: -1.0, key[1]: -1.0}, ">=", -1.0)
    model._bb_cache[key] = z
    return z


def linearize_bin_cont_product(model: ModelIR, b: int, x: int) -> int:
    """z == b*x for binary b and continuous x in [0, X].

    The big-M is x's own upper bound.  Cached per (b, x) pair.
    """
    if model.variables[b].kind != BINARY:
        raise ValueError(
            f"linearize_bin_cont_product: {model.variables[b].name!r} "
            "is not binary"
        )
    xlb, xub = model.require_finite_bounds(x, "linearize_bin_cont_product")
    if xlb < 0.0:
        raise ValueError(
            f"linearize_bin_cont_product: {model.variables[x].name!r} "
            f"must be nonnegative, lb {xlb}"
        )
    key = (b, x)
    cached = model._bc_cache.get(key)
    if cached is not None:
        return cached
    nb = model.variables[b].name
    nx = model.variables[x].name
    name = f"mul({nb},{nx})"
    z = model.add_var(name, CONTINUOUS, 0.0, xub)
    model.add_linear(f"{name}#cap", {z: 1.0, b: -xub}, "<=", 0.0)
    model.add_linear(f"{name}#le_x", {z: 1.0, x: -1.0}, "<=", 0.0)
    model.add_linear(f"{name}#ge", {z: 1.0, x: -1.0, b: -xub}, ">=", -xub)
    model.note_bigm(name, xub, xub)
    model._bc_cache[key] = z
    return z


def add_complementary_pair(model: ModelIR, name: str,
                           lhs_coeffs: dict[int, float], pos: int, neg: int,
                           switch: int, big_m: float,
                           use_indicators: bool = True) -> None:
    """Split an affine expression into pos - neg with pos*neg == 0.

    ``switch`` steers which side may be nonzero (switch == 1 allows pos).
    With ``use_indicators`` the exclusivity is expressed as two indicator
    constraints; otherwise as big-M rows using ``big_m``, which must
    dominate the attainable |lhs|.
    """
    if big_m <= 0.0:
        raise ValueError(f"{name}: big_m must be positive, got {big_m}")
    if model.variables[switch].kind != BINARY:
        raise ValueError(f"{name}: switch must be binary")
    split = dict(lhs_coeffs)
    split[pos] = split.get(pos, 0.0) - 1.0
    split[neg] = split.get(neg, 0.0) + 1.0
    model.add_linear(f"{name}#split", split, "==", 0.0)
    lo, hi = model.expr_range(lhs_coeffs)
    tight = max(abs(lo), abs(hi), 1e-12)
    if big_m < tight - 1e-9:
        raise ValueError(
            f"{name}: big_m {big_m} below attainable |lhs| bound {tight}"
        )
    if use_indicators:
        model.add_indicator(f"{name}#pos0", switch, 0, {pos: 1.0}, "<=", 0.0)
        model.add_indicator(f"{name}#neg0", switch, 1, {neg: 1.0}, "<=", 0.0)
    else:
        model.add_linear(f"{name}#pos_cap", {pos: 1.0, switch: -big_m}, "<=", 0.0)
        model.add_linear(f"{name}#neg_cap", {neg: 1.0, switch: big_m}, "<=", big_m)
    model.note_bigm(name, big_m, tight)
