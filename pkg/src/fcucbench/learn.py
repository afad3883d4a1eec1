"""Dataset generation, simulation labeling, and model training.

Produces the two learned artifacts the schedulers can embed: the linear
nadir-adequacy rule (logistic regression via iteratively reweighted
least squares) and the three-leaf shed-estimate regression tree
(logistic splits, per-leaf ordinary least squares).  Training is
deterministic for a fixed seed and dataset order.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .corrective import UflsTreeModel
from .milp.backend import solve
from .milp.model import SolveOptions
from .preventive import NadirClassifier
from .sfr import SimConfig, simulate_outage
from .system import FEATURE_ORDER, FeatureVector, Profiles, Scenario, compute_features
from .ucbase import UcModel, UcSchedule, add_reserve_adequacy, build_uc_core, extract_schedule


@dataclass(frozen=True)
class OperatingPoint:
    """One feasible system state to assess: a schedule, the hour of
    interest, and the (possibly rescaled) scenario it was solved on."""

    op_id: str
    scenario: Scenario
    schedule: UcSchedule
    hour: int  # 0-based


@dataclass(frozen=True)
class DataPoint:
    features: FeatureVector
    nadir_hz: float
    ufls_mw: float
    source: tuple[str, int, str]  # (operating point id, hour 1-based, lost unit)


@dataclass
class Dataset:
    points: list[DataPoint]
    feature_mean: tuple[float, ...] = ()
    feature_scale: tuple[float, ...] = ()
    split_seed: int = 0

    def __post_init__(self):
        seen = set()
        for pt in self.points:
            if pt.source in seen:
                raise ValueError(f"duplicate source key {pt.source}")
            seen.add(pt.source)
        if self.points and not self.feature_mean:
            x = self.feature_matrix()
            mean = x.mean(axis=0)
            scale = x.std(axis=0)
            scale[scale == 0.0] = 1.0
            self.feature_mean = tuple(float(v) for v in mean)
            self.feature_scale = tuple(float(v) for v in scale)

    def __len__(self) -> int:
        return len(self.points)

    def feature_matrix(self) -> np.ndarray:
        return np.array([pt.features.as_array() for pt in self.points])

    def nadir_labels(self) -> np.ndarray:
        return np.array([pt.nadir_hz for pt in self.points])

    def ufls_labels(self) -> np.ndarray:
        return np.array([pt.ufls_mw for pt in self.points])


# ---------------------------------------------------------------------------
# Operating-point generation


def _scaled_scenario(scenario: Scenario, factor: float) -> Scenario:
    p = scenario.profiles
    prof = Profiles(
        demand=tuple(d * factor for d in p.demand),
        wind=tuple(wv * factor for wv in p.wind),
        solar=tuple(sv * factor for sv in p.solar),
    )
    return replace(scenario, profiles=prof)


def _add_scaled_reserve(uc: UcModel, margin: float) -> None:
    n = uc.scenario.n_units
    for t in range(uc.scenario.horizon):
        for ell, g in enumerate(uc.scenario.generators):
            coeffs = {uc.r[i][t]: 1.0 for i in range(n) if i != ell}
            coeffs[uc.p[ell][t]] = -margin
            uc.model.add_linear(f"reserve_n1[{g.id},{t + 1}]", coeffs, ">=", 0.0)


def generate_operating_points(scenario: Scenario, count: int, seed: int,
                              solve_options: SolveOptions | None = None
                              ) -> list[OperatingPoint]:
    """Diverse feasible operating points.

    Solves the base commitment under demand scalings in [0.7, 1.3] and
    reserve margins in [0.6, 1.3]; every other draw additionally forces
    one or two spare units online before re-solving, which spreads the
    inertia range.  Deterministic for a fixed seed; infeasible draws are
    skipped with a warning.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if solve_options is None:
        solve_options = SolveOptions(relative_gap=0.001, time_limit=120.0)
    rng = np.random.default_rng(seed)
    points: list[OperatingPoint] = []
    draw = 0
    while len(points) < count:
        factor = float(rng.uniform(0.7, 1.3))
        margin = float(rng.uniform(0.6, 1.3))
        force_on = []
        if draw % 2 == 1:
            k = int(rng.integers(1, 3))
            force_on = sorted(rng.choice(scenario.n_units, size=k,
                                         replace=False).tolist())
        hours = rng.permutation(scenario.horizon)
        draw += 1

        variant = _scaled_scenario(scenario, factor)
        peak = max(variant.profiles.net_demand(t) for t in range(variant.horizon))
        if peak > sum(g.p_max for g in variant.generators):
            warnings.warn(f"draw {draw}: scaled demand infeasible, skipped")
            continue
        uc = build_uc_core(variant, name=f"op{draw}")
        _add_scaled_reserve(uc, margin)
        for i in force_on:
            for t in range(variant.horizon):
                uc.model.add_linear(f"force_on[{i},{t + 1}]",
                                    {uc.u[i][t]: 1.0}, "==", 1.0)
        sol = solve(uc.model, options=solve_options)
        if not sol.ok:
            warnings.warn(f"draw {draw}: solve status {sol.status}, skipped")
            continue
        schedule = extract_schedule(sol, variant)
        # up to a third of the horizon per solve keeps points diverse
        take = min(count - len(points), max(1, scenario.horizon // 3))
        for t in hours[:take]:
            points.append(OperatingPoint(op_id=f"op{draw:04d}",
                                         scenario=variant, schedule=schedule,
                                         hour=int(t)))
    return points[:count]


def label_dataset(points: list[OperatingPoint], scenario: Scenario,
                  sim_config: SimConfig | None = None) -> Dataset:
    """Simulate every prospective outage of every operating point and
    attach the nadir and total shed as labels."""
    if not points:
        raise ValueError("no operating points to label")
    if sim_config is None:
        sim_config = SimConfig()
    rows: list[DataPoint] = []
    for pt in points:
        var = pt.scenario if pt.scenario is not None else scenario
        t = pt.hour
        for i, g in enumerate(var.generators):
            if not pt.schedule.u[i][t] or pt.schedule.p[i][t] <= 0.0:
                continue
            try:
                res = simulate_outage(var, pt.schedule, t, g.id, sim_config)
            except (ValueError, RuntimeError) as exc:
                raise RuntimeError(
                    f"labeling failed for source ({pt.op_id}, hour {t + 1}, "
                    f"unit {g.id}): {exc}"
                ) from exc
            feats = compute_features(var, pt.schedule, t, g.id)
            rows.append(DataPoint(features=feats, nadir_hz=res.nadir,
                                  ufls_mw=res.shed_mw,
                                  source=(pt.op_id, t + 1, g.id)))
    return Dataset(points=rows)


# ---------------------------------------------------------------------------
# Logistic regression via iteratively reweighted least squares

_RIDGE = 1e-9  # keeps the Newton step defined under complete separation


def _irls(x: np.ndarray, y: np.ndarray, tol: float = 1e-8,
          max_iter: int = 100) -> tuple[np.ndarray, bool, int]:
    n = x.shape[0]
    xd = np.hstack([np.ones((n, 1)), x])
    theta = np.zeros(xd.shape[1])
    for it in range(max_iter):
        z = xd @ theta
        sig = expit(z)
        grad = xd.T @ (sig - y) / n + _RIDGE * theta
        wdiag = sig * (1.0 - sig)
        hess = (xd.T * wdiag) @ xd / n + _RIDGE * np.eye(xd.shape[1])
        step = np.linalg.solve(hess, grad)
        theta = theta - step
        if np.max(np.abs(step)) <= tol * (1.0 + np.max(np.abs(theta))):
            return theta, True, it + 1
    return theta, False, max_iter


def _fit_logistic_raw(x_raw: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Standardize, fit, and fold the scaling back so the returned
    coefficients apply to raw features."""
    mean = x_raw.mean(axis=0)
    scale = x_raw.std(axis=0)
    scale[scale == 0.0] = 1.0
    xs = (x_raw - mean) / scale
    theta_s, converged, iters = _irls(xs, y)
    if not converged:
        raise RuntimeError(
            f"logistic fit did not converge in {iters} iterations "
            f"(last standardized coefficients {theta_s.tolist()})"
        )
    theta = np.empty_like(theta_s)
    theta[1:] = theta_s[1:] / scale
    theta[0] = theta_s[0] - float(np.sum(theta_s[1:] * mean / scale))
    return theta


def train_logistic_nadir(dataset: Dataset, nadir_threshold_hz: float,
                         min_points: int = 500) -> NadirClassifier:
    """Fit the nadir-adequacy rule: label +1 when |nadir| stays within
    the threshold, 0 otherwise.

    Reports training accuracy and the false-acceptable rate (share of
    truly unacceptable points the rule passes) in the metadata.
    """
    if len(dataset) < min_points:
        raise ValueError(
            f"dataset has {len(dataset)} points, need >= {min_points}"
        )
    x = dataset.feature_matrix()
    y = (np.abs(dataset.nadir_labels()) <= nadir_threshold_hz).astype(float)
    if y.min() == y.max():
        raise ValueError(
            f"single-class dataset at threshold {nadir_threshold_hz} Hz: "
            f"all points are {'acceptable' if y[0] else 'unacceptable'}"
        )
    theta = _fit_logistic_raw(x, y)
    scores = theta[0] + x @ theta[1:]
    pred = (scores >= 0.0).astype(float)
    accuracy = float((pred == y).mean())
    n_unacc = int((y == 0).sum())
    false_acc = float(((pred == 1) & (y == 0)).sum() / n_unacc) if n_unacc else 0.0
    return NadirClassifier(
        theta=tuple(float(v) for v in theta),
        threshold_hz=float(nadir_threshold_hz),
        metadata={"train_accuracy": accuracy,
                  "false_acceptable_rate": false_acc,
                  "n_points": len(dataset)},
    )


# ---------------------------------------------------------------------------
# Shed-estimate regression tree


def train_ufls_tree(dataset: Dataset, min_points: int = 500,
                    min_leaf: int = 10,
                    band_quantile: float = 0.5) -> UflsTreeModel:
    """Depth-2 tree with exactly three leaves.

    The root split separates zero-shed points from the rest; the second
    split partitions the nonzero points into two magnitude bands at the
    ``band_quantile`` of the nonzero labels.  Every leaf fits an
    ordinary-least-squares regression on its routed members, except the
    zero leaf which is pinned to the zero function.
    """
    if len(dataset) < min_points:
        raise ValueError(
            f"dataset has {len(dataset)} points, need >= {min_points}"
        )
    x = dataset.feature_matrix()
    y = dataset.ufls_labels()
    if (y < -1e-9).any():
        raise ValueError("shed labels must be nonnegative")
    bounds = tuple((float(lo), float(hi))
                   for lo, hi in zip(x.min(axis=0), x.max(axis=0)))
    partition = (((1, 2), (0,)), ((2,), (1,)))
    nonzero = y > 1e-9

    if not nonzero.any():
        # all-zero labels: a single effective leaf predicting zero
        zeros = (0.0,) * 5
        return UflsTreeModel(
            node_coeffs=((-1.0, 0.0, 0.0, 0.0, 0.0),
                         (-1.0, 0.0, 0.0, 0.0, 0.0)),
            leaf_coeffs=(zeros, zeros, zeros),
            leaf_partition=partition,
            epsilon=1e-6,
            bounds=bounds,
            metadata={"degenerate": True, "n_points": len(dataset)},
        )
    if nonzero.all() or nonzero.sum() < 2:
        raise ValueError(
            "need both zero-shed and nonzero-shed points to place the "
            "root split; generate more diverse data"
        )

    beta0 = _fit_logistic_raw(x, nonzero.astype(float))
    band = float(np.quantile(y[nonzero], band_quantile))
    high = (y > band) & nonzero
    xs_nz = x[nonzero]
    hi_labels = high[nonzero].astype(float)
    if hi_labels.min() == hi_labels.max():
        raise ValueError(
            "nonzero labels collapse to one magnitude band; generate more "
            "diverse data"
        )
    beta1 = _fit_logistic_raw(xs_nz, hi_labels)

    f0 = beta0[0] + x @ beta0[1:]
    f1 = beta1[0] + x @ beta1[1:]
    leaf_of = np.where(f0 < 0.0, 0, np.where(f1 < 0.0, 1, 2))
    counts = [int((leaf_of == e).sum()) for e in range(3)]
    if min(counts) < min_leaf:
        raise ValueError(
            f"routed leaf sizes {counts} fall below {min_leaf}; "
            "more data is needed for a stable fit"
        )

    leaf_coeffs = [(0.0,) * 5]
    for e in (1, 2):
        mask = leaf_of == e
        xd = np.hstack([np.ones((int(mask.sum()), 1)), x[mask]])
        coef, *_ = np.linalg.lstsq(xd, y[mask], rcond=None)
        leaf_coeffs.append(tuple(float(c) for c in coef))

    span = max(float(np.abs(f0).max()), float(np.abs(f1).max()), 1.0)
    eps = 1e-6 * span
    pred = np.array([
        max(0.0, (leaf_coeffs[e][0]
                  + float(np.dot(leaf_coeffs[e][1:], xi))))
        for e, xi in zip(leaf_of, x)
    ])
    mae = float(np.abs(pred - y).mean())
    return UflsTreeModel(
        node_coeffs=(tuple(float(c) for c in beta0),
                     tuple(float(c) for c in beta1)),
        leaf_coeffs=tuple(leaf_coeffs),
        leaf_partition=partition,
        epsilon=eps,
        bounds=bounds,
        metadata={"n_points": len(dataset), "leaf_counts": counts,
                  "band_boundary_mw": band, "train_mae_mw": mae},
    )


def predict(model, features):
    """Evaluate a trained artifact on one feature vector.

    Nadir rule: +1 acceptable / 0 unacceptable.  Shed tree: routed leaf
    regression, clamped at zero from below.
    """
    if isinstance(model, NadirClassifier):
        return model.predict(features)
    if isinstance(model, UflsTreeModel):
        return model.evaluate(features, clamp=True)
    raise TypeError(f"unknown model type {type(model).__name__}")


# ---------------------------------------------------------------------------
# Model files (versioned JSON) and dataset CSV

_CLASSIFIER_FORMAT = "nadir-classifier"
_TREE_FORMAT = "ufls-tree"
_VERSION = 1


def save_model(model, path: str) -> None:
    if isinstance(model, NadirClassifier):
        doc = {
            "format": _CLASSIFIER_FORMAT,
            "version": _VERSION,
            "theta": list(model.theta),
            "threshold_hz": model.threshold_hz,
            "feature_order": list(model.feature_order),
            "metadata": model.metadata,
        }
    elif isinstance(model, UflsTreeModel):
        doc = {
            "format": _TREE_FORMAT,
            "version": _VERSION,
            "node_coeffs": [list(c) for c in model.node_coeffs],
            "leaf_coeffs": [list(c) for c in model.leaf_coeffs],
            "leaf_partition": [[list(ge), list(lt)]
                               for ge, lt in model.leaf_partition],
            "epsilon": model.epsilon,
            "bounds": [list(b) for b in model.bounds],
            "feature_order": list(model.feature_order),
            "metadata": model.metadata,
        }
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_model(path: str):
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: corrupt model file at offset {exc.pos}") from exc
    version = doc.get("version")
    if version != _VERSION:
        raise ValueError(f"{path}: unknown model version {version!r} "
                         f"(expected {_VERSION})")
    fmt = doc.get("format")
    if fmt == _CLASSIFIER_FORMAT:
        return NadirClassifier(
            theta=tuple(doc["theta"]),
            threshold_hz=doc["threshold_hz"],
            feature_order=tuple(doc["feature_order"]),
            metadata=doc.get("metadata", {}),
        )
    if fmt == _TREE_FORMAT:
        return UflsTreeModel(
            node_coeffs=tuple(tuple(c) for c in doc["node_coeffs"]),
            leaf_coeffs=tuple(tuple(c) for c in doc["leaf_coeffs"]),
            leaf_partition=tuple((tuple(ge), tuple(lt))
                                 for ge, lt in doc["leaf_partition"]),
            epsilon=doc["epsilon"],
            bounds=tuple(tuple(b) for b in doc["bounds"]),
            feature_order=tuple(doc["feature_order"]),
            metadata=doc.get("metadata", {}),
        )
    raise ValueError(f"{path}: unknown model format {fmt!r}")


DATASET_COLUMNS = ("scenario_id", "hour", "lost_unit", "h_mws", "khat_pu_s",
                   "p_lost_mw", "r_post_mw", "nadir_hz", "ufls_mw")


def save_dataset(dataset: Dataset, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(DATASET_COLUMNS)
        for pt in dataset.points:
            sid, hour, unit = pt.source
            fv = pt.features
            writer.writerow([sid, hour, unit, repr(fv.h_post), repr(fv.k_hat),
                             repr(fv.p_lost), repr(fv.r_post),
                             repr(pt.nadir_hz), repr(pt.ufls_mw)])


def load_dataset(path: str) -> Dataset:
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for col in DATASET_COLUMNS:
            if col not in (reader.fieldnames or []):
                raise ValueError(f"{path}: missing column {col!r}")
        for row in reader:
            rows.append(DataPoint(
                features=FeatureVector(
                    h_post=float(row["h_mws"]),
                    k_hat=float(row["khat_pu_s"]),
                    p_lost=float(row["p_lost_mw"]),
                    r_post=float(row["r_post_mw"]),
                ),
                nadir_hz=float(row["nadir_hz"]),
                ufls_mw=float(row["ufls_mw"]),
                source=(row["scenario_id"], int(row["hour"]), row["lost_unit"]),
            ))
    return Dataset(points=rows)
