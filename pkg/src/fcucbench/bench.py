"""Formulation registry, suite runner, performance indices, and reports.

Five formulations share one base model: the benchmark commitment, two
preventive variants (separable-programming nadir and the learned linear
rule) and two corrective variants (analytical shed estimate and the
embedded regression tree).  Every solved schedule is re-evaluated with
the frequency simulator; the two indices express extra cost and extra
solve time per MW of avoided shedding against the benchmark.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field, replace

from . import corrective as corr
from . import preventive as prev
from .learn import load_model
from .milp.backend import solve
from .milp.model import SolveOptions
from .preventive import NadirClassifier
from .corrective import UflsTreeModel
from .sfr import SimConfig, sweep_outages
from .system import Scenario
from .ucbase import (UcModel, add_reserve_adequacy, build_buc, build_uc_core,
                     extract_schedule, schedule_cost)

FORMULATIONS = ("buc", "pfcuc_analytical", "pfcuc_datadriven",
                "cfcuc_analytical", "cfcuc_datadriven")

# constraint-name prefixes each formulation must (and must not) contain
FAMILY_PREFIXES = {
    "reserve_n1": ("reserve_n1[",),
    "rocof": ("rocof[",),
    "qss": ("qss[",),
    "nadir_analytical": ("nadir_sep[",),
    "nadir_datadriven": ("nadir_ml[",),
    "critical_loss": ("crit_def[",),
    "shed_switch": ("shed_split[",),
    "headroom_speed": ("headroom[",),
    "reserve_shed": ("reserve_shed[",),
    "reserve_speed_share": ("reserve_share[",),
    "tree": ("leaf_pick[", "node0_", "node1_"),
}

FORMULATION_FAMILIES = {
    "buc": {"reserve_n1"},
    "pfcuc_analytical": {"rocof", "qss", "nadir_analytical"},
    "pfcuc_datadriven": {"rocof", "qss", "nadir_datadriven"},
    "cfcuc_analytical": {"rocof", "critical_loss", "shed_switch",
                         "headroom_speed", "reserve_shed"},
    "cfcuc_datadriven": {"rocof", "tree", "reserve_speed_share"},
}


@dataclass(frozen=True)
class RunSpec:
    """One scheduling run: a formulation and its sweep parameter.

    ``param`` is the nadir threshold in Hz for preventive variants and
    the shed cost in kEUR/MW for corrective variants; the benchmark
    takes none.  Data-driven variants reference a trained model file.
    """

    formulation: str
    param: float | None = None
    model_path: str | None = None
    solve_options: SolveOptions = field(default_factory=SolveOptions)
    sim: SimConfig = field(default_factory=SimConfig)
    pwl_breakpoints: int = 10

    def label(self) -> str:
        if self.param is None:
            return self.formulation
        return f"{self.formulation}@{self.param:g}"

    def validate(self):
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.formulation == "buc" and self.param is not None:
            raise ValueError("the benchmark takes no sweep parameter")
        if self.formulation.startswith("cfcuc") and self.param is not None \
                and self.param < 0:
            raise ValueError("shed cost must be >= 0")
        if self.formulation.startswith("pfcuc") and self.param is not None \
                and self.param <= 0:
            raise ValueError("nadir threshold must be > 0")
        if self.formulation.endswith("datadriven") and not self.model_path:
            raise ValueError(
                f"{self.formulation} needs a trained model file (--model)"
            )


@dataclass
class RunResult:
    formulation: str
    param: float | None
    status: str
    objective: float | None = None
    operation_cost: float | None = None  # EUR
    ufls_cost: float | None = None  # EUR, corrective only
    total_ufls_sfr: float | None = None  # MW
    avg_nadir: float | None = None  # Hz
    for_weighted_shed: float | None = None  # MW, corrective only
    cpu_time: float = 0.0  # solver wall time, s
    build_time: float = 0.0  # model construction, s
    n_constraints: int = 0
    n_variables: int = 0
    n_discrete: int = 0
    eta_s: float | None = None
    eta_c: float | None = None

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in (
            "formulation", "param", "status", "objective", "operation_cost",
            "ufls_cost", "total_ufls_sfr", "avg_nadir", "for_weighted_shed",
            "cpu_time", "build_time", "n_constraints", "n_variables",
            "n_discrete", "eta_s", "eta_c")}

    @classmethod
    def from_json(cls, doc: dict) -> "RunResult":
        return cls(**doc)


def _load_classifier(path: str) -> NadirClassifier:
    model = load_model(path)
    if not isinstance(model, NadirClassifier):
        raise ValueError(f"{path}: expected a nadir classifier file")
    return model


def _load_tree(path: str) -> UflsTreeModel:
    model = load_model(path)
    if not isinstance(model, UflsTreeModel):
        raise ValueError(f"{path}: expected a shed-tree file")
    return model


def build_formulation(scenario: Scenario, spec: RunSpec) -> UcModel:
    """Assemble exactly the registered constraint set for the spec."""
    spec.validate()
    name = spec.label()
    if spec.formulation == "buc":
        uc = build_buc(scenario)
        uc.model.name = name
        return uc

    uc = build_uc_core(scenario, name=name)
    if spec.formulation == "pfcuc_analytical":
        params = prev.PreventiveParams.from_scenario(
            scenario, nadir_limit=spec.param,
            pwl_breakpoints=spec.pwl_breakpoints)
        prev.add_rocof_constraints(uc)
        prev.add_qss_constraints(uc)
        prev.add_nadir_analytical(uc, params)
    elif spec.formulation == "pfcuc_datadriven":
        classifier = _load_classifier(spec.model_path)
        if spec.param is not None and \
                abs(classifier.threshold_hz - spec.param) > 1e-9:
            raise ValueError(
                f"classifier was trained for {classifier.threshold_hz} Hz "
                f"but the run asks for {spec.param} Hz; train one model "
                "per threshold"
            )
        prev.add_rocof_constraints(uc)
        prev.add_qss_constraints(uc)
        prev.add_nadir_datadriven(uc, classifier)
    elif spec.formulation == "cfcuc_analytical":
        cost = None if spec.param is None else spec.param * 1000.0
        params = corr.CorrectiveParams.from_scenario(
            scenario, ufls_cost=cost, pwl_breakpoints=spec.pwl_breakpoints)
        if params.include_rocof:
            prev.add_rocof_constraints(uc)
        pcrit = corr.add_pcrit_constraints(uc, params)
        pufls = corr.add_ufls_switch(uc, pcrit, params)
        corr.add_reserve_speed(uc, pcrit, params)
        corr.apply_corrective_objective(uc, pufls, params)
        corr.apply_corrective_reserve(uc, pufls, "aggregate", params)
    elif spec.formulation == "cfcuc_datadriven":
        tree = _load_tree(spec.model_path)
        cost = None if spec.param is None else spec.param * 1000.0
        params = corr.CorrectiveParams.from_scenario(scenario, ufls_cost=cost)
        if params.include_rocof:
            prev.add_rocof_constraints(uc)
        pufls = corr.add_tree_embedding(uc, tree, params)
        corr.apply_corrective_objective(uc, pufls, params)
        corr.apply_corrective_reserve(uc, pufls, "speed_share", params)
    return uc


def audit_families(uc: UcModel, formulation: str) -> dict[str, bool]:
    """Presence map of every registered constraint family in a model."""
    names = [c.name for c in uc.model.constraints]
    names += [c.name for c in uc.model.indicators]
    found = {}
    for family, prefixes in FAMILY_PREFIXES.items():
        found[family] = any(n.startswith(p) for p in prefixes for n in names)
    return found


def run_one(scenario: Scenario, spec: RunSpec) -> RunResult:
    """Build, solve, extract, simulate, and assemble the KPI record."""
    t0 = time.perf_counter()
    uc = build_formulation(scenario, spec)
    build_time = time.perf_counter() - t0
    stats = uc.model.stats()
    sol = solve(uc.model, options=spec.solve_options)
    result = RunResult(
        formulation=spec.formulation, param=spec.param, status=sol.status,
        cpu_time=sol.wall_time, build_time=build_time,
        n_constraints=stats.n_constraints, n_variables=stats.n_variables,
        n_discrete=stats.n_discrete,
    )
    if not sol.ok:
        return result
    result.objective = sol.objective
    schedule = extract_schedule(sol, scenario)
    result.operation_cost = schedule_cost(schedule, uc.cost_model)
    sweep = sweep_outages(scenario, schedule, spec.sim)
    result.total_ufls_sfr = sweep.total_shed_mw
    result.avg_nadir = sweep.avg_nadir_hz
    if spec.formulation.startswith("cfcuc"):
        cost_per_mw = (spec.param if spec.param is not None
                       else scenario.system.ufls_cost / 1000.0) * 1000.0
        gens = scenario.generators
        by_unit = {g.id: g.for_rate for g in gens}
        result.ufls_cost = math.fsum(
            cost_per_mw * by_unit[unit] * res.shed_mw
            for (t, unit), res in sweep.results.items()
        )
        result.for_weighted_shed = math.fsum(
            gens[ell].for_rate * sol.value(f"pufls[{gens[ell].id},{t + 1}]")
            for t in range(scenario.horizon) for ell in range(len(gens))
        )
    return result


def run_suite(scenario: Scenario, specs: list[RunSpec],
              out_dir: str | None = None) -> list[RunResult]:
    """Run every spec, attach indices against the benchmark run, and
    persist results incrementally; per-spec failures are recorded and
    the suite continues."""
    results: list[RunResult] = []
    jsonl = os.path.join(out_dir, "results.jsonl") if out_dir else None
    if jsonl:
        os.makedirs(out_dir, exist_ok=True)
        open(jsonl, "w").close()
    for spec in specs:
        try:
            res = run_one(scenario, spec)
        except Exception as exc:  # per-spec failure must not kill the suite
            res = RunResult(formulation=spec.formulation, param=spec.param,
                            status=f"error: {exc}")
        results.append(res)
        if jsonl:
            with open(jsonl, "a") as f:
                f.write(json.dumps(res.to_json(), sort_keys=True) + "\n")
    baseline = next((r for r in results
                     if r.formulation == "buc" and r.status in
                     ("optimal", "gap_reached")), None)
    if baseline is not None:
        for res in results:
            if res is baseline or res.total_ufls_sfr is None:
                continue
            try:
                res.eta_s, res.eta_c = compute_indices(res, baseline)
            except ValueError:
                pass  # no shed reduction: indices stay undefined
    if jsonl:
        with open(jsonl, "w") as f:
            for res in results:
                f.write(json.dumps(res.to_json(), sort_keys=True) + "\n")
    return results


def compute_indices(result: RunResult, baseline: RunResult
                    ) -> tuple[float, float]:
    """Extra cost (EUR/MW) and extra solve time (s/MW) per MW of shed
    avoided relative to the benchmark."""
    for r in (result, baseline):
        if r.total_ufls_sfr is None or r.operation_cost is None:
            raise ValueError(f"run {r.formulation} has no evaluated KPIs")
    reduction = baseline.total_ufls_sfr - result.total_ufls_sfr
    if reduction <= 0.0:
        raise ValueError(
            f"shed reduction is {reduction:.6g} MW; the indices are "
            "undefined without a positive reduction"
        )
    eta_s = (result.operation_cost - baseline.operation_cost) / reduction
    eta_c = (result.cpu_time - baseline.cpu_time) / reduction
    return eta_s, eta_c


# ---------------------------------------------------------------------------
# Suite files and reports

RESULT_COLUMNS = ("formulation", "param", "cost_eur", "ufls_mw",
                  "ufls_cost_eur", "avg_nadir_hz", "cpu_s", "n_constraints",
                  "n_vars", "n_discrete", "eta_s", "eta_c")


def load_suite(path: str) -> list[RunSpec]:
    """Declarative suite: shared options plus one entry per formulation
    with its parameter sweep; model paths may carry a ``{param}``
    placeholder and resolve relative to the suite file."""
    with open(path) as f:
        doc = json.load(f)
    base = os.path.dirname(os.path.abspath(path))
    solve_options = SolveOptions(**doc.get("solve", {}))
    sim = SimConfig(**doc.get("sim", {}))
    breakpoints = int(doc.get("pwl_breakpoints", 10))
    specs = []
    for entry in doc.get("runs", []):
        formulation = entry["formulation"]
        params = entry.get("params", [None])
        if not params:
            raise ValueError(f"{path}: empty parameter sweep for {formulation}")
        for param in params:
            model_path = entry.get("model")
            if model_path is not None:
                model_path = model_path.replace(
                    "{param}", "" if param is None else f"{param:g}")
                if not os.path.isabs(model_path):
                    model_path = os.path.join(base, model_path)
                if not os.path.exists(model_path):
                    raise ValueError(f"{path}: model file {model_path} "
                                     "does not exist")
            specs.append(RunSpec(
                formulation=formulation, param=param, model_path=model_path,
                solve_options=replace(solve_options), sim=sim,
                pwl_breakpoints=breakpoints,
            ))
    if not specs:
        raise ValueError(f"{path}: suite defines no runs")
    return specs


def _fmt_opt(value, pattern="{:.2f}") -> str:
    return "" if value is None else pattern.format(value)


def results_rows(results: list[RunResult]) -> list[list[str]]:
    rows = []
    for r in results:
        rows.append([
            r.formulation,
            "" if r.param is None else f"{r.param:g}",
            _fmt_opt(r.operation_cost), _fmt_opt(r.total_ufls_sfr),
            _fmt_opt(r.ufls_cost), _fmt_opt(r.avg_nadir, "{:.4f}"),
            _fmt_opt(r.cpu_time, "{:.3f}"),
            str(r.n_constraints), str(r.n_variables), str(r.n_discrete),
            _fmt_opt(r.eta_s), _fmt_opt(r.eta_c, "{:.3f}"),
        ])
    return rows


def _pct(value: float, base: float) -> str:
    return f"{100.0 * (value - base) / base:+.1f}%"


def _benefits_table(results, baseline):
    header = ["formulation", "param", "operation_cost_eur", "cost_delta",
              "total_ufls_mw", "ufls_delta", "ufls_cost_eur", "avg_nadir_hz"]
    rows = [header]
    for r in results:
        if r.operation_cost is None:
            rows.append([r.formulation,
                         "" if r.param is None else f"{r.param:g}",
                         r.status, "", "", "", "", ""])
            continue
        dc = du = ""
        if baseline is not None and r is not baseline:
            dc = _pct(r.operation_cost, baseline.operation_cost)
            if baseline.total_ufls_sfr:
                du = _pct(r.total_ufls_sfr, baseline.total_ufls_sfr)
        rows.append([
            r.formulation, "" if r.param is None else f"{r.param:g}",
            f"{r.operation_cost:.2f}", dc, f"{r.total_ufls_sfr:.2f}", du,
            _fmt_opt(r.ufls_cost), f"{r.avg_nadir:.4f}",
        ])
    return rows


def _computational_table(results):
    rows = [["formulation", "param", "cpu_s", "build_s", "constraints",
             "total_vars", "discrete_vars", "status"]]
    for r in results:
        rows.append([
            r.formulation, "" if r.param is None else f"{r.param:g}",
            f"{r.cpu_time:.3f}", f"{r.build_time:.3f}", str(r.n_constraints),
            str(r.n_variables), str(r.n_discrete), r.status,
        ])
    return rows


def _indices_table(results, baseline):
    rows = [["formulation", "param", "cost_increase_eur", "cpu_increase_s",
             "ufls_reduction_mw", "eta_s_eur_per_mw", "eta_c_s_per_mw"]]
    for r in results:
        if r is baseline or r.eta_s is None:
            continue
        rows.append([
            r.formulation, "" if r.param is None else f"{r.param:g}",
            f"{r.operation_cost - baseline.operation_cost:.2f}",
            f"{r.cpu_time - baseline.cpu_time:.3f}",
            f"{baseline.total_ufls_sfr - r.total_ufls_sfr:.2f}",
            f"{r.eta_s:.2f}", f"{r.eta_c:.3f}",
        ])
    return rows


def _write_csv(path: str, rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as f:
        csv.writer(f).writerows(rows)


def _write_markdown(path: str, tables: dict[str, list[list[str]]]) -> None:
    lines = []
    for title, rows in tables.items():
        lines.append(f"## {title}")
        lines.append("")
        header, *body = rows
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "|".join("---" for _ in header) + "|")
        for row in body:
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    with open(path, "w") as f:
        f.write("\n".join(lines))


def _write_text(path: str, tables: dict[str, list[list[str]]]) -> None:
    chunks = []
    for title, rows in tables.items():
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        chunks.append(title)
        chunks.append("=" * len(title))
        for row in rows:
            chunks.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
        chunks.append("")
    with open(path, "w") as f:
        f.write("\n".join(chunks))


_GNUPLOT = """# cost vs shed, both normalized to the benchmark run
set datafile separator ','
set key outside
set xlabel 'total shed vs benchmark'
set ylabel 'operation cost vs benchmark'
set grid
plot 'scatter.csv' using 4:3:1 with labels point pt 7 offset char 1,0.5 notitle
"""


def emit_report(results: list[RunResult], out_dir: str,
                formats=("csv", "markdown", "structured-text")) -> list[str]:
    """Write the benefit/computational/index tables, the normalized
    scatter data (benchmark at exactly (1, 1)) and a gnuplot script."""
    if not results:
        raise ValueError("no results to report")
    os.makedirs(out_dir, exist_ok=True)
    baseline = next((r for r in results
                     if r.formulation == "buc" and r.operation_cost is not None),
                    None)
    written = []

    path = os.path.join(out_dir, "results.csv")
    _write_csv(path, [list(RESULT_COLUMNS)] + results_rows(results))
    written.append(path)

    tables = {"System benefits": _benefits_table(results, baseline),
              "Computational burden": _computational_table(results)}
    indices = _indices_table(results, baseline) if baseline else None
    if indices and len(indices) > 1:
        tables["Performance indices"] = indices

    if "csv" in formats:
        for key, stem in (("System benefits", "benefits"),
                          ("Computational burden", "computational"),
                          ("Performance indices", "indices")):
            if key in tables:
                path = os.path.join(out_dir, f"{stem}.csv")
                _write_csv(path, tables[key])
                written.append(path)
    if "markdown" in formats:
        path = os.path.join(out_dir, "report.md")
        _write_markdown(path, tables)
        written.append(path)
    if "structured-text" in formats:
        path = os.path.join(out_dir, "report.txt")
        _write_text(path, tables)
        written.append(path)

    if baseline is not None:
        rows = [["label", "param", "cost_norm", "ufls_norm"]]
        for r in results:
            if r.operation_cost is None:
                continue
            ufls_norm = (r.total_ufls_sfr / baseline.total_ufls_sfr
                         if baseline.total_ufls_sfr else 1.0)
            rows.append([r.formulation,
                         "" if r.param is None else f"{r.param:g}",
                         repr(r.operation_cost / baseline.operation_cost),
                         repr(ufls_norm)])
        path = os.path.join(out_dir, "scatter.csv")
        _write_csv(path, rows)
        written.append(path)
        path = os.path.join(out_dir, "scatter.gp")
        with open(path, "w") as f:
            f.write(_GNUPLOT)
        written.append(path)
    return written


def save_results_csv(results: list[RunResult], path: str) -> None:
    _write_csv(path, [list(RESULT_COLUMNS)] + results_rows(results))


def load_results_jsonl(path: str) -> list[RunResult]:
    results = []
    with open(path) as f:
        for line in f:
            if line.strip():
                results.append(RunResult.from_json(json.loads(line)))
    return results
