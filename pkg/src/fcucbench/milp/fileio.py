"""Standard-format model exchange: LP and free-MPS writers plus readers.

Exported names are sanitized to x{i}/c{j} so the files stay within the
character set both formats allow.  Indicator constraints are written
natively in LP form; MPS has no indicator section, so they are rewritten
as big-M rows with a warning.  The readers parse the subset these
writers emit, enabling export/import round-trip checks against the
backend optimum.
"""

from __future__ import annotations

import math
import warnings

from .model import BINARY, CONTINUOUS, INF, ModelIR


class ModelFileError(ValueError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def _expr_tokens(coeffs: dict[int, float]) -> str:
    parts = []
    for idx in sorted(coeffs):
        c = coeffs[idx]
        if c == 0.0:
            continue
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(c))} x{idx}")
    if not parts:
        return "0 x0"
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else out


_LP_SENSE = {"<=": "<=", ">=": ">=", "==": "="}


def write_lp(model: ModelIR, path: str) -> None:
    lines = [f"\\ {model.name}", "Minimize"]
    obj = _expr_tokens(model.objective)
    if model.objective_constant != 0.0:
        sign = "+" if model.objective_constant > 0 else "-"
        obj += f" {sign} {_fmt(abs(model.objective_constant))}"
    lines.append(f" obj: {obj}")
    lines.append("Subject To")
    for j, con in enumerate(model.constraints):
        lines.append(
            f" c{j}: {_expr_tokens(con.coeffs)} {_LP_SENSE[con.sense]} {_fmt(con.rhs)}"
        )
    for j, ind in enumerate(model.indicators):
        inner = ind.constraint
        lines.append(
            f" i{j}: x{ind.switch} = {ind.active_value} -> "
            f"{_expr_tokens(inner.coeffs)} {_LP_SENSE[inner.sense]} {_fmt(inner.rhs)}"
        )
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY:
            continue
        lo = "-inf" if v.lb == -INF else _fmt(v.lb)
        hi = "+inf" if v.ub == INF else _fmt(v.ub)
        lines.append(f" {lo} <= x{v.index} <= {hi}")
    binaries = [v for v in model.variables if v.kind == BINARY]
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(f"x{v.index}" for v in binaries))
    lines.append("End")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_mps(model: ModelIR, path: str) -> None:
    if model.indicators:
        warnings.warn(
            "MPS has no indicator constraints; rewriting them as big-M rows",
            stacklevel=2,
        )
        model = model.materialized()
    lines = [f"NAME {model.name}", "ROWS", " N obj"]
    for j, con in enumerate(model.constraints):
        tag = {"<=": "L", ">=": "G", "==": "E"}[con.sense]
        lines.append(f" {tag} c{j}")

    by_var: dict[int, list[tuple[str, float]]] = {v.index: [] for v in model.variables}
    for idx, c in model.objective.items():
        if c != 0.0:
            by_var[idx].append(("obj", c))
    for j, con in enumerate(model.constraints):
        for idx, c in con.coeffs.items():
            if c != 0.0:
                by_var[idx].append((f"c{j}", c))

    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for v in model.variables:
        want_int = v.kind == BINARY
        if want_int != in_int:
            state = "INTORG" if want_int else "INTEND"
            lines.append(f"    MARKER{marker}  'MARKER'  '{state}'")
            marker += 1
            in_int = want_int
        entries = by_var[v.index]
        if not entries:
            entries = [("obj", 0.0)]
        for row, c in entries:
            lines.append(f"    x{v.index}  {row}  {_fmt(c)}")
    if in_int:
        lines.append(f"    MARKER{marker}  'MARKER'  'INTEND'")

    lines.append("RHS")
    if model.objective_constant != 0.0:
        lines.append(f"    RHS  obj  {_fmt(-model.objective_constant)}")
    for j, con in enumerate(model.constraints):
        lines.append(f"    RHS  c{j}  {_fmt(con.rhs)}")

    lines.append("BOUNDS")
    for v in model.variables:
        if v.kind == BINARY:
            lines.append(f" BV BND  x{v.index}")
            continue
        if v.lb == -INF:
            lines.append(f" MI BND  x{v.index}")
        else:
            lines.append(f" LO BND  x{v.index}  {_fmt(v.lb)}")
        if v.ub != INF:
            lines.append(f" UP BND  x{v.index}  {_fmt(v.ub)}")
    lines.append("ENDATA")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def export_model(model: ModelIR, fmt: str, path: str) -> None:
    """Write the model in 'lp' or 'mps' format."""
    fmt = fmt.lower()
    if fmt == "lp":
        write_lp(model, path)
    elif fmt == "mps":
        write_mps(model, path)
    else:
        raise ValueError(f"unknown export format {fmt!r} (use 'lp' or 'mps')")


# ---------------------------------------------------------------------------
# Readers


def _parse_terms(tokens: list[str], where: str):
    """Parse [sign] coef? var ... into (coeffs-by-name, constant)."""
    coeffs: dict[str, float] = {}
    constant = 0.0
    sign = 1.0
    pending: float | None = None
    for tok in tokens:
        if tok == "+":
            if pending is not None:
                constant += sign * pending
                pending = None
            sign = 1.0
        elif tok == "-":
            if pending is not None:
                constant += sign * pending
                pending = None
            sign = -1.0
        else:
            try:
                val = float(tok)
            except ValueError:
                coef = sign * (1.0 if pending is None else pending)
                coeffs[tok] = coeffs.get(tok, 0.0) + coef
                pending = None
                sign = 1.0
            else:
                if pending is not None:
                    constant += sign * pending
                    pending = None
                    sign = 1.0
                pending = val
    if pending is not None:
        constant += sign * pending
    return coeffs, constant


def _split_relation(tokens: list[str], where: str):
    for i, tok in enumerate(tokens):
        if tok in ("<=", ">=", "=", "=="):
            sense = "==" if tok in ("=", "==") else tok
            return tokens[:i], sense, tokens[i + 1:]
    raise ModelFileError(f"{where}: no relational operator found")


_OPS = {"<=": "\x01", ">=": "\x02", "->": "\x03"}
_OPS_BACK = {v: k for k, v in _OPS.items()}


def _normalize(text: str) -> list[str]:
    # pad operators so tokenization survives `x+y<=3` style spacing;
    # two-character operators are shielded before the bare `=` pass
    for op, mark in _OPS.items():
        text = text.replace(op, f" {mark} ")
    for op in ("=", "+", "-"):
        text = text.replace(op, f" {op} ")
    raw = [_OPS_BACK.get(tok, tok) for tok in text.split()]
    out: list[str] = []
    i = 0
    while i < len(raw):
        tok = raw[i]
        # re-glue exponents the sign padding broke apart: 1e - 05
        if (len(tok) > 1 and tok[-1] in "eE"
                and (tok[0].isdigit() or tok[0] == ".")
                and i + 2 < len(raw) and raw[i + 1] in ("+", "-")
                and raw[i + 2].replace(".", "").isdigit()):
            out.append(tok + raw[i + 1] + raw[i + 2])
            i += 3
            continue
        out.append(tok)
        i += 1
    return out


def read_lp(path: str) -> ModelIR:
    with open(path) as f:
        raw_lines = [ln.split("\\")[0].rstrip() for ln in f]

    section = None
    obj_tokens: list[str] = []
    con_lines: list[str] = []
    bound_lines: list[str] = []
    binary_names: list[str] = []
    for ln in raw_lines:
        stripped = ln.strip()
        if not stripped:
            continue
        low = stripped.lower()
        if low in ("minimize", "minimise", "min"):
            section = "obj"
            continue
        if low in ("subject to", "st", "s.t.", "such that"):
            section = "con"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low in ("binaries", "binary", "bin"):
            section = "bin"
            continue
        if low in ("general", "generals", "end"):
            section = None if low == "end" else "gen"
            continue
        if section == "obj":
            obj_tokens.extend(_normalize(stripped))
        elif section == "con":
            con_lines.append(stripped)
        elif section == "bounds":
            bound_lines.append(stripped)
        elif section == "bin":
            binary_names.extend(stripped.split())

    model = ModelIR(name=path)
    names: dict[str, int] = {}
    binset = set(binary_names)

    def var_of(name: str) -> int:
        if name not in names:
            kind = BINARY if name in binset else CONTINUOUS
            lb = 0.0
            ub = 1.0 if kind == BINARY else INF
            names[name] = model.add_var(name, kind, lb, ub)
        return names[name]

    # objective: strip the label
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    elif len(obj_tokens) > 1 and obj_tokens[1] == ":":
        obj_tokens = obj_tokens[2:]
    obj_names, obj_const = _parse_terms(obj_tokens, f"{path}: objective")
    model.set_objective({var_of(n): c for n, c in obj_names.items()}, obj_const)

    for k, ln in enumerate(con_lines):
        label = None
        body = ln
        if ":" in ln:
            label, body = ln.split(":", 1)
            label = label.strip()
        tokens = _normalize(body)
        if "->" in tokens:
            arrow = tokens.index("->")
            head, tail = tokens[:arrow], tokens[arrow + 1:]
            lhs_h, sense_h, rhs_h = _split_relation(head, f"{path}:{ln}")
            if sense_h != "==" or len(lhs_h) != 1 or len(rhs_h) != 1:
                raise ModelFileError(f"{path}: bad indicator head in {ln!r}")
            switch = var_of(lhs_h[0])
            active = int(rhs_h[0])
            lhs, sense, rhs = _split_relation(tail, f"{path}:{ln}")
            cn, cc = _parse_terms(lhs, f"{path}:{ln}")
            rn, rc = _parse_terms(rhs, f"{path}:{ln}")
            coeffs = {var_of(n): c for n, c in cn.items()}
            for n, c in rn.items():
                i = var_of(n)
                coeffs[i] = coeffs.get(i, 0.0) - c
            model.add_indicator(label or f"i{k}", switch, active, coeffs,
                                sense, rc - cc)
        else:
            lhs, sense, rhs = _split_relation(tokens, f"{path}:{ln}")
            cn, cc = _parse_terms(lhs, f"{path}:{ln}")
            rn, rc = _parse_terms(rhs, f"{path}:{ln}")
            coeffs = {var_of(n): c for n, c in cn.items()}
            for n, c in rn.items():
                i = var_of(n)
                coeffs[i] = coeffs.get(i, 0.0) - c
            model.add_linear(label or f"c{k}", coeffs, sense, rc - cc)

    for ln in bound_lines:
        raw = _normalize(ln)
        # re-join sign tokens with the number that follows
        tokens: list[str] = []
        for tok in raw:
            if tokens and tokens[-1] in ("+", "-"):
                sign = tokens.pop()
                tok = tok if sign == "+" else f"-{tok}"
            tokens.append(tok)
        if len(tokens) == 2 and tokens[1].lower() == "free":
            v = model.variables[var_of(tokens[0])]
            v.lb, v.ub = -INF, INF
            continue
        # forms: lo <= x <= hi | x <= hi | x >= lo | x = v
        def as_num(tok: str) -> float:
            t = tok.lower()
            if t in ("-inf", "-infinity"):
                return -INF
            if t in ("+inf", "inf", "+infinity", "infinity"):
                return INF
            return float(tok)

        if len(tokens) == 5 and tokens[1] == "<=" and tokens[3] == "<=":
            v = model.variables[var_of(tokens[2])]
            v.lb, v.ub = as_num(tokens[0]), as_num(tokens[4])
        elif len(tokens) == 3:
            v = model.variables[var_of(tokens[0])]
            if tokens[1] == "<=":
                v.ub = as_num(tokens[2])
            elif tokens[1] == ">=":
                v.lb = as_num(tokens[2])
            elif tokens[1] == "=":
                v.lb = v.ub = as_num(tokens[2])
            else:
                raise ModelFileError(f"{path}: bad bound line {ln!r}")
        else:
            raise ModelFileError(f"{path}: bad bound line {ln!r}")

    for name in binary_names:
        var_of(name)
    return model


def read_mps(path: str) -> ModelIR:
    model = ModelIR(name=path)
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    cols: dict[str, list[tuple[str, float]]] = {}
    col_order: list[str] = []
    int_cols: set[str] = set()
    rhs: dict[str, float] = {}
    bounds: list[tuple[str, str, float | None]] = []
    obj_row = None
    section = None
    in_int = False

    with open(path) as f:
        for raw in f:
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("*"):
                continue
            head = line.split()[0].upper()
            if not line[0].isspace() and head in (
                "NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"
            ):
                section = head
                continue
            tok = line.split()
            if section == "ROWS":
                tag, name = tok[0].upper(), tok[1]
                if tag == "N":
                    if obj_row is None:
                        obj_row = name
                else:
                    row_sense[name] = {"L": "<=", "G": ">=", "E": "=="}[tag]
                    row_order.append(name)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    in_int = tok[2] == "'INTORG'"
                    continue
                col = tok[0]
                if col not in cols:
                    cols[col] = []
                    col_order.append(col)
                    if in_int:
                        int_cols.add(col)
                pairs = tok[1:]
                for row, val in zip(pairs[0::2], pairs[1::2]):
                    cols[col].append((row, float(val)))
            elif section == "RHS":
                pairs = tok[1:]
                for row, val in zip(pairs[0::2], pairs[1::2]):
                    rhs[row] = float(val)
            elif section == "BOUNDS":
                kind = tok[0].upper()
                name = tok[2]
                val = float(tok[3]) if len(tok) > 3 else None
                bounds.append((kind, name, val))
            elif section == "RANGES":
                raise ModelFileError(f"{path}: RANGES section not supported")

    var_idx: dict[str, int] = {}
    for col in col_order:
        if col in int_cols:
            var_idx[col] = model.add_var(col, BINARY)
        else:
            var_idx[col] = model.add_var(col, CONTINUOUS, 0.0, INF)
    for kind, name, val in bounds:
        if name not in var_idx:
            var_idx[name] = model.add_var(name, CONTINUOUS, 0.0, INF)
        v = model.variables[var_idx[name]]
        if kind == "BV":
            v.kind = BINARY
            v.lb, v.ub = 0.0, 1.0
        elif kind == "UP":
            v.ub = val
        elif kind == "LO":
            v.lb = val
        elif kind == "FX":
            v.lb = v.ub = val
        elif kind == "MI":
            v.lb = -INF
        elif kind == "PL":
            v.ub = INF
        elif kind == "FR":
            v.lb, v.ub = -INF, INF
        else:
            raise ModelFileError(f"{path}: unsupported bound type {kind!r}")

    row_coeffs: dict[str, dict[int, float]] = {r: {} for r in row_order}
    obj: dict[int, float] = {}
    for col, entries in cols.items():
        idx = var_idx[col]
        for row, val in entries:
            if row == obj_row:
                obj[idx] = obj.get(idx, 0.0) + val
            elif row in row_coeffs:
                row_coeffs[row][idx] = row_coeffs[row].get(idx, 0.0) + val
            else:
                raise ModelFileError(f"{path}: entry for undeclared row {row!r}")
    constant = -rhs.get(obj_row, 0.0) if obj_row else 0.0
    model.set_objective(obj, constant)
    for row in row_order:
        model.add_linear(row, row_coeffs[row], row_sense[row], rhs.get(row, 0.0))
    return model


def import_model(path: str, fmt: str | None = None) -> ModelIR:
    if fmt is None:
        fmt = "mps" if path.lower().endswith(".mps") else "lp"
    return read_mps(path) if fmt == "mps" else read_lp(path)
