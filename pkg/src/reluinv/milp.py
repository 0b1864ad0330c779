"""Mixed-integer big-M export of the inversion problem in CPLEX LP text format."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import lp
from .errors import InvalidInputError
from .model import ACT_RELU, ActivationPattern, NetworkSpec
from .subproblems import FeasibleSet


def compute_bigM(net: NetworkSpec, feasible: FeasibleSet) -> dict[int, float]:
    """Per-ReLU-neuron bound on |pre-activation| by interval arithmetic over the box."""
    if not (np.isfinite(feasible.lo).all() and np.isfinite(feasible.hi).all()):
        raise InvalidInputError("big-M needs a bounded input box")
    lo, hi = feasible.lo.copy(), feasible.hi.copy()
    out: dict[int, float] = {}
    for li, layer in enumerate(net.layers):
        w_pos = np.maximum(layer.weights, 0.0)
        w_neg = np.minimum(layer.weights, 0.0)
        a_hi = w_pos @ hi + w_neg @ lo + layer.bias
        a_lo = w_pos @ lo + w_neg @ hi + layer.bias
        if layer.activation == ACT_RELU:
            base = net.offsets[li]
            for i in range(layer.n_out):
                out[base + i] = float(max(abs(a_lo[i]), abs(a_hi[i])))
            lo = np.maximum(0.0, a_lo)
            hi = np.maximum(0.0, a_hi)
        else:
            lo, hi = a_lo, a_hi
    return out


def _term(coef: float, name: str) -> str:
    return f"{'+' if coef >= 0 else '-'} {abs(coef):.17g} {name}"


def _row(name: str, terms: list[tuple[float, str]], sense: str, rhs: float) -> str:
    body = " ".join(_term(c, v) for c, v in terms if c != 0.0)
    if not body:
        body = "0 " + terms[0][1]
    op = {"<=": "<=", ">=": ">=", "=": "="}[sense]
    return f" {name}: {body} {op} {rhs:.17g}"


def _var_names(net: NetworkSpec, li: int) -> list[str]:
    """Names of the inputs feeding layer li: x{i} for the first layer, t{j} after."""
    if li == 0:
        return [f"x{i}" for i in range(net.input_dim)]
    base = net.offsets[li - 1]
    return [f"t{base + i}" for i in range(net.layers[li - 1].n_out)]


def export_milp(net: NetworkSpec, target, feasible: FeasibleSet, path: str | Path) -> Path:
    """Write the big-M encoding of the network plus the input constraints.

    The squared-error objective is nonlinear, so the objective is a zero stub and
    the target lives in the comment block; input-layer unit variables are
    substituted by x{i} directly.
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    if target.size != net.output_dim:
        raise InvalidInputError("target dimension does not match the network output")
    big_m = compute_bigM(net, feasible)
    lines = [
        "\\ big-M encoding of a ReLU network inversion problem",
        "\\ loss: mse (add externally; LP format cannot carry it)",
        "\\ input-layer unit variables substituted by x{i}",
    ]
    for o, t in enumerate(target):
        lines.append(f"\\ target y{o} = {t:.17g}")
    lines.append("Minimize")
    lines.append(" obj: 0 x0")
    lines.append("Subject To")

    binaries: list[str] = []
    free_vars: list[str] = [f"y{o}" for o in range(net.output_dim)]
    last = len(net.layers) - 1
    for li, layer in enumerate(net.layers):
        in_names = _var_names(net, li)
        base = net.offsets[li]
        for i in range(layer.n_out):
            j = base + i
            terms = [(-float(w), name) for w, name in zip(layer.weights[i], in_names)]
            rhs = float(layer.bias[i])
            if li == last:
                lines.append(_row(f"out{i}", [(1.0, f"y{i}")] + terms, "=", rhs))
            elif layer.activation == ACT_RELU:
                m = big_m[j]
                lines.append(_row(f"lin{j}", [(1.0, f"t{j}"), (-1.0, f"s{j}")] + terms, "=", rhs))
                lines.append(_row(f"on{j}", [(1.0, f"t{j}"), (-m, f"z{j}")], "<=", 0.0))
                lines.append(_row(f"off{j}", [(1.0, f"s{j}"), (m, f"z{j}")], "<=", m))
                binaries.append(f"z{j}")
            else:
                lines.append(_row(f"lin{j}", [(1.0, f"t{j}")] + terms, "=", rhs))
                free_vars.append(f"t{j}")
    for r, (a, rhs, sense) in enumerate(feasible.rows):
        terms = [(float(c), f"x{i}") for i, c in enumerate(a)]
        lines.append(_row(f"xcon{r}", terms, sense, float(rhs)))

    lines.append("Bounds")
    for i in range(net.input_dim):
        lines.append(f" {feasible.lo[i]:.17g} <= x{i} <= {feasible.hi[i]:.17g}")
    for name in free_vars:
        lines.append(f" {name} free")
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")

    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def export_fixed_pattern(
    net: NetworkSpec,
    pattern: ActivationPattern,
    feasible: FeasibleSet,
    path: str | Path,
) -> Path:
    """Write the continuous region system for a fixed pattern, with explicit unit variables."""
    lines = [
        "\\ fixed activation pattern region (continuous)",
        f"\\ active neurons: {sorted(pattern.active)}",
        "Minimize",
        " obj: 0 x0",
        "Subject To",
    ]
    free_vars = [f"y{o}" for o in range(net.output_dim)]
    fixed_zero: list[str] = []
    nonneg: list[str] = []
    last = len(net.layers) - 1
    for li, layer in enumerate(net.layers):
        in_names = _var_names(net, li)
        base = net.offsets[li]
        for i in range(layer.n_out):
            j = base + i
            terms = [(-float(w), name) for w, name in zip(layer.weights[i], in_names)]
            rhs = float(layer.bias[i])
            if li == last:
                lines.append(_row(f"out{i}", [(1.0, f"y{i}")] + terms, "=", rhs))
            elif layer.activation == ACT_RELU:
                if j in pattern.active:
                    lines.append(_row(f"lin{j}", [(1.0, f"t{j}")] + terms, "=", rhs))
                    nonneg.append(f"t{j}")
                else:
                    lines.append(_row(f"lin{j}", terms, ">=", rhs))
                    fixed_zero.append(f"t{j}")
            else:
                lines.append(_row(f"lin{j}", [(1.0, f"t{j}")] + terms, "=", rhs))
                free_vars.append(f"t{j}")
    for r, (a, rhs, sense) in enumerate(feasible.rows):
        terms = [(float(c), f"x{i}") for i, c in enumerate(a)]
        lines.append(_row(f"xcon{r}", terms, sense, float(rhs)))
    lines.append("Bounds")
    for i in range(net.input_dim):
        lines.append(f" {feasible.lo[i]:.17g} <= x{i} <= {feasible.hi[i]:.17g}")
    for name in fixed_zero:
        lines.append(f" {name} = 0")
    for name in free_vars:
        lines.append(f" {name} free")
    lines.append("End")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def parse_lp_file(path: str | Path) -> dict:
    """Read back a file written by this module: rows, bounds, binaries, variables.

    Supports exactly the deterministic subset of the LP format emitted here.
    """
    text = Path(path).read_text()
    section = None
    rows = []
    bounds: dict[str, tuple[float, float]] = {}
    binaries: list[str] = []
    variables: set[str] = set()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "maximize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            continue
        if section == "subject to":
            name, body = line.split(":", 1)
            for op in ("<=", ">=", "="):
                if f" {op} " in body:
                    expr, rhs = body.rsplit(f" {op} ", 1)
                    sense = op
                    break
            coeffs = _parse_terms(expr)
            variables.update(coeffs)
            rows.append((name.strip(), coeffs, sense, float(rhs)))
        elif section == "bounds":
            if line.endswith(" free"):
                name = line[: -len(" free")].strip()
                bounds[name] = (-np.inf, np.inf)
                variables.add(name)
            elif " = " in line and "<=" not in line:
                name, val = line.split(" = ")
                bounds[name.strip()] = (float(val), float(val))
                variables.add(name.strip())
            else:
                lo_s, rest = line.split(" <= ", 1)
                name, hi_s = rest.split(" <= ", 1)
                bounds[name.strip()] = (float(lo_s), float(hi_s))
                variables.add(name.strip())
        elif section == "binaries":
            binaries.extend(line.split())
            variables.update(line.split())
    return {"rows": rows, "bounds": bounds, "binaries": binaries, "variables": sorted(variables)}


def _parse_terms(expr: str) -> dict[str, float]:
    tokens = expr.split()
    coeffs: dict[str, float] = {}
    sign = 1.0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "+":
            sign = 1.0
            i += 1
            continue
        if tok == "-":
            sign = -1.0
            i += 1
            continue
        coef = sign * float(tok)
        name = tokens[i + 1]
        coeffs[name] = coeffs.get(name, 0.0) + coef
        sign = 1.0
        i += 2
    return coeffs


def fixed_assignment_rows(parsed: dict, assignment: dict[str, int]):
    """LP rows/bounds from a parsed export with the binaries fixed to 0/1.

    Returns (rows, lo, hi, order) over the parsed continuous variables, usable
    with the LP engine to test feasibility of one activation assignment.
    """
    names = [v for v in parsed["variables"] if v not in parsed["binaries"]]
    index = {v: i for i, v in enumerate(names)}
    n = len(names)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    for v, (l, h) in parsed["bounds"].items():
        if v in index:
            lo[index[v]], hi[index[v]] = l, h
    rows = []
    for _, coeffs, sense, rhs in parsed["rows"]:
        a = np.zeros(n)
        shift = 0.0
        for v, c in coeffs.items():
            if v in parsed["binaries"]:
                shift += c * assignment[v]
            else:
                a[index[v]] += c
        rows.append((a, rhs - shift, sense))
    return rows, lo, hi, names
