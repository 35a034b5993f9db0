"""Exact mixed-integer encodings of the verification problem.

Ambiguous relus are encoded with a binary phase indicator and four rows in
either the asymmetric (per-side bound constants) or the symmetric (single
big-M constant) variant; maxpool groups get one indicator per input.  The
model is written as CPLEX-LP text so any external MIP solver can consume
it; nothing in this package depends on one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from plnnverify import lp as lpmod
from plnnverify.bounds import LayerBounds, _classify, variable_layout
from plnnverify.lp import EQUAL, GREATER, LESS, LpBuilder, LinearProgram
from plnnverify.network import MAXPOOL, RELU, CanonicalProblem

TJENG = "tjeng"
SYMMETRIC = "symmetric"
MINIMIZE = "minimize"
FEASIBILITY = "feasibility"


@dataclass(frozen=True)
class MipModel:
    """Continuous LP relaxation plus the indices of the binary variables.

    Fixing every binary to a 0/1 pattern and solving the remaining LP with
    the in-package solver reproduces that pattern's exact network behavior;
    the binaries are kept relaxed in `lp` so the model doubles as its own
    linear relaxation.
    """

    lp: LinearProgram
    binder: tuple            # names, one per variable
    binaries: tuple          # variable indices of the phase indicators
    objective_mode: str

    def fixed_pattern_lp(self, assignment: dict[int, int]) -> LinearProgram:
        changed = {j: (float(v), float(v)) for j, v in assignment.items()}
        lower = self.lp.lower.copy()
        upper = self.lp.upper.copy()
        for j, (lo, hi) in changed.items():
            lower[j], upper[j] = lo, hi
        return LinearProgram(
            objective=self.lp.objective,
            coeffs=self.lp.coeffs,
            relations=self.lp.relations,
            rhs=self.lp.rhs,
            lower=lower,
            upper=upper,
        )


def encode_mip(
    problem: CanonicalProblem,
    bounds: LayerBounds,
    variant: str = TJENG,
    objective_mode: str = MINIMIZE,
) -> MipModel:
    """Big-M model of the canonical problem under the given bounds.

    Sign-determined units are encoded linearly without a binary.  The
    asymmetric variant uses x <= u*d and x <= pre + |l|*(1-d); the symmetric
    one replaces both constants by M = max(-l, u).  Feasibility mode adds
    the row `output <= 0` instead of an objective.
    """
    if variant not in (TJENG, SYMMETRIC):
        raise ValueError(f"unknown variant {variant!r}")
    if objective_mode not in (MINIMIZE, FEASIBILITY):
        raise ValueError(f"unknown objective mode {objective_mode!r}")
    net = problem.net
    layout = variable_layout(net)
    stages = net.stages()

    names = [""] * layout.n_vars
    for j in range(net.input_dim):
        names[j] = f"x0_{j}"
    for s, (lin, act) in enumerate(stages):
        for j in range(lin.out_width):
            names[layout.pre[s] + j] = f"xh{s + 1}_{j}"
        if act is not None:
            for j in range(layout.post_width[s]):
                names[layout.post[s] + j] = f"x{s + 1}_{j}"

    extra = 0
    for s, (lin, act) in enumerate(stages):
        if act is None:
            continue
        if act.kind == RELU:
            _, _, amb = _classify(bounds.lower[s], bounds.upper[s])
            extra += int(amb.sum())
        else:
            extra += sum(len(g) for g in act.groups)

    n_vars = layout.n_vars + extra
    b = LpBuilder(n_vars)
    binaries = []
    next_bin = layout.n_vars

    for j in range(net.input_dim):
        b.set_bounds(j, problem.domain.lower[j], problem.domain.upper[j])

    in_start, in_width = 0, net.input_dim
    for s, (lin, act) in enumerate(stages):
        p = layout.pre[s]
        for r in range(lin.out_width):
            coeffs = {p + r: 1.0}
            for cidx in range(in_width):
                w = lin.weights[r, cidx]
                if w != 0.0:
                    coeffs[in_start + cidx] = coeffs.get(in_start + cidx, 0.0) - w
            b.add_row(coeffs, EQUAL, lin.bias[r])
        if act is None:
            break
        q = layout.post[s]
        if act.kind == RELU:
            lo, hi = bounds.lower[s], bounds.upper[s]
            blocked, passing, amb = _classify(lo, hi)
            for j in range(lin.out_width):
                if blocked[j]:
                    b.set_bounds(q + j, 0.0, 0.0)
                    b.set_bounds(p + j, -np.inf, 0.0)
                elif passing[j]:
                    b.set_bounds(p + j, 0.0, np.inf)
                    b.add_row({q + j: 1.0, p + j: -1.0}, EQUAL, 0.0)
                else:
                    u, l = hi[j], lo[j]
                    if not (np.isfinite(u) and np.isfinite(l)):
                        raise ValueError(f"infinite bound on ambiguous unit ({s},{j})")
                    up, low_m = (u, -l) if variant == TJENG else (
                        max(-l, u), max(-l, u)
                    )
                    d = next_bin
                    next_bin += 1
                    binaries.append(d)
                    names.append(f"d{s + 1}_{j}")
                    b.set_bounds(d, 0.0, 1.0)
                    b.set_bounds(q + j, 0.0, np.inf)
                    b.add_row({q + j: 1.0, p + j: -1.0}, GREATER, 0.0)
                    b.add_row({q + j: 1.0, d: -up}, LESS, 0.0)
                    b.add_row({q + j: 1.0, p + j: -1.0, d: low_m}, LESS, low_m)
        else:
            lo, hi = bounds.lower[s], bounds.upper[s]
            for g, group in enumerate(act.groups):
                group_max_u = max(hi[j] for j in group)
                ds = []
                for j in group:
                    b.add_row({p + j: 1.0, q + g: -1.0}, LESS, 0.0)
                    d = next_bin
                    next_bin += 1
                    binaries.append(d)
                    names.append(f"d{s + 1}_{j}")
                    ds.append(d)
                    b.set_bounds(d, 0.0, 1.0)
                    big = group_max_u - lo[j]
                    # y <= x_j + (U - l_j)(1 - d_j)
                    b.add_row({q + g: 1.0, p + j: -1.0, d: big}, LESS, big)
                b.add_row({d: 1.0 for d in ds}, EQUAL, 1.0)
        in_start, in_width = q, layout.post_width[s]

    if objective_mode == MINIMIZE:
        b.set_objective({layout.pre[-1]: 1.0})
    else:
        b.add_row({layout.pre[-1]: 1.0}, LESS, 0.0)
    return MipModel(
        lp=b.build(),
        binder=tuple(names),
        binaries=tuple(binaries),
        objective_mode=objective_mode,
    )


def _num(v: float) -> str:
    return repr(float(v))


def _term(coef: float, name: str, first: bool) -> str:
    mag = abs(coef)
    body = name if mag == 1.0 else f"{_num(mag)} {name}"
    if first:
        return f"- {body}" if coef < 0 else body
    return f" - {body}" if coef < 0 else f" + {body}"


def write_lp_file(model: MipModel, path: str) -> None:
    """CPLEX-LP text: Minimize / Subject To / Bounds / Binary / End.

    Row and variable ordering follows the model exactly, so output is
    deterministic and byte-stable for a given problem.
    """
    with open(path, "w") as fh:
        fh.write(format_lp(model))


def format_lp(model: MipModel) -> str:
    lp = model.lp
    names = model.binder
    out = ["Minimize", " obj:"]
    terms = []
    for j in np.nonzero(lp.objective)[0]:
        terms.append((float(lp.objective[j]), names[j]))
    if not terms:
        out[-1] = " obj: 0"
    else:
        line = " obj: "
        for k, (coef, name) in enumerate(terms):
            line += _term(coef, name, first=(k == 0))
        out[-1] = line
    out.append("Subject To")
    rel_txt = {LESS: "<=", EQUAL: "=", GREATER: ">="}
    for r in range(lp.n_rows):
        line = f" c{r}: "
        cols = np.nonzero(lp.coeffs[r])[0]
        for k, j in enumerate(cols):
            line += _term(float(lp.coeffs[r, j]), names[j], first=(k == 0))
        if cols.size == 0:
            line += "0"
        line += f" {rel_txt[lp.relations[r]]} {_num(lp.rhs[r])}"
        out.append(line)
    out.append("Bounds")
    binset = set(model.binaries)
    for j in range(lp.n_vars):
        if j in binset:
            continue  # binaries are declared in their own section
        lo, hi = lp.lower[j], lp.upper[j]
        if lo == -np.inf and hi == np.inf:
            out.append(f" {names[j]} free")
        elif lo == -np.inf:
            out.append(f" -inf <= {names[j]} <= {_num(hi)}")
        elif hi == np.inf:
            out.append(f" {names[j]} >= {_num(lo)}")
        else:
            out.append(f" {_num(lo)} <= {names[j]} <= {_num(hi)}")
    if model.binaries:
        out.append("Binary")
        for j in model.binaries:
            out.append(f" {names[j]}")
    out.append("End")
    return "\n".join(out) + "\n"
