"""Pre-activation bounds and scalar lower bounds.

Three bounding routes with increasing cost and tightness:

* interval arithmetic, propagated through the layers,
* a one-backward-pass dual bound with per-unit relaxation slopes,
* linear programs over the per-unit convex relaxations (the triangle hull,
  or the looser variant that only caps the output at its upper bound).

All of them honour phase fixings from branching: a Blocked unit is clamped
to pre-activation <= 0, a Passing unit to >= 0, before anything else runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from plnnverify import lp as lpmod
from plnnverify.lp import EQUAL, GREATER, LESS, LpBuilder, LpStatus
from plnnverify.network import (
    MAXPOOL,
    RELU,
    ActivationLayer,
    Box,
    CanonicalProblem,
    LinearLayer,
    Network,
)

CLASSIFY_TOL = 1e-9      # blocked/passing threshold on bounds
DEGENERATE_TOL = 1e-12   # ambiguous units narrower than this are pinned
CROSSING_TOL = 1e-9      # crossings beyond this certify an empty subproblem

PLANET = "planet"
RELUPLEX = "reluplex"


class Phase(Enum):
    BLOCKED = "blocked"   # x = 0, pre-activation <= 0
    PASSING = "passing"   # x = pre-activation >= 0


# (stage index, unit index) -> Phase; stages index the linear layers in order.
PhaseFixings = dict


class Infeasible:
    """Marker for an empty subproblem discovered during bound computation."""

    def __repr__(self):
        return "Infeasible()"


INFEASIBLE = Infeasible()


class LpFailureError(RuntimeError):
    """The LP solver gave up; never silently converted into a bound."""


@dataclass(frozen=True)
class LayerBounds:
    """Pre-activation lower/upper vectors, one pair per linear layer."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(np.asarray(v, dtype=float) for v in self.lower))
        object.__setattr__(self, "upper", tuple(np.asarray(v, dtype=float) for v in self.upper))
        if len(self.lower) != len(self.upper):
            raise ValueError("mismatched bound stages")
        for lo, hi in zip(self.lower, self.upper):
            if lo.shape != hi.shape:
                raise ValueError("mismatched bound widths")

    def __len__(self):
        return len(self.lower)


@dataclass(frozen=True)
class DualState:
    """Result of one backward dual pass.

    nu_hat[s] is the multiplier arriving at stage s's post-activations;
    nu[s] the rescaled multiplier on its pre-activations.  The masks record
    the unit partition the pass used.
    """

    bound: float
    nu: tuple
    nu_hat: tuple
    blocked: tuple
    passing: tuple
    ambiguous: tuple


def _relu_stage_indices(net: Network) -> list[int]:
    out = []
    for s, (_, act) in enumerate(net.stages()):
        if act is not None and act.kind == RELU:
            out.append(s)
    return out


def _check_fixings(net: Network, fixings: PhaseFixings) -> None:
    relu_stages = set(_relu_stage_indices(net))
    stages = net.stages()
    for (s, j), phase in fixings.items():
        if s not in relu_stages:
            raise ValueError(f"fixing on stage {s} which has no relu")
        if not 0 <= j < stages[s][0].out_width:
            raise ValueError(f"fixing on unit {j} outside stage {s}")
        if not isinstance(phase, Phase):
            raise ValueError(f"bad phase {phase!r}")


def apply_fixings(
    bounds: LayerBounds, fixings: PhaseFixings
) -> LayerBounds | Infeasible:
    """Clamp each fixed unit's bounds at zero on the fixed side.

    A clamp that crosses the opposite bound by more than the tolerance
    certifies that the fixing contradicts the bounds, i.e. the subproblem
    is empty.
    """
    if not fixings:
        return bounds
    lower = [lo.copy() for lo in bounds.lower]
    upper = [hi.copy() for hi in bounds.upper]
    for (s, j), phase in fixings.items():
        if phase is Phase.BLOCKED:
            upper[s][j] = min(upper[s][j], 0.0)
        else:
            lower[s][j] = max(lower[s][j], 0.0)
        if lower[s][j] > upper[s][j] + CROSSING_TOL:
            return INFEASIBLE
        lower[s][j] = min(lower[s][j], upper[s][j])
    return LayerBounds(tuple(lower), tuple(upper))


def interval_propagate(
    problem: CanonicalProblem, fixings: PhaseFixings | None = None
) -> LayerBounds | Infeasible:
    """Layer-by-layer interval arithmetic.

    Positive weight parts multiply the matching bound side, negative parts
    the opposite side; relu clamps the post-activation interval at zero and
    maxpool takes groupwise maxima of both sides.
    """
    fixings = fixings or {}
    net = problem.net
    _check_fixings(net, fixings)
    post_lo, post_hi = problem.domain.lower, problem.domain.upper
    lower, upper = [], []
    for s, (lin, act) in enumerate(net.stages()):
        wp = np.maximum(lin.weights, 0.0)
        wm = np.minimum(lin.weights, 0.0)
        pre_lo = wp @ post_lo + wm @ post_hi + lin.bias
        pre_hi = wp @ post_hi + wm @ post_lo + lin.bias
        for (fs, j), phase in fixings.items():
            if fs != s:
                continue
            if phase is Phase.BLOCKED:
                pre_hi[j] = min(pre_hi[j], 0.0)
            else:
                pre_lo[j] = max(pre_lo[j], 0.0)
            if pre_lo[j] > pre_hi[j] + CROSSING_TOL:
                return INFEASIBLE
            pre_lo[j] = min(pre_lo[j], pre_hi[j])
        lower.append(pre_lo)
        upper.append(pre_hi)
        if act is None:
            post_lo, post_hi = pre_lo, pre_hi
        elif act.kind == RELU:
            post_lo = np.maximum(pre_lo, 0.0)
            post_hi = np.maximum(pre_hi, 0.0)
        else:
            post_lo = np.array([pre_lo[list(g)].max() for g in act.groups])
            post_hi = np.array([pre_hi[list(g)].max() for g in act.groups])
    return LayerBounds(tuple(lower), tuple(upper))


def best_bounds(a: LayerBounds, b: LayerBounds) -> LayerBounds | Infeasible:
    """Elementwise intersection: max of lowers, min of uppers.

    Bounds that cross by more than the tolerance mean the two inputs were
    inconsistent, which only happens for empty subproblems.
    """
    if len(a) != len(b):
        raise ValueError("bound structures differ")
    lower, upper = [], []
    for lo_a, hi_a, lo_b, hi_b in zip(a.lower, a.upper, b.lower, b.upper):
        lo = np.maximum(lo_a, lo_b)
        hi = np.minimum(hi_a, hi_b)
        if np.any(lo > hi + CROSSING_TOL):
            return INFEASIBLE
        lower.append(np.minimum(lo, hi))
        upper.append(hi)
    return LayerBounds(tuple(lower), tuple(upper))


def _classify(lo: np.ndarray, hi: np.ndarray):
    """Partition units into blocked / passing / ambiguous masks."""
    blocked = hi <= CLASSIFY_TOL
    passing = ~blocked & (lo >= -CLASSIFY_TOL)
    ambiguous = ~blocked & ~passing
    # Degenerate straddling intervals get pinned at the sign of the upper bound.
    degen = ambiguous & (hi - lo < DEGENERATE_TOL)
    if degen.any():
        passing = passing | (degen & (hi > 0))
        blocked = blocked | (degen & (hi <= 0))
        ambiguous = ambiguous & ~degen
    return blocked, passing, ambiguous


def _require_relu_only(net: Network, what: str) -> None:
    if net.has_maxpool():
        raise ValueError(f"{what} requires a relu-only network; lower maxpool first")


def _dual_pass(linears, los, his, C, collect_state=False):
    """Shared backward recursion.

    ``linears`` are the k linear layers of a (sub)network; los/his the
    clamped pre-activation bounds for stages 0..k-2; C an (h_{k-1}, batch)
    objective matrix.  Returns per-column lower bounds on min C^T pre_k-1,
    plus the per-stage multipliers when requested.
    """
    k = len(linears)
    batch = C.shape[1]
    nu = -C
    acc = -(linears[k - 1].bias @ nu)
    nu_list = [None] * k
    nu_hat_list = [None] * k
    masks = [None] * k
    nu_list[k - 1] = nu
    for s in range(k - 2, -1, -1):
        nu_hat = linears[s + 1].weights.T @ nu
        lo, hi = los[s], his[s]
        blocked, passing, ambiguous = _classify(lo, hi)
        d = np.zeros(lo.shape[0])
        d[passing] = 1.0
        if ambiguous.any():
            slope = hi[ambiguous] / (hi[ambiguous] - lo[ambiguous])
            d[ambiguous] = slope
            coeff = hi[ambiguous] * lo[ambiguous] / (hi[ambiguous] - lo[ambiguous])
            acc = acc + coeff @ np.maximum(nu_hat[ambiguous], 0.0)
        nu = d[:, None] * nu_hat
        acc = acc - linears[s].bias @ nu
        if collect_state:
            nu_hat_list[s] = nu_hat
            nu_list[s] = nu
            masks[s] = (blocked, passing, ambiguous)
    nu_hat_in = linears[0].weights.T @ nu
    return acc, nu_hat_in, nu_list, nu_hat_list, masks


def _input_term(box: Box, nu_hat_in: np.ndarray) -> np.ndarray:
    pos = np.maximum(nu_hat_in, 0.0)
    neg = np.maximum(-nu_hat_in, 0.0)
    return box.lower @ neg - box.upper @ pos


def dual_state(
    problem: CanonicalProblem,
    bounds: LayerBounds,
    fixings: PhaseFixings | None = None,
) -> DualState | Infeasible:
    """One backward pass over the canonical network, keeping the multipliers."""
    fixings = fixings or {}
    net = problem.net
    _require_relu_only(net, "dual bounding")
    _check_fixings(net, fixings)
    clamped = apply_fixings(bounds, fixings)
    if isinstance(clamped, Infeasible):
        return INFEASIBLE
    linears = [lin for lin, _ in net.stages()]
    C = np.eye(1)
    acc, nu_hat_in, nu_list, nu_hat_list, masks = _dual_pass(
        linears, clamped.lower, clamped.upper, C, collect_state=True
    )
    bound = float(acc[0] + _input_term(problem.domain, nu_hat_in)[0])
    n_hidden = len(linears) - 1
    return DualState(
        bound=bound,
        nu=tuple(v[:, 0] if v is not None else None for v in nu_list),
        nu_hat=tuple(
            nu_hat_list[s][:, 0] if nu_hat_list[s] is not None else None
            for s in range(len(linears))
        ),
        blocked=tuple(masks[s][0] if masks[s] else None for s in range(len(linears))),
        passing=tuple(masks[s][1] if masks[s] else None for s in range(len(linears))),
        ambiguous=tuple(masks[s][2] if masks[s] else None for s in range(len(linears))),
    )


def wk_dual_bound(
    problem: CanonicalProblem,
    bounds: LayerBounds,
    fixings: PhaseFixings | None = None,
) -> float:
    """Fast lower bound on the canonical output from one backward pass.

    Returns +inf when the fixings contradict the bounds (empty subproblem).
    """
    state = dual_state(problem, bounds, fixings)
    if isinstance(state, Infeasible):
        return np.inf
    return state.bound


def wk_layer_bounds(
    problem: CanonicalProblem, fixings: PhaseFixings | None = None
) -> LayerBounds | Infeasible:
    """Dual bounds for every pre-activation, front to back.

    Each stage is bounded by treating the network truncated at that stage
    as the objective (both signs at once, batched); earlier stages' clamped
    results feed the later recursions.
    """
    fixings = fixings or {}
    net = problem.net
    _require_relu_only(net, "dual bounding")
    _check_fixings(net, fixings)
    linears = [lin for lin, _ in net.stages()]
    lower, upper = [], []
    for t, lin in enumerate(linears):
        h = lin.out_width
        eye = np.eye(h)
        C = np.hstack([eye, -eye])  # lower bounds, then negated uppers
        acc, nu_hat_in, _, _, _ = _dual_pass(
            linears[: t + 1], lower, upper, C, collect_state=False
        )
        vals = acc + _input_term(problem.domain, nu_hat_in)
        lo, hi = vals[:h], -vals[h:]
        for (fs, j), phase in fixings.items():
            if fs != t:
                continue
            if phase is Phase.BLOCKED:
                hi[j] = min(hi[j], 0.0)
            else:
                lo[j] = max(lo[j], 0.0)
            if lo[j] > hi[j] + CROSSING_TOL:
                return INFEASIBLE
            lo[j] = min(lo[j], hi[j])
        lower.append(lo)
        upper.append(hi)
    return LayerBounds(tuple(lower), tuple(upper))


@dataclass(frozen=True)
class VariableLayout:
    """Column indices of the relaxation variables.

    Layout: the input block, then per stage its pre-activation block and,
    when an activation follows, its post-activation block.
    """

    input_dim: int
    pre: tuple
    post: tuple
    post_width: tuple
    n_vars: int


def variable_layout(net: Network) -> VariableLayout:
    idx = net.input_dim
    pre, post, post_width = [], [], []
    for lin, act in net.stages():
        pre.append(idx)
        idx += lin.out_width
        if act is None:
            post.append(None)
            post_width.append(0)
        else:
            w = act.out_width(lin.out_width)
            post.append(idx)
            post_width.append(w)
            idx += w
    return VariableLayout(
        input_dim=net.input_dim,
        pre=tuple(pre),
        post=tuple(post),
        post_width=tuple(post_width),
        n_vars=idx,
    )


def _relaxation_builder(
    problem: CanonicalProblem,
    clamped: LayerBounds,
    kind: str,
    upto_stage: int | None = None,
):
    """LP rows shared by bounding and refinement.

    ``upto_stage`` truncates the model after that stage's pre-activation
    block (its activation rows are omitted), which is what layer-by-layer
    refinement needs.
    """
    if kind not in (PLANET, RELUPLEX):
        raise ValueError(f"unknown relaxation kind {kind!r}")
    net = problem.net
    layout = variable_layout(net)
    stages = net.stages()
    last = len(stages) - 1 if upto_stage is None else upto_stage
    b = LpBuilder(layout.n_vars)
    for j in range(net.input_dim):
        b.set_bounds(j, problem.domain.lower[j], problem.domain.upper[j])

    in_start, in_width = 0, net.input_dim
    for s, (lin, act) in enumerate(stages[: last + 1]):
        p = layout.pre[s]
        for r in range(lin.out_width):
            coeffs = {p + r: 1.0}
            for cidx in range(in_width):
                w = lin.weights[r, cidx]
                if w != 0.0:
                    coeffs[in_start + cidx] = coeffs.get(in_start + cidx, 0.0) - w
            b.add_row(coeffs, EQUAL, lin.bias[r])
        if s == last or act is None:
            break
        q = layout.post[s]
        if act.kind == RELU:
            lo, hi = clamped.lower[s], clamped.upper[s]
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValueError(f"non-finite bounds for relu stage {s}")
            blocked, passing, ambiguous = _classify(lo, hi)
            for j in range(lin.out_width):
                if blocked[j]:
                    b.set_bounds(q + j, 0.0, 0.0)
                    b.set_bounds(p + j, -np.inf, 0.0)
                elif passing[j]:
                    b.set_bounds(p + j, 0.0, np.inf)
                    b.add_row({q + j: 1.0, p + j: -1.0}, EQUAL, 0.0)
                else:
                    b.set_bounds(q + j, 0.0, np.inf)
                    b.add_row({p + j: 1.0, q + j: -1.0}, LESS, 0.0)
                    u, l = hi[j], lo[j]
                    if kind == PLANET:
                        b.add_row({q + j: u - l, p + j: -u}, LESS, -u * l)
                    else:
                        b.set_bounds(q + j, 0.0, u)
        else:
            lo = clamped.lower[s]
            if not np.all(np.isfinite(lo)):
                raise ValueError(f"non-finite bounds for maxpool stage {s}")
            for g, group in enumerate(act.groups):
                for j in group:
                    b.add_row({p + j: 1.0, q + g: -1.0}, LESS, 0.0)
                coeffs = {q + g: 1.0}
                for j in group:
                    coeffs[p + j] = -1.0
                rhs = -sum(lo[j] for j in group) + max(lo[j] for j in group)
                b.add_row(coeffs, LESS, rhs)
        in_start, in_width = q, layout.post_width[s]
    return b, layout


def build_relaxation(
    problem: CanonicalProblem,
    bounds: LayerBounds,
    fixings: PhaseFixings | None = None,
    kind: str = PLANET,
) -> lpmod.LinearProgram:
    """LP whose optimum lower-bounds the canonical output on the subproblem.

    Ambiguous relus get  x >= 0, x >= pre  plus either the triangle-hull
    upper face (planet) or the flat cap x <= u (reluplex); fixed and
    sign-determined units are encoded exactly.  Maxpool groups, when still
    present, use their convex-hull rows.
    """
    fixings = fixings or {}
    _check_fixings(problem.net, fixings)
    clamped = apply_fixings(bounds, fixings)
    if isinstance(clamped, Infeasible):
        raise ValueError("fixings contradict the supplied bounds")
    builder, layout = _relaxation_builder(problem, clamped, kind)
    builder.set_objective({layout.pre[-1]: 1.0})
    return builder.build()


@dataclass(frozen=True)
class LowerBound:
    value: float
    witness: np.ndarray  # input-space part of the LP optimum


def lp_lower_bound(
    problem: CanonicalProblem,
    bounds: LayerBounds,
    fixings: PhaseFixings | None = None,
    kind: str = PLANET,
) -> LowerBound | Infeasible:
    """Solve the relaxation; infeasibility certifies an empty subproblem."""
    fixings = fixings or {}
    clamped = apply_fixings(bounds, fixings)
    if isinstance(clamped, Infeasible):
        return INFEASIBLE
    builder, layout = _relaxation_builder(problem, clamped, kind)
    builder.set_objective({layout.pre[-1]: 1.0})
    sol = lpmod.solve(builder.build())
    if sol.status == LpStatus.INFEASIBLE:
        return INFEASIBLE
    if sol.status != LpStatus.OPTIMAL:
        raise LpFailureError(f"relaxation solve failed: {sol.status.value}")
    return LowerBound(value=sol.objective, witness=sol.x[: problem.net.input_dim].copy())


def refine_bounds_lp(
    problem: CanonicalProblem,
    bounds: LayerBounds,
    fixings: PhaseFixings | None = None,
    layers=None,
) -> LayerBounds | Infeasible:
    """Tighten selected stages' bounds by per-unit LPs, front to back.

    Each selected stage is min/max-imized unit by unit over the triangle
    relaxation built from the stages before it (already refined); results
    never loosen the input bounds.  Within one stage the units are solved
    independently from the same model.
    """
    fixings = fixings or {}
    net = problem.net
    _check_fixings(net, fixings)
    clamped = apply_fixings(bounds, fixings)
    if isinstance(clamped, Infeasible):
        return INFEASIBLE
    if layers is None:
        layers = range(len(net.stages()))
    layers = sorted(set(int(t) for t in layers))
    lower = [lo.copy() for lo in clamped.lower]
    upper = [hi.copy() for hi in clamped.upper]
    for t in layers:
        current = LayerBounds(tuple(lower), tuple(upper))
        builder, layout = _relaxation_builder(problem, current, PLANET, upto_stage=t)
        base = builder.build()
        h = net.stages()[t][0].out_width
        for j in range(h):
            obj = np.zeros(base.n_vars)
            obj[layout.pre[t] + j] = 1.0
            lo_sol = lpmod.resolve_with(base, objective=obj)
            if lo_sol.status == LpStatus.INFEASIBLE:
                return INFEASIBLE
            if lo_sol.status != LpStatus.OPTIMAL:
                raise LpFailureError(f"refinement solve failed: {lo_sol.status.value}")
            hi_sol = lpmod.resolve_with(base, objective=-obj)
            if hi_sol.status != LpStatus.OPTIMAL:
                raise LpFailureError(f"refinement solve failed: {hi_sol.status.value}")
            new_lo, new_hi = lo_sol.objective, -hi_sol.objective
            lo_j = max(lower[t][j], new_lo)
            hi_j = min(upper[t][j], new_hi)
            if lo_j > hi_j + CROSSING_TOL:
                return INFEASIBLE
            lower[t][j] = min(lo_j, hi_j)
            upper[t][j] = hi_j
    return LayerBounds(tuple(lower), tuple(upper))


def interval_bounds_provider(box: Box):
    """Lower bounds of a layer-prefix's output by interval propagation,
    in the shape maxpool lowering expects."""

    def provider(layers) -> np.ndarray:
        lo, hi = box.lower, box.upper
        for layer in layers:
            if isinstance(layer, LinearLayer):
                wp = np.maximum(layer.weights, 0.0)
                wm = np.minimum(layer.weights, 0.0)
                lo, hi = (
                    wp @ lo + wm @ hi + layer.bias,
                    wp @ hi + wm @ lo + layer.bias,
                )
            elif layer.kind == RELU:
                lo, hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
            else:
                lo = np.array([lo[list(g)].max() for g in layer.groups])
                hi = np.array([hi[list(g)].max() for g in layer.groups])
        return lo

    return provider


def ambiguous_units(
    problem: CanonicalProblem,
    bounds: LayerBounds,
    fixings: PhaseFixings | None = None,
) -> list[tuple[int, int]]:
    """Unfixed relu units whose clamped bounds still straddle zero."""
    fixings = fixings or {}
    clamped = apply_fixings(bounds, fixings)
    if isinstance(clamped, Infeasible):
        return []
    out = []
    for s in _relu_stage_indices(problem.net):
        _, _, amb = _classify(clamped.lower[s], clamped.upper[s])
        for j in np.where(amb)[0]:
            if (s, int(j)) not in fixings:
                out.append((s, int(j)))
    return out
