"""Branch-and-bound driver with pluggable search, branching and bounding.

The queue always pops the subproblem with the smallest cached lower bound;
splitting either bisects an input dimension or fixes one relu's phase, and
every child is re-bounded according to the strategy's intermediate-bound
policy before the relaxation LP runs.  In decide mode the global upper
bound starts at zero so that any negative value certifies a counterexample
and any subproblem bounded above zero is pruned.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace

import numpy as np

from plnnverify import bounds as bnd
from plnnverify import lp as lpmod
from plnnverify.bounds import (
    INFEASIBLE,
    Infeasible,
    LayerBounds,
    LowerBound,
    Phase,
    PLANET,
    RELUPLEX,
    apply_fixings,
    best_bounds,
    build_relaxation,
    dual_state,
    interval_propagate,
    lp_lower_bound,
    refine_bounds_lp,
    variable_layout,
    wk_dual_bound,
    wk_layer_bounds,
)
from plnnverify.lp import EQUAL, GREATER, LESS, LpStatus
from plnnverify.network import (
    Box,
    CanonicalProblem,
    LinearLayer,
    eval_network,
    maxpool_to_relu,
    validate_counterexample,
)

STRATEGIES = ("bab", "babsb", "relubab", "babsr", "babsrl")
IMB_POLICIES = ("none", "wk", "lp-all", "lp-one")

# Default strategy/approximation pairings; overridable through the config.
DEFAULT_IMB = {
    "bab": "lp-all",
    "babsb": "lp-all",
    "relubab": "lp-all",
    "babsr": "wk",
    "babsrl": "lp-one",
}
DEFAULT_SAMPLES = {"bab": 20, "babsb": 20, "relubab": 20, "babsr": 0, "babsrl": 0}

DECIDE_PRUNE_TOL = 1e-7
ZERO_MARGIN_TOL = 1e-7
UNSPLITTABLE_WIDTH = 1e-12
SPARSE_ZERO_FRACTION = 0.9
SPARSE_WIDTH_FACTOR = 4.0
SPARSE_SCORE_THRESHOLD = 1e-4
COUNTEREXAMPLE_TOL = 1e-7

UNSAT = "UNSAT"
SAT = "SAT"
TIMEOUT = "TIMEOUT"


class Unsplittable(Exception):
    """Box too small to bisect."""


class FullyFixed(Exception):
    """No ambiguous relu left; the subproblem is a single LP."""


@dataclass
class Subproblem:
    box: Box
    fixings: dict
    lb: float
    depth: int
    bounds_cache: LayerBounds | None = None
    node_id: int = -1


@dataclass
class BabConfig:
    mode: str = "decide"                # "decide" or "optimize"
    strategy: str = "babsr"
    relaxation: str = PLANET            # planet or reluplex
    imb_policy: str | None = None       # default depends on the strategy
    epsilon: float = 1e-4
    timeout: float = 3600.0
    samples: int | None = None          # upper-bound samples per node
    seed: int = 0
    node_limit: int = 10 ** 9
    depth_limit: int = 10 ** 6
    trace: io.TextIOBase | None = None  # per-node CSV stream

    def __post_init__(self):
        if self.mode not in ("decide", "optimize"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.relaxation not in (PLANET, RELUPLEX):
            raise ValueError(f"unknown relaxation {self.relaxation!r}")
        if self.imb_policy is None:
            self.imb_policy = DEFAULT_IMB[self.strategy]
        if self.imb_policy not in IMB_POLICIES:
            raise ValueError(f"unknown bound policy {self.imb_policy!r}")
        if self.samples is None:
            self.samples = DEFAULT_SAMPLES[self.strategy]
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class BabStats:
    nodes: int = 0
    lp_calls: int = 0
    wall_time: float = 0.0
    node_times: list = field(default_factory=list)


@dataclass
class BabResult:
    status: str
    lower_bound: float
    upper_bound: float
    counterexample: np.ndarray | None
    stats: BabStats
    zero_margin: bool = False

    @property
    def minimum(self) -> float:
        """Best value found; within epsilon of the true minimum once the
        gap has closed in optimize mode."""
        return self.upper_bound


def pick_out(queue: list) -> Subproblem:
    """Remove and return the entry with the smallest lower bound, earliest
    insertion first on ties."""
    if not queue:
        raise IndexError("empty subproblem queue")
    best = 0
    for i in range(1, len(queue)):
        if (queue[i][1].lb, queue[i][0]) < (queue[best][1].lb, queue[best][0]):
            best = i
    return queue.pop(best)[1]


def split_input_longest(sub: Subproblem) -> tuple[Subproblem, Subproblem]:
    """Bisect the widest box dimension at its midpoint, lowest index on ties."""
    widths = sub.box.upper - sub.box.lower
    if np.all(widths < UNSPLITTABLE_WIDTH):
        raise Unsplittable
    dim = int(np.argmax(widths))
    return _bisect(sub, dim)


def _bisect(sub: Subproblem, dim: int) -> tuple[Subproblem, Subproblem]:
    mid = 0.5 * (sub.box.lower[dim] + sub.box.upper[dim])
    lo_hi = sub.box.upper.copy()
    lo_hi[dim] = mid
    hi_lo = sub.box.lower.copy()
    hi_lo[dim] = mid
    left = Subproblem(Box(sub.box.lower, lo_hi), dict(sub.fixings), sub.lb, sub.depth + 1)
    right = Subproblem(Box(hi_lo, sub.box.upper), dict(sub.fixings), sub.lb, sub.depth + 1)
    return left, right


def _with_box(problem: CanonicalProblem, box: Box) -> CanonicalProblem:
    return CanonicalProblem(problem.net, box)


def _wk_bounds(problem: CanonicalProblem, fixings: dict):
    """Better of interval arithmetic and the backward dual layer bounds."""
    ib = interval_propagate(problem, fixings)
    if isinstance(ib, Infeasible):
        return INFEASIBLE
    wk = wk_layer_bounds(problem, fixings)
    if isinstance(wk, Infeasible):
        return INFEASIBLE
    return best_bounds(ib, wk)


def split_input_smart(
    sub: Subproblem, problem: CanonicalProblem
) -> tuple[Subproblem, Subproblem]:
    """Bisect the dimension whose split improves the dual bound the most.

    Every dimension is tentatively halved and each half is scored with the
    fast backward bound, reusing the parent's intermediate bounds (valid on
    any sub-box, and the cheapest sound choice); a split's score is the
    worse of its two halves.  Ties go to the lowest index.
    """
    widths = sub.box.upper - sub.box.lower
    if np.all(widths < UNSPLITTABLE_WIDTH):
        raise Unsplittable
    parent_bounds = sub.bounds_cache
    best_dim, best_score = -1, -np.inf
    for dim in range(sub.box.dim):
        if widths[dim] < UNSPLITTABLE_WIDTH:
            continue
        halves = _bisect(sub, dim)
        score = np.inf
        for child in halves:
            child_problem = _with_box(problem, child.box)
            cb = _wk_bounds(child_problem, child.fixings)
            if not isinstance(cb, Infeasible) and parent_bounds is not None:
                # The parent's bounds stay valid on the half; keep the best.
                cb = best_bounds(cb, parent_bounds)
            f = (
                np.inf
                if isinstance(cb, Infeasible)
                else wk_dual_bound(child_problem, cb, child.fixings)
            )
            score = min(score, f)
        if score > best_score:
            best_dim, best_score = dim, score
    return _bisect(sub, best_dim)


def _relu_split_children(sub: Subproblem, unit: tuple[int, int]):
    blocked = dict(sub.fixings)
    blocked[unit] = Phase.BLOCKED
    passing = dict(sub.fixings)
    passing[unit] = Phase.PASSING
    return (
        Subproblem(sub.box, blocked, sub.lb, sub.depth + 1),
        Subproblem(sub.box, passing, sub.lb, sub.depth + 1),
    )


def split_relu_first(
    sub: Subproblem, bounds: LayerBounds
) -> tuple[Subproblem, Subproblem]:
    """Fix the first unfixed ambiguous relu, scanning stages then units."""
    problem_units = _ambiguous(sub, bounds)
    if not problem_units:
        raise FullyFixed
    return _relu_split_children(sub, problem_units[0])


def _ambiguous(sub: Subproblem, bounds: LayerBounds) -> list[tuple[int, int]]:
    """Unfixed straddling relu units; the final stage has no activation."""
    clamped = apply_fixings(bounds, sub.fixings)
    if isinstance(clamped, Infeasible):
        return []
    out = []
    for s in range(len(clamped) - 1):
        lo, hi = clamped.lower[s], clamped.upper[s]
        _, _, amb = bnd._classify(lo, hi)
        for j in np.where(amb)[0]:
            if (s, int(j)) not in sub.fixings:
                out.append((s, int(j)))
    return out


def babsr_scores(
    problem: CanonicalProblem, bounds: LayerBounds, fixings: dict
) -> dict[tuple[int, int], float]:
    """Per-unit estimate of the bound improvement a split would bring.

    All scores come from the single backward pass of the dual bound: for an
    ambiguous unit with multiplier nh, slope ratio r = u/(u-l) and producing
    bias b, the score is |min(r*nh*b, (r-1)*nh*b) - (u*l/(u-l))*[nh]_+|.
    Fixed or sign-determined units score -inf.
    """
    state = dual_state(problem, bounds, fixings)
    scores: dict[tuple[int, int], float] = {}
    if isinstance(state, Infeasible):
        return scores
    clamped = apply_fixings(bounds, fixings)
    linears = [lin for lin, _ in problem.net.stages()]
    for s in range(len(linears) - 1):
        nu_hat = state.nu_hat[s]
        amb = state.ambiguous[s]
        lo, hi = clamped.lower[s], clamped.upper[s]
        for j in range(linears[s].out_width):
            key = (s, j)
            if not amb[j] or key in fixings:
                scores[key] = -np.inf
                continue
            u, l = hi[j], lo[j]
            r = u / (u - l)
            nh = nu_hat[j]
            b = linears[s].bias[j]
            term_bias = min(r * nh * b, (r - 1.0) * nh * b)
            term_hull = (u * l / (u - l)) * max(nh, 0.0)
            scores[key] = abs(term_bias - term_hull)
    return scores


def sparse_stages(problem: CanonicalProblem) -> set[int]:
    """Stages whose linear layer is mostly zeros and disproportionately wide;
    their units are deferred during score-based relu selection."""
    linears = [lin for lin, _ in problem.net.stages()]
    if not linears:
        return set()
    mean_width = float(np.mean([l.out_width for l in linears]))
    out = set()
    for s, lin in enumerate(linears[:-1]):
        zero_frac = float(np.mean(lin.weights == 0.0))
        if zero_frac > SPARSE_ZERO_FRACTION and lin.out_width > SPARSE_WIDTH_FACTOR * mean_width:
            out.add(s)
    return out


def split_relu_babsr(
    sub: Subproblem,
    problem: CanonicalProblem,
    bounds: LayerBounds,
    rng: np.random.Generator,
    sparse: set[int] | None = None,
) -> tuple[Subproblem, Subproblem]:
    """Fix the highest-scoring ambiguous relu.

    Units on sparse layers are only considered once every other score is
    negligible, and when even those scores are uninformative the choice
    falls back to a seeded uniform pick preferring non-sparse layers.
    """
    sparse = sparse or set()
    candidates = _ambiguous(sub, bounds)
    if not candidates:
        raise FullyFixed
    scores = babsr_scores(problem, bounds, sub.fixings)
    non_sparse = [u for u in candidates if u[0] not in sparse]
    pool = non_sparse or candidates
    best_unit = min(pool, key=lambda u: (-scores.get(u, -np.inf), u))
    if scores.get(best_unit, -np.inf) < SPARSE_SCORE_THRESHOLD:
        pick = pool[int(rng.integers(0, len(pool)))]
        return _relu_split_children(sub, pick)
    return _relu_split_children(sub, best_unit)


def _split_unit(parent: Subproblem, child: Subproblem) -> tuple[int, int]:
    new = set(child.fixings) - set(parent.fixings)
    return next(iter(new))


def compute_upper_bound(
    problem: CanonicalProblem,
    sub: Subproblem,
    lp_witness: np.ndarray | None,
    samples: int,
    rng: np.random.Generator,
) -> tuple[float, np.ndarray | None]:
    """Best network value over uniform in-box samples plus the LP witness.

    Any in-box point is feasible for the original problem regardless of the
    subproblem's phase fixings, so fixings are deliberately ignored here.
    """
    best_val, best_pt = np.inf, None
    if lp_witness is not None:
        v = eval_network(problem.net, lp_witness)[0]
        best_val, best_pt = v, np.asarray(lp_witness, dtype=float)
    for _ in range(samples):
        x = rng.uniform(sub.box.lower, sub.box.upper)
        v = eval_network(problem.net, x)[0]
        if v < best_val:
            best_val, best_pt = v, x
    return float(best_val), best_pt


class _RelaxSession:
    """One relaxation model per run, re-solved with per-node modifications.

    The base LP is built from the root bounds; a subproblem contributes its
    input box as changed variable bounds and, for every unit that was
    ambiguous at the root, rows reflecting its current classification (the
    root rows stay in place and remain valid, so the result is at least as
    tight as a fresh build from the same bounds).
    """

    def __init__(self, problem: CanonicalProblem, root_bounds: LayerBounds, kind: str):
        self.problem = problem
        self.kind = kind
        self.layout = variable_layout(problem.net)
        self.base = build_relaxation(problem, root_bounds, {}, kind)
        self.root_bounds = root_bounds
        amb = []
        for s, (_, act) in enumerate(problem.net.stages()):
            if act is None or act.kind != "relu":
                continue
            _, _, mask = bnd._classify(root_bounds.lower[s], root_bounds.upper[s])
            amb.extend((s, int(j)) for j in np.where(mask)[0])
        self.root_ambiguous = amb

    def lower_bound(
        self, box: Box, fixings: dict, bounds: LayerBounds
    ) -> LowerBound | Infeasible:
        clamped = apply_fixings(bounds, fixings)
        if isinstance(clamped, Infeasible):
            return INFEASIBLE
        n = self.base.n_vars
        changed = {}
        for j in range(box.dim):
            changed[j] = (box.lower[j], box.upper[j])
        extra = []
        for s, j in self.root_ambiguous:
            p = self.layout.pre[s] + j
            q = self.layout.post[s] + j
            lo, hi = clamped.lower[s][j], clamped.upper[s][j]
            changed[p] = (lo, hi)
            blocked, passing, amb = bnd._classify(
                np.array([lo]), np.array([hi])
            )
            if blocked[0]:
                row = np.zeros(n)
                row[q] = 1.0
                extra.append((row, LESS, 0.0))
            elif passing[0]:
                row = np.zeros(n)
                row[q] = 1.0
                row[p] = -1.0
                extra.append((row, LESS, 0.0))
            else:
                rl, ru = self.root_bounds.lower[s][j], self.root_bounds.upper[s][j]
                if lo > rl or hi < ru:
                    if self.kind == PLANET:
                        row = np.zeros(n)
                        row[q] = hi - lo
                        row[p] = -hi
                        extra.append((row, LESS, -hi * lo))
                    else:
                        changed[q] = (0.0, hi)
        sol = lpmod.resolve_with(self.base, changed_variable_bounds=changed, extra_rows=extra)
        if sol.status == LpStatus.INFEASIBLE:
            return INFEASIBLE
        if sol.status != LpStatus.OPTIMAL:
            raise bnd.LpFailureError(f"session solve failed: {sol.status.value}")
        return LowerBound(sol.objective, sol.x[: self.problem.net.input_dim].copy())


def _hidden_stage_range(problem: CanonicalProblem) -> list[int]:
    return list(range(len(problem.net.stages()) - 1))


def _child_bounds(
    problem: CanonicalProblem,
    child: Subproblem,
    policy: str,
    root_bounds: LayerBounds,
    split_unit: tuple[int, int] | None,
):
    """Intermediate bounds for a freshly created child, per policy."""
    child_problem = _with_box(problem, child.box)
    if policy == "none":
        return apply_fixings(root_bounds, child.fixings)
    if policy == "wk":
        return _wk_bounds(child_problem, child.fixings)
    if policy == "lp-all":
        ib = interval_propagate(child_problem, child.fixings)
        if isinstance(ib, Infeasible):
            return INFEASIBLE
        # Stage 0 is exact under interval arithmetic already.
        layers = [s for s in _hidden_stage_range(child_problem) if s > 0]
        return refine_bounds_lp(child_problem, ib, child.fixings, layers=layers)
    if policy == "lp-one":
        base = _wk_bounds(child_problem, child.fixings)
        if isinstance(base, Infeasible) or split_unit is None or split_unit[0] == 0:
            return base
        return refine_bounds_lp(
            child_problem, base, child.fixings, layers=[split_unit[0] - 1]
        )
    raise ValueError(f"unknown policy {policy!r}")


def run_bab(problem: CanonicalProblem, config: BabConfig) -> BabResult:
    """Optimize or decide the canonical problem.

    Optimize mode closes the global bound gap to epsilon; decide mode
    reports UNSAT once every subproblem proves a nonnegative minimum, or
    SAT with a validated counterexample as soon as any value drops below
    zero.  Maxpool layers are lowered to relu form up front.
    """
    t_start = time.monotonic()
    lp_calls_start = lpmod.solve_count()
    rng = np.random.default_rng(config.seed)
    stats = BabStats()
    decide = config.mode == "decide"

    if problem.net.has_maxpool():
        provider = bnd.interval_bounds_provider(problem.domain)
        problem = CanonicalProblem(
            maxpool_to_relu(problem.net, provider), problem.domain
        )

    sparse = sparse_stages(problem) if config.strategy in ("babsr", "babsrl") else set()
    tracer = _Tracer(config.trace)

    def out_of_budget() -> bool:
        return (
            time.monotonic() - t_start > config.timeout
            or stats.nodes > config.node_limit
        )

    root = Subproblem(problem.domain, {}, -np.inf, 0)
    if config.imb_policy == "none":
        root_bounds = interval_propagate(problem, {})
    else:
        root_bounds = _child_bounds(problem, root, config.imb_policy, None, None)
    if isinstance(root_bounds, Infeasible):
        raise RuntimeError("root bounds infeasible on a nonempty box")
    root.bounds_cache = root_bounds

    session = None
    if config.imb_policy in ("none", "wk"):
        session = _RelaxSession(problem, root_bounds, config.relaxation)

    def lower(sub: Subproblem, sb: LayerBounds):
        if session is not None:
            return session.lower_bound(sub.box, sub.fixings, sb)
        return lp_lower_bound(
            _with_box(problem, sub.box), sb, sub.fixings, config.relaxation
        )

    global_ub = 0.0 if decide else np.inf
    global_ub_point = None
    global_lb = -np.inf
    lb_floor = np.inf  # least finalized leaf bound; a sound global floor
    zero_margin = False
    counterexample = None
    status = None
    queue: list = []
    order = 0

    def finalize(lb_value: float):
        nonlocal lb_floor, zero_margin
        lb_floor = min(lb_floor, lb_value)
        if decide and abs(lb_value) <= ZERO_MARGIN_TOL:
            zero_margin = True

    def found_counterexample(value: float, point: np.ndarray | None) -> bool:
        nonlocal counterexample
        if point is None or not value < 0.0:
            return False
        if validate_counterexample(problem, point, COUNTEREXAMPLE_TOL):
            counterexample = point
            return True
        return False

    keep_threshold = (lambda: -DECIDE_PRUNE_TOL) if decide else (lambda: global_ub)

    root_res = lower(root, root_bounds)
    if isinstance(root_res, Infeasible):
        raise RuntimeError("root relaxation infeasible on a nonempty box")
    root.lb = root_res.value
    root.node_id = 0
    stats.nodes = 1
    root_ub, root_pt = compute_upper_bound(
        problem, root, root_res.witness, config.samples, rng
    )
    tracer.emit(0, -1, root.lb, root_ub, "root", time.monotonic() - t_start)
    if root_ub < global_ub:
        global_ub, global_ub_point = root_ub, root_pt
    if decide and found_counterexample(root_ub, root_pt):
        status = SAT
    if status is None:
        global_lb = root.lb
        if root.lb < keep_threshold() and _ambiguous(root, root_bounds):
            queue.append((order, root))
            order += 1
        else:
            finalize(root.lb)

    while status is None:
        if not queue:
            if decide:
                status = UNSAT
                global_lb = lb_floor if np.isfinite(lb_floor) else global_ub
            else:
                status = SAT if global_ub < 0 else UNSAT
                global_lb = min(lb_floor, global_ub) if np.isfinite(lb_floor) else global_ub
            break
        global_lb = min(entry[1].lb for entry in queue)
        if np.isfinite(lb_floor):
            global_lb = min(global_lb, lb_floor)
        if not decide:
            global_lb = min(global_lb, global_ub)
            if global_ub - global_lb <= config.epsilon:
                status = SAT if global_ub < 0 else UNSAT
                break
        if out_of_budget():
            status = TIMEOUT
            break

        sub = pick_out(queue)
        if sub.depth >= config.depth_limit:
            status = TIMEOUT
            break
        sub_bounds = sub.bounds_cache

        try:
            if config.strategy == "bab":
                children = split_input_longest(sub)
            elif config.strategy == "babsb":
                children = split_input_smart(sub, problem)
            elif config.strategy == "relubab":
                children = split_relu_first(sub, sub_bounds)
            else:
                children = split_relu_babsr(sub, problem, sub_bounds, rng, sparse)
        except (Unsplittable, FullyFixed):
            # Tiny box or no splittable unit left; its bound is final.
            finalize(sub.lb)
            continue

        for child in children:
            node_t0 = time.monotonic()
            split_unit = None
            if config.strategy in ("relubab", "babsr", "babsrl"):
                split_unit = _split_unit(sub, child)
            desc = _branch_desc(config.strategy, sub, child, split_unit)
            child.node_id = stats.nodes
            stats.nodes += 1
            cb = _child_bounds(
                problem, child, config.imb_policy, root_bounds, split_unit
            )
            res = INFEASIBLE if isinstance(cb, Infeasible) else lower(child, cb)
            if isinstance(res, Infeasible):
                stats.node_times.append(time.monotonic() - node_t0)
                tracer.emit(
                    child.node_id, sub.node_id, np.inf, np.inf, desc,
                    time.monotonic() - t_start,
                )
                continue
            child.lb = max(res.value, sub.lb)
            child.bounds_cache = cb
            ub, pt = compute_upper_bound(problem, child, res.witness, config.samples, rng)
            stats.node_times.append(time.monotonic() - node_t0)
            tracer.emit(
                child.node_id, sub.node_id, child.lb, ub, desc,
                time.monotonic() - t_start,
            )
            if ub < global_ub:
                global_ub, global_ub_point = ub, pt
                if not decide:
                    pruned = [(o, s) for o, s in queue if not s.lb < global_ub]
                    for _, s in pruned:
                        finalize(s.lb)
                    queue = [(o, s) for o, s in queue if s.lb < global_ub]
            if decide and found_counterexample(ub, pt):
                status = SAT
                break
            if not _ambiguous(child, cb):
                # The relaxation was exact; nothing left to branch on.
                finalize(child.lb)
                continue
            if child.lb < keep_threshold():
                queue.append((order, child))
                order += 1
            else:
                finalize(child.lb)

    stats.wall_time = time.monotonic() - t_start
    stats.lp_calls = lpmod.solve_count() - lp_calls_start

    if status == SAT and counterexample is None and global_ub_point is not None:
        if validate_counterexample(problem, global_ub_point, COUNTEREXAMPLE_TOL):
            counterexample = global_ub_point
    if status == UNSAT and abs(global_ub) <= ZERO_MARGIN_TOL and not decide:
        zero_margin = True
    if status == TIMEOUT:
        if queue:
            global_lb = min(entry[1].lb for entry in queue)
            if np.isfinite(lb_floor):
                global_lb = min(global_lb, lb_floor)
        elif np.isfinite(lb_floor):
            global_lb = lb_floor
    return BabResult(
        status=status,
        lower_bound=float(global_lb),
        upper_bound=float(global_ub),
        counterexample=counterexample,
        stats=stats,
        zero_margin=zero_margin,
    )


def _branch_desc(strategy, parent, child, split_unit):
    if strategy in ("bab", "babsb"):
        diff = np.where(
            (child.box.lower != parent.box.lower) | (child.box.upper != parent.box.upper)
        )[0]
        d = int(diff[0]) if diff.size else -1
        return f"input d{d} [{child.box.lower[d]:.6g},{child.box.upper[d]:.6g}]"
    s, j = split_unit
    phase = child.fixings[(s, j)].value
    return f"relu s{s} u{j} {phase}"


class _Tracer:
    def __init__(self, stream):
        self.writer = None
        if stream is not None:
            self.writer = csv.writer(stream)
            self.writer.writerow(["id", "parent", "lb", "ub", "branch", "wall_time"])

    def emit(self, node_id, parent, lb, ub, branch, wall):
        if self.writer is not None:
            self.writer.writerow(
                [node_id, parent, f"{lb:.9g}", f"{ub:.9g}", branch, f"{wall:.6f}"]
            )

    def close(self):
        pass
