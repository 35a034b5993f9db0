"""Ground-truth global minimization for small networks.

Every activation pattern of a relu network carves out a polytope on which
the network is affine, so the exact global minimum is the best optimum over
the 2^R pattern LPs (R = units whose phase the bounds leave undetermined).
Only meant for desk-scale oracles; the cap guards against accidents.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from plnnverify import lp as lpmod
from plnnverify.bounds import LayerBounds, _classify
from plnnverify.lp import GREATER, LESS, LpStatus
from plnnverify.network import CanonicalProblem, eval_network

DEFAULT_CAP = 20


def enumerate_min(
    problem: CanonicalProblem,
    bounds: LayerBounds,
    cap: int = DEFAULT_CAP,
) -> tuple[float, np.ndarray]:
    """Exact minimum of the canonical output over the domain, with a witness.

    For a fixed phase assignment the whole network collapses to an affine map
    of the input, so each pattern's LP is solved directly in input space:
    minimize the composed output row subject to the box and one sign row per
    assigned unit.  Units whose sign the bounds already determine are folded
    in without a row.  Patterns with an empty polytope are skipped; the true
    pattern of any in-box point is always feasible, so at least one LP must
    succeed.
    """
    net = problem.net
    if net.has_maxpool():
        raise ValueError("enumeration needs a relu-only network; lower maxpool first")
    stages = net.stages()
    d = net.input_dim

    free: list[tuple[int, int]] = []
    determined: dict[tuple[int, int], bool] = {}  # True = passing
    for s, (lin, act) in enumerate(stages):
        if act is None:
            continue
        blocked, passing, amb = _classify(bounds.lower[s], bounds.upper[s])
        free.extend((s, int(j)) for j in np.where(amb)[0])
        for j in np.where(blocked)[0]:
            determined[(s, int(j))] = False
        for j in np.where(passing)[0]:
            determined[(s, int(j))] = True
    if len(free) > cap:
        raise ValueError(f"{len(free)} undetermined units exceed the cap of {cap}")

    box = problem.domain
    lower = box.lower.copy()
    upper = box.upper.copy()
    best_val = np.inf
    best_x = None
    for pattern in product((False, True), repeat=len(free)):
        phase = dict(determined)
        phase.update(zip(free, pattern))
        # Compose the affine form layer by layer under this assignment,
        # collecting one sign row per freely assigned unit.
        A = None
        c = None
        rows, rels, rhs = [], [], []
        feasible = True
        for s, (lin, act) in enumerate(stages):
            if A is None:
                A, c = lin.weights.copy(), lin.bias.copy()
            else:
                A, c = lin.weights @ A, lin.weights @ c + lin.bias
            if act is None:
                break
            keep = np.zeros(lin.out_width)
            for j in range(lin.out_width):
                passing = phase[(s, j)]
                keep[j] = 1.0 if passing else 0.0
                if (s, j) in determined:
                    continue
                # passing: A_j x + c_j >= 0; blocked: <= 0
                rows.append(A[j])
                rels.append(GREATER if passing else LESS)
                rhs.append(-c[j])
            A = keep[:, None] * A
            c = keep * c
        prob = lpmod.LinearProgram(
            objective=A[0],
            coeffs=np.vstack(rows) if rows else np.zeros((0, d)),
            relations=tuple(rels),
            rhs=np.asarray(rhs, dtype=float),
            lower=lower,
            upper=upper,
        )
        sol = lpmod.solve(prob)
        if sol.status == LpStatus.INFEASIBLE:
            continue
        if sol.status != LpStatus.OPTIMAL:
            raise RuntimeError(f"pattern LP failed: {sol.status.value}")
        val = sol.objective + c[0]
        if val < best_val:
            best_val = val
            best_x = sol.x.copy()
    if best_x is None:
        raise RuntimeError("every pattern was infeasible, which cannot happen")
    return float(best_val), best_x


def sample_min(
    problem: CanonicalProblem, n: int, seed: int = 0
) -> tuple[float, np.ndarray]:
    """Upper-bound oracle: best network value over n uniform in-box samples."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    box = problem.domain
    best_val = np.inf
    best_x = None
    for _ in range(n):
        x = rng.uniform(box.lower, box.upper)
        v = eval_network(problem.net, x)[0]
        if v < best_val:
            best_val = v
            best_x = x
    return float(best_val), best_x
