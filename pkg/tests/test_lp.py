import numpy as np
import pytest
from scipy.optimize import linprog

from plnnverify import lp
from plnnverify.lp import EQUAL, GREATER, LESS, LinearProgram, LpBuilder, LpStatus


def simple_lp(c, rows, lb, ub):
    if rows:
        coeffs = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), -1)
    else:
        coeffs = np.zeros((0, len(c)))
    return LinearProgram(
        objective=np.asarray(c, dtype=float),
        coeffs=coeffs,
        relations=tuple(r[1] for r in rows),
        rhs=np.asarray([r[2] for r in rows], dtype=float),
        lower=np.asarray(lb, dtype=float),
        upper=np.asarray(ub, dtype=float),
    )


def test_bound_active_optimum():
    # min x  s.t.  3 <= x <= 10
    prob = simple_lp([1.0], [], [3.0], [10.0])
    sol = lp.solve(prob)
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-9)
    assert sol.x[0] == pytest.approx(3.0, abs=1e-7)


def test_textbook_simplex():
    # min -x-y  s.t.  x+y <= 1, x,y >= 0
    prob = simple_lp([-1.0, -1.0], [([1.0, 1.0], LESS, 1.0)], [0.0, 0.0], [np.inf, np.inf])
    sol = lp.solve(prob)
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)


def test_equality_and_free_variable():
    # min x + y  s.t.  x - y = 2, y free, x >= 0 -> optimum at x=0, y=-2
    prob = simple_lp(
        [1.0, 1.0], [([1.0, -1.0], EQUAL, 2.0)], [0.0, -np.inf], [np.inf, np.inf]
    )
    sol = lp.solve(prob)
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-2.0, abs=1e-8)


def test_infeasible():
    prob = simple_lp(
        [0.0], [([1.0], GREATER, 5.0), ([1.0], LESS, 1.0)], [-np.inf], [np.inf]
    )
    assert lp.solve(prob).status == LpStatus.INFEASIBLE


def test_crossed_variable_bounds_infeasible():
    prob = simple_lp([1.0], [], [2.0], [1.0])
    assert lp.solve(prob).status == LpStatus.INFEASIBLE


def test_unbounded():
    prob = simple_lp([-1.0], [], [0.0], [np.inf])
    assert lp.solve(prob).status == LpStatus.UNBOUNDED


def test_upper_bounded_only_variable():
    # Mirror substitution path: x <= 4 with min -x.
    prob = simple_lp([-1.0], [], [-np.inf], [4.0])
    sol = lp.solve(prob)
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-4.0, abs=1e-9)
    assert sol.x[0] == pytest.approx(4.0, abs=1e-7)


def test_degenerate_lp_terminates():
    # Classic degenerate corner: several constraints meet at the optimum.
    prob = simple_lp(
        [-0.75, 150.0, -0.02, 6.0],
        [
            ([0.25, -60.0, -0.04, 9.0], LESS, 0.0),
            ([0.5, -90.0, -0.02, 3.0], LESS, 0.0),
            ([0.0, 0.0, 1.0, 0.0], LESS, 1.0),
        ],
        [0.0] * 4,
        [np.inf] * 4,
    )
    sol = lp.solve(prob)
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-0.05, abs=1e-7)


def random_lp(rng, n_vars=None):
    n = n_vars or rng.integers(2, 8)
    m = int(rng.integers(1, 10))
    coeffs = rng.normal(size=(m, n)).round(3)
    rels, rhs = [], []
    # Anchor the rows around a feasible point so most instances are feasible.
    x_feas = rng.uniform(-1.0, 1.0, size=n)
    for r in range(m):
        val = coeffs[r] @ x_feas
        kind = rng.integers(0, 3)
        if kind == 0:
            rels.append(LESS)
            rhs.append(val + abs(rng.normal()))
        elif kind == 1:
            rels.append(GREATER)
            rhs.append(val - abs(rng.normal()))
        else:
            rels.append(EQUAL)
            rhs.append(val)
    lb = np.where(rng.random(n) < 0.7, x_feas - rng.uniform(0.1, 3.0, size=n), -np.inf)
    ub = np.where(rng.random(n) < 0.7, x_feas + rng.uniform(0.1, 3.0, size=n), np.inf)
    c = rng.normal(size=n).round(3)
    prob = LinearProgram(
        objective=c,
        coeffs=coeffs,
        relations=tuple(rels),
        rhs=np.asarray(rhs),
        lower=lb,
        upper=ub,
    )
    return prob, x_feas


def scipy_reference(prob):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row, rel, r in zip(prob.coeffs, prob.relations, prob.rhs):
        if rel == LESS:
            A_ub.append(row)
            b_ub.append(r)
        elif rel == GREATER:
            A_ub.append(-row)
            b_ub.append(-r)
        else:
            A_eq.append(row)
            b_eq.append(r)
    res = linprog(
        prob.objective,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=list(zip(prob.lower, prob.upper)),
        method="highs",
    )
    return res


def test_random_lps_match_scipy():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(200):
        prob, _ = random_lp(rng)
        ours = lp.solve(prob)
        ref = scipy_reference(prob)
        if ref.status == 0:
            assert ours.status == LpStatus.OPTIMAL
            scale = max(1.0, abs(ref.fun))
            assert abs(ours.objective - ref.fun) <= 1e-7 * scale
            checked += 1
        elif ref.status == 2:
            assert ours.status == LpStatus.INFEASIBLE
        elif ref.status == 3:
            assert ours.status == LpStatus.UNBOUNDED
    assert checked > 50  # the generator must actually exercise the solver


def test_optimality_certificate_against_random_feasible_points():
    # Returned primal is feasible and beats random feasible points.
    rng = np.random.default_rng(11)
    for _ in range(30):
        prob, x_feas = random_lp(rng)
        sol = lp.solve(prob)
        if sol.status != LpStatus.OPTIMAL:
            continue
        x = sol.x
        assert np.all(x >= prob.lower - 1e-7)
        assert np.all(x <= prob.upper + 1e-7)
        for row, rel, r in zip(prob.coeffs, prob.relations, prob.rhs):
            v = row @ x
            if rel == LESS:
                assert v <= r + 1e-7
            elif rel == GREATER:
                assert v >= r - 1e-7
            else:
                assert abs(v - r) <= 1e-7
        # Sample random feasible points by shrinking toward the anchor.
        for _ in range(100):
            cand = x_feas + rng.uniform(-0.05, 0.05, size=prob.n_vars)
            cand = np.clip(cand, prob.lower, prob.upper)
            ok = True
            for row, rel, r in zip(prob.coeffs, prob.relations, prob.rhs):
                v = row @ cand
                if rel == LESS and v > r:
                    ok = False
                elif rel == GREATER and v < r:
                    ok = False
                elif rel == EQUAL and abs(v - r) > 1e-9:
                    ok = False
            if ok:
                assert sol.objective <= prob.objective @ cand + 1e-7


def test_determinism():
    rng = np.random.default_rng(3)
    prob, _ = random_lp(rng)
    a = lp.solve(prob)
    b = lp.solve(prob)
    assert a.status == b.status
    if a.status == LpStatus.OPTIMAL:
        assert a.objective == b.objective
        assert np.array_equal(a.x, b.x)


def test_resolve_with_tightened_bound():
    prob = simple_lp([1.0], [], [3.0], [10.0])
    base = lp.solve(prob)
    assert base.objective == pytest.approx(3.0)
    sol = lp.resolve_with(prob, changed_variable_bounds={0: (5.0, 10.0)})
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(5.0, abs=1e-9)


def test_resolve_with_redundant_row():
    prob = simple_lp([-1.0, -1.0], [([1.0, 1.0], LESS, 1.0)], [0.0, 0.0], [np.inf, np.inf])
    base = lp.solve(prob)
    sol = lp.resolve_with(prob, extra_rows=[(np.array([1.0, 1.0]), LESS, 5.0)])
    assert sol.objective == pytest.approx(base.objective, abs=1e-9)


def test_resolve_with_matches_fresh_build():
    rng = np.random.default_rng(23)
    for _ in range(200):
        prob, x_feas = random_lp(rng)
        n = prob.n_vars
        j = int(rng.integers(0, n))
        new_lo = x_feas[j] - rng.uniform(0.0, 1.0)
        new_hi = x_feas[j] + rng.uniform(0.0, 1.0)
        row = rng.normal(size=n).round(3)
        rel = (LESS, GREATER)[int(rng.integers(0, 2))]
        rhs = row @ x_feas + (1.0 if rel == LESS else -1.0) * abs(rng.normal())
        via_resolve = lp.resolve_with(
            prob,
            changed_variable_bounds={j: (new_lo, new_hi)},
            extra_rows=[(row, rel, rhs)],
        )
        fresh = LinearProgram(
            objective=prob.objective,
            coeffs=np.vstack([prob.coeffs, row]),
            relations=prob.relations + (rel,),
            rhs=np.concatenate([prob.rhs, [rhs]]),
            lower=np.where(np.arange(n) == j, new_lo, prob.lower),
            upper=np.where(np.arange(n) == j, new_hi, prob.upper),
        )
        via_fresh = lp.solve(fresh)
        assert via_resolve.status == via_fresh.status
        if via_fresh.status == LpStatus.OPTIMAL:
            scale = max(1.0, abs(via_fresh.objective))
            assert abs(via_resolve.objective - via_fresh.objective) <= 1e-8 * scale


def test_builder_roundtrip():
    b = LpBuilder(3)
    b.set_objective({0: 1.0, 2: -1.0})
    b.set_bounds(0, 0.0, 5.0)
    b.set_bounds(1, -1.0, 1.0)
    b.set_bounds(2, 0.0, 2.0)
    b.add_row({0: 1.0, 1: 1.0}, GREATER, 0.5)
    prob = b.build()
    sol = lp.solve(prob)
    assert sol.status == LpStatus.OPTIMAL
    # x0 >= 0.5 - x1 >= -0.5 so x0 can sit at 0 with x1 = 1; x2 maxed at 2.
    assert sol.objective == pytest.approx(-2.0, abs=1e-8)
