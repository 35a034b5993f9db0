"""Dense two-phase primal simplex solver.

All relaxation-based bounding in this package runs through this module, so
correctness is favoured over speed everywhere: conservative tolerances,
deterministic pivoting and an explicit failure status instead of a silently
wrong objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-8
PIVOT_TOL = 1e-10
MAX_ITERS = 10 ** 6

# Process-wide solve counter used by the search driver for its statistics.
# The driver is single-threaded by contract, so a plain int is fine.
_solve_count = 0


def solve_count() -> int:
    return _solve_count


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


LESS = "<="
EQUAL = "="
GREATER = ">="


@dataclass(frozen=True)
class LinearProgram:
    """min c.x  s.t.  A x (<=,=,>=) b,  lower <= x <= upper (entries may be inf)."""

    objective: np.ndarray
    coeffs: np.ndarray        # (n_rows, n_vars), dense
    relations: tuple          # per row, one of LESS / EQUAL / GREATER
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = self.objective.shape[0]
        if self.coeffs.ndim != 2 or self.coeffs.shape[1] != n:
            raise ValueError("constraint matrix width does not match variable count")
        m = self.coeffs.shape[0]
        if len(self.relations) != m or self.rhs.shape[0] != m:
            raise ValueError("row metadata does not match row count")
        if self.lower.shape[0] != n or self.upper.shape[0] != n:
            raise ValueError("bound vectors do not match variable count")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite constraint coefficient")
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("non-finite right-hand side")
        for rel in self.relations:
            if rel not in (LESS, EQUAL, GREATER):
                raise ValueError(f"unknown relation {rel!r}")

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def n_rows(self) -> int:
        return self.coeffs.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    objective: float | None = None
    x: np.ndarray | None = None


class LpBuilder:
    """Incremental construction helper; rows are gathered and stacked once."""

    def __init__(self, n_vars: int):
        self.n_vars = n_vars
        self.objective = np.zeros(n_vars)
        self.lower = np.full(n_vars, -np.inf)
        self.upper = np.full(n_vars, np.inf)
        self._rows: list[np.ndarray] = []
        self._rels: list[str] = []
        self._rhs: list[float] = []

    def set_objective(self, coeffs: dict[int, float] | np.ndarray) -> None:
        if isinstance(coeffs, dict):
            self.objective = np.zeros(self.n_vars)
            for j, v in coeffs.items():
                self.objective[j] = v
        else:
            self.objective = np.asarray(coeffs, dtype=float).copy()

    def set_bounds(self, var: int, lo: float, hi: float) -> None:
        self.lower[var] = lo
        self.upper[var] = hi

    def add_row(self, coeffs: dict[int, float], rel: str, rhs: float) -> None:
        row = np.zeros(self.n_vars)
        for j, v in coeffs.items():
            row[j] += v
        self._rows.append(row)
        self._rels.append(rel)
        self._rhs.append(float(rhs))

    def add_dense_row(self, row: np.ndarray, rel: str, rhs: float) -> None:
        self._rows.append(np.asarray(row, dtype=float))
        self._rels.append(rel)
        self._rhs.append(float(rhs))

    def build(self) -> LinearProgram:
        if self._rows:
            coeffs = np.vstack(self._rows)
        else:
            coeffs = np.zeros((0, self.n_vars))
        return LinearProgram(
            objective=self.objective.copy(),
            coeffs=coeffs,
            relations=tuple(self._rels),
            rhs=np.asarray(self._rhs, dtype=float),
            lower=self.lower.copy(),
            upper=self.upper.copy(),
        )


@dataclass
class _StandardForm:
    """min c.y + c0  s.t.  A y = b (b >= 0), y >= 0, plus the mapping back to x."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    c0: float
    # x[i] = shift[i] + sign[i] * y[pos[i]] (- y[neg[i]] for free variables)
    shift: np.ndarray
    sign: np.ndarray
    pos: np.ndarray
    neg: np.ndarray


def _to_standard_form(lp: LinearProgram) -> _StandardForm:
    n = lp.n_vars
    shift = np.zeros(n)
    sign = np.ones(n)
    pos = np.zeros(n, dtype=int)
    neg = np.full(n, -1, dtype=int)

    # Variable substitutions: shift when a finite lower bound exists, mirror
    # when only the upper bound is finite, split free variables in two.
    n_std = 0
    ub_rows = []  # (std_var, residual upper bound)
    for i in range(n):
        lo, hi = lp.lower[i], lp.upper[i]
        if np.isfinite(lo):
            shift[i] = lo
            pos[i] = n_std
            n_std += 1
            if np.isfinite(hi):
                ub_rows.append((pos[i], hi - lo))
        elif np.isfinite(hi):
            # x = hi - y, y >= 0
            shift[i] = hi
            sign[i] = -1.0
            pos[i] = n_std
            n_std += 1
        else:
            pos[i] = n_std
            neg[i] = n_std + 1
            n_std += 2

    m_orig = lp.n_rows
    m = m_orig + len(ub_rows)
    A = np.zeros((m, n_std))
    b = np.zeros(m)
    rels = list(lp.relations) + [LESS] * len(ub_rows)

    # pos is injective over the original variables, so fancy assignment works.
    has_neg = neg >= 0
    if m_orig:
        A[:m_orig, pos] = lp.coeffs * sign[None, :]
        if has_neg.any():
            A[:m_orig, neg[has_neg]] = -lp.coeffs[:, has_neg]
        b[:m_orig] = lp.rhs - lp.coeffs @ shift
    for k, (j, res) in enumerate(ub_rows):
        A[m_orig + k, j] = 1.0
        b[m_orig + k] = res

    c = np.zeros(n_std)
    c[pos] = lp.objective * sign
    if has_neg.any():
        c[neg[has_neg]] = -lp.objective[has_neg]
    c0 = float(lp.objective @ shift)

    # Slacks / surplus columns; flip rows to make b >= 0 first.
    slack_cols = []
    for r in range(m):
        if b[r] < 0:
            A[r] = -A[r]
            b[r] = -b[r]
            rels[r] = {LESS: GREATER, GREATER: LESS, EQUAL: EQUAL}[rels[r]]
        if rels[r] == LESS:
            slack_cols.append((r, 1.0))
        elif rels[r] == GREATER:
            slack_cols.append((r, -1.0))

    if slack_cols:
        S = np.zeros((m, len(slack_cols)))
        for k, (r, v) in enumerate(slack_cols):
            S[r, k] = v
        A = np.hstack([A, S])
        c = np.concatenate([c, np.zeros(len(slack_cols))])

    return _StandardForm(A=A, b=b, c=c, c0=c0, shift=shift, sign=sign, pos=pos, neg=neg)


class _Tableau:
    """Simplex tableau over A y = b, y >= 0 with maintained objective row."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.m, self.n = A.shape
        self.T = np.hstack([A.astype(float), b.reshape(-1, 1).astype(float)])
        self.basis = np.full(self.m, -1, dtype=int)
        self.obj = None  # set per phase: length n + 1, last entry = -objective value

    def set_objective(self, c: np.ndarray):
        row = np.concatenate([c.astype(float), [0.0]])
        # Price out the current basis so reduced costs are consistent.
        for r, j in enumerate(self.basis):
            if row[j] != 0.0:
                row -= row[j] * self.T[r]
        self.obj = row

    def pivot(self, r: int, q: int):
        T = self.T
        row = T[r]
        row /= row[q]
        col = T[:, q].copy()
        col[r] = 0.0
        T -= col[:, None] * row
        self.obj -= self.obj[q] * row
        self.basis[r] = q

    def objective_value(self) -> float:
        return -self.obj[-1]

    def _entering(self, bland: bool, allowed: np.ndarray) -> int:
        red = self.obj[:-1]
        if bland:
            cand = np.flatnonzero(allowed & (red < -OPT_TOL))
            return int(cand[0]) if cand.size else -1
        # Dantzig rule; argmin takes the lowest index on ties.
        masked = np.where(allowed, red, 0.0)
        q = int(np.argmin(masked))
        return q if masked[q] < -OPT_TOL else -1

    def _leaving(self, q: int) -> int:
        col = self.T[:, q]
        rhs = self.T[:, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(col > PIVOT_TOL, rhs / col, np.inf)
        best = ratios.min(initial=np.inf)
        if not np.isfinite(best):
            return -1
        near = np.flatnonzero(ratios <= best + PIVOT_TOL)
        # Near-ties broken by smallest basis variable index: deterministic and
        # compatible with the Bland fallback.
        return int(near[np.argmin(self.basis[near])])

    def run(self, allowed: np.ndarray) -> str:
        """Iterate to optimality; returns 'optimal', 'unbounded' or 'iter_limit'."""
        stall = 0
        last_obj = self.objective_value()
        bland = False
        for _ in range(MAX_ITERS):
            q = self._entering(bland, allowed)
            if q < 0:
                return "optimal"
            r = self._leaving(q)
            if r < 0:
                return "unbounded"
            self.pivot(r, q)
            cur = self.objective_value()
            if cur < last_obj - OPT_TOL:
                last_obj = cur
                stall = 0
                bland = False
            else:
                stall += 1
                if stall > self.n:
                    bland = True  # anti-cycling fallback
        return "iter_limit"


def solve(lp: LinearProgram) -> LpSolution:
    """Two-phase primal simplex.

    Infeasibility is reported only when the phase-1 optimum stays above the
    feasibility tolerance, so an INFEASIBLE status is certified rather than
    a numerical accident.
    """
    global _solve_count
    _solve_count += 1

    # Crossed variable bounds make the LP trivially infeasible.
    if np.any(lp.lower > lp.upper + FEAS_TOL):
        return LpSolution(LpStatus.INFEASIBLE)

    sf = _to_standard_form(lp)
    m, n_std = sf.A.shape

    # Phase 1: artificial variables complete the identity basis.
    art = np.arange(n_std, n_std + m)
    A1 = np.hstack([sf.A, np.eye(m)])
    tab = _Tableau(A1, sf.b)
    tab.basis = art.copy()
    c1 = np.concatenate([np.zeros(n_std), np.ones(m)])
    tab.set_objective(c1)

    # Columns that already form part of the basis (slacks with +1 coefficient)
    # could seed phase 1, but starting from the full artificial basis keeps the
    # logic uniform and the problems here are small.
    allowed = np.ones(n_std + m, dtype=bool)
    status = tab.run(allowed)
    if status == "iter_limit":
        return LpSolution(LpStatus.NUMERICAL_FAILURE)
    if tab.objective_value() > FEAS_TOL:
        return LpSolution(LpStatus.INFEASIBLE)

    # Drive remaining artificials out of the basis; rows where that is
    # impossible are redundant and can be neutralised.
    for r in range(m):
        if tab.basis[r] >= n_std:
            piv_col = -1
            for j in range(n_std):
                if abs(tab.T[r, j]) > PIVOT_TOL:
                    piv_col = j
                    break
            if piv_col >= 0:
                tab.pivot(r, piv_col)
            else:
                tab.T[r, :] = 0.0
                tab.T[r, tab.basis[r]] = 1.0

    # Phase 2: original objective, artificial columns frozen.
    c2 = np.concatenate([sf.c, np.zeros(m)])
    tab.set_objective(c2)
    allowed = np.concatenate([np.ones(n_std, dtype=bool), np.zeros(m, dtype=bool)])
    status = tab.run(allowed)
    if status == "iter_limit":
        return LpSolution(LpStatus.NUMERICAL_FAILURE)
    if status == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED)

    y = np.zeros(n_std + m)
    y[tab.basis] = tab.T[:, -1]
    x = sf.shift + sf.sign * y[sf.pos]
    has_neg = sf.neg >= 0
    if np.any(has_neg):
        x[has_neg] -= y[sf.neg[has_neg]]
    return LpSolution(LpStatus.OPTIMAL, objective=float(sf.c @ y[:n_std] + sf.c0), x=x)


def resolve_with(
    lp: LinearProgram,
    changed_variable_bounds: dict[int, tuple[float, float]] | None = None,
    extra_rows: list[tuple[np.ndarray, str, float]] | None = None,
    objective: np.ndarray | None = None,
) -> LpSolution:
    """Re-solve a previously built LP with modifications.

    Semantically identical to building the modified LP from scratch; kept as
    a separate entry point so callers that reuse one base model per search
    have a single place to hang a warm start on later.
    """
    lower = lp.lower.copy()
    upper = lp.upper.copy()
    if changed_variable_bounds:
        for j, (lo, hi) in changed_variable_bounds.items():
            lower[j] = lo
            upper[j] = hi
    coeffs = lp.coeffs
    rels = lp.relations
    rhs = lp.rhs
    if extra_rows:
        add = np.vstack([np.asarray(row, dtype=float) for row, _, _ in extra_rows])
        coeffs = np.vstack([coeffs, add]) if coeffs.size else add
        rels = rels + tuple(rel for _, rel, _ in extra_rows)
        rhs = np.concatenate([rhs, np.asarray([r for _, _, r in extra_rows], dtype=float)])
    modified = LinearProgram(
        objective=lp.objective if objective is None else np.asarray(objective, dtype=float),
        coeffs=coeffs,
        relations=rels,
        rhs=rhs,
        lower=lower,
        upper=upper,
    )
    return solve(modified)
