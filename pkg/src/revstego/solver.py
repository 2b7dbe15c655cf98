"""Small dense MILP solver: bounded two-phase simplex plus branch-and-bound.

The problems built by :mod:`revstego.milp` have a few hundred columns at
most, so everything here is dense numpy and favours robustness over speed.

Problem form::

    minimize    c @ v
    subject to  A_ub @ v <= b_ub
                A_eq @ v == b_eq
                lo <= v <= hi          (lo finite)
                v[j] integral where integrality[j]
"""
from __future__ import annotations

import enum
import heapq
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
INT_TOL = 1e-6
NODE_LIMIT = 10**6
BLAND_AFTER = 5000
MAX_PIVOTS = 50000

_PIV_TOL = 1e-9
_OPT_TOL = 1e-9
_REFRESH_EVERY = 50


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class MilpProblem:
    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    integrality: np.ndarray | None = None
    names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        nv = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, nv, "ub")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, nv, "eq")
        self.lo = np.zeros(nv) if self.lo is None else np.asarray(self.lo, dtype=float).ravel()
        self.hi = np.full(nv, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).ravel()
        if self.integrality is None:
            self.integrality = np.zeros(nv, dtype=bool)
        self.integrality = np.asarray(self.integrality, dtype=bool).ravel()
        if not (self.lo.size == self.hi.size == self.integrality.size == nv):
            raise ValueError("bounds and integrality must match the objective length")
        if not np.all(np.isfinite(self.lo)):
            raise ValueError("lower bounds must be finite")
        if np.any(self.lo > self.hi):
            raise ValueError("lower bound above upper bound")

    @property
    def num_vars(self) -> int:
        return self.c.size

    def max_violation(self, v: np.ndarray) -> float:
        """Largest constraint or bound violation, rows scaled by their max coefficient."""
        worst = max(0.0, float(np.max(self.lo - v, initial=0.0)), float(np.max(v - self.hi, initial=0.0)))
        for A, b, eq in ((self.A_ub, self.b_ub, False), (self.A_eq, self.b_eq, True)):
            if not len(b):
                continue
            scale = np.maximum(np.abs(A).max(axis=1), 1.0)
            r = (A @ v - b) / scale
            worst = max(worst, float(np.max(np.abs(r) if eq else r, initial=0.0)))
        return worst


def _rows(A, b, nv, what):
    if A is None or (hasattr(A, "__len__") and len(A) == 0):
        return np.zeros((0, nv)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape != (b.size, nv):
        raise ValueError(f"{what} rows: matrix {A.shape} does not match rhs {b.size} / vars {nv}")
    return A, b


@dataclass
class NodeRecord:
    """One explored branch-and-bound node (kept when ``record_nodes``)."""

    lo: np.ndarray
    hi: np.ndarray
    bound: float
    status: Status


@dataclass
class MilpSolution:
    status: Status
    values: np.ndarray | None = None
    objective: float = float("nan")
    nodes: int = 0
    pivots: int = 0
    message: str = ""
    node_log: list[NodeRecord] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Tableau:
    """Bounded-variable simplex on ``T u = b0`` with ``0 <= u <= upper``."""

    def __init__(self, A0: np.ndarray, b0: np.ndarray, upper: np.ndarray, id_cols: np.ndarray):
        self.T = A0.copy()
        self.b0 = b0
        self.upper = upper
        self.m, self.ncol = A0.shape
        self.basis = id_cols.copy()
        self.id_cols = id_cols
        self.at_upper = np.zeros(self.ncol, dtype=bool)
        self.is_basic = np.zeros(self.ncol, dtype=bool)
        self.is_basic[self.basis] = True
        self.beta = b0.copy()
        self.pivots = 0

    def refresh(self):
        binv = self.T[:, self.id_cols]
        x = binv @ self.b0
        up = np.flatnonzero(self.at_upper & ~self.is_basic)
        if up.size:
            x -= self.T[:, up] @ self.upper[up]
        self.beta = x

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        return cost - cost[self.basis] @ self.T

    def values(self) -> np.ndarray:
        u = np.where(self.at_upper, self.upper, 0.0)
        u[self.basis] = self.beta
        return u

    def run(self, cost: np.ndarray, eligible: np.ndarray, pivot_budget: int) -> Status:
        d = self.reduced_costs(cost)
        d[self.basis] = 0.0
        movable = eligible & ~self.is_basic
        if not movable.any():
            return Status.OPTIMAL
        start = self.pivots
        while True:
            done = self.pivots - start
            if done >= pivot_budget:
                return Status.ITERATION_LIMIT
            bland = done >= BLAND_AFTER
            # positive score = improving direction for a non-basic variable
            score = np.where(self.at_upper, d, -d)
            score[~movable] = 0.0
            if bland:
                cand = np.flatnonzero(score > _OPT_TOL)
                if not cand.size:
                    return Status.OPTIMAL
                q = int(cand[0])
            else:
                q = int(np.argmax(score))
                if score[q] <= _OPT_TOL:
                    return Status.OPTIMAL
            direction = -1.0 if self.at_upper[q] else 1.0
            alpha = direction * self.T[:, q]
            ub = self.upper[self.basis]
            beta = np.minimum(np.maximum(self.beta, 0.0), ub)
            dn = alpha > _PIV_TOL
            upm = alpha < -_PIV_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                limits = np.minimum(
                    np.where(dn, beta / alpha, np.inf),
                    np.where(upm, (ub - beta) / -alpha, np.inf),
                )
            theta = float(limits.min()) if self.m else np.inf
            flip = self.upper[q]
            if not np.isfinite(theta) and not np.isfinite(flip):
                return Status.UNBOUNDED
            if flip <= theta:
                self.beta = self.beta - flip * alpha
                self.at_upper[q] = not self.at_upper[q]
                self.pivots += 1
                continue
            ties = np.flatnonzero(limits <= theta + 1e-12)
            if bland:
                p = int(ties[np.argmin(self.basis[ties])])
            else:
                p = int(ties[np.argmax(np.abs(alpha[ties]))])
            leave = self.basis[p]
            leave_upper = bool(upm[p] and not dn[p])
            entering_value = theta if direction > 0 else self.upper[q] - theta
            self.beta = self.beta - theta * alpha
            self._pivot(p, q)
            d -= d[q] * self.T[p]
            d[q] = 0.0
            self.beta[p] = entering_value
            self.is_basic[leave] = False
            self.at_upper[leave] = leave_upper
            self.is_basic[q] = True
            self.at_upper[q] = False
            self.basis[p] = q
            movable[q] = False
            movable[leave] = eligible[leave]
            if (self.pivots - start) % _REFRESH_EVERY == 0:
                self.refresh()
                d = self.reduced_costs(cost)
                d[self.basis] = 0.0

    def _pivot(self, p: int, q: int):
        T = self.T
        T[p] /= T[p, q]
        col = T[:, q].copy()
        col[p] = 0.0
        T -= np.outer(col, T[p])
        self.pivots += 1


def _lp(problem: MilpProblem, lo: np.ndarray, hi: np.ndarray) -> MilpSolution:
    """Relaxation of ``problem`` with the given bounds, integrality ignored."""
    nv = problem.num_vars
    if np.any(lo > hi + FEAS_TOL):
        return MilpSolution(Status.INFEASIBLE, message="crossed bounds")
    hi = np.maximum(hi, lo)
    fixed = (hi - lo) <= 1e-12
    free = np.flatnonzero(~fixed)
    base = lo.copy()
    c = problem.c

    A_ub, A_eq = problem.A_ub, problem.A_eq
    b_ub = problem.b_ub - A_ub @ base
    b_eq = problem.b_eq - A_eq @ base
    A_ub, A_eq = A_ub[:, free], A_eq[:, free]
    upper_s = (hi - lo)[free]
    nf = free.size

    rows, rhs, kinds = [], [], []
    for A, b, eq in ((A_ub, b_ub, False), (A_eq, b_eq, True)):
        for i in range(len(b)):
            scale = np.abs(A[i]).max() if nf else 0.0
            if scale <= 1e-12:
                bad = abs(b[i]) > FEAS_TOL if eq else b[i] < -FEAS_TOL
                if bad:
                    return MilpSolution(Status.INFEASIBLE, message="empty row violated")
                continue
            rows.append(A[i] / scale)
            rhs.append(b[i] / scale)
            kinds.append(eq)

    m = len(rows)
    n_slack = sum(1 for k in kinds if not k)
    crash = _crash_columns(rows, rhs, kinds, upper_s)
    for i, j in crash.items():
        rhs[i] /= rows[i][j]
        rows[i] = rows[i] / rows[i][j]
    need_art = [(k or r < 0) and i not in crash for i, (k, r) in enumerate(zip(kinds, rhs))]
    n_art = sum(need_art)
    ncol = nf + n_slack + n_art
    A0 = np.zeros((m, ncol))
    b0 = np.zeros(m)
    upper = np.concatenate([upper_s, np.full(n_slack + n_art, np.inf)])
    id_cols = np.zeros(m, dtype=int)
    si, ai = nf, nf + n_slack
    for i, (row, r, eq) in enumerate(zip(rows, rhs, kinds)):
        sign = -1.0 if r < 0 else 1.0
        A0[i, :nf] = sign * row
        b0[i] = sign * r
        if not eq:
            A0[i, si] = sign
            slack_col = si
            si += 1
        if i in crash:
            id_cols[i] = crash[i]
        elif need_art[i]:
            A0[i, ai] = 1.0
            id_cols[i] = ai
            ai += 1
        else:
            id_cols[i] = slack_col

    tab = _Tableau(A0, b0, upper, id_cols)
    art = np.zeros(ncol, dtype=bool)
    art[nf + n_slack:] = True
    if n_art:
        status = tab.run(art.astype(float), np.ones(ncol, dtype=bool), MAX_PIVOTS)
        if status is not Status.OPTIMAL:
            return MilpSolution(Status.ITERATION_LIMIT, pivots=tab.pivots, message=f"phase 1: {status.value}")
        tab.refresh()
        infeas = float(tab.beta[art[tab.basis]].sum())
        if infeas > FEAS_TOL:
            return MilpSolution(Status.INFEASIBLE, pivots=tab.pivots, message=f"phase 1 residual {infeas:.3g}")
        _drive_out_artificials(tab, art)
        tab.upper[art] = 0.0

    cscale = np.abs(c[free]).max() if nf else 0.0
    cscale = cscale if cscale > 0 else 1.0
    cost = np.zeros(ncol)
    cost[:nf] = c[free] / cscale
    status = tab.run(cost, ~art, MAX_PIVOTS)
    if status is Status.UNBOUNDED:
        return MilpSolution(Status.UNBOUNDED, pivots=tab.pivots)
    if status is not Status.OPTIMAL:
        return MilpSolution(Status.ITERATION_LIMIT, pivots=tab.pivots, message="phase 2 pivot limit")
    tab.refresh()
    u = tab.values()
    v = base.copy()
    v[free] += np.clip(u[:nf], 0.0, upper_s)
    return MilpSolution(Status.OPTIMAL, v, float(c @ v), pivots=tab.pivots)


def _crash_columns(rows, rhs, kinds, upper) -> dict[int, int]:
    """Equality rows that own a singleton column able to carry the row alone.

    Such a column starts basic instead of an artificial (e.g. the ``k = 0``
    binary of a one-hot block).
    """
    if not rows:
        return {}
    A = np.array(rows)
    nz = np.abs(A) > 0.0
    singleton = nz.sum(axis=0) == 1
    crash, used = {}, set()
    for i, eq in enumerate(kinds):
        if not eq:
            continue
        for j in np.flatnonzero(singleton & nz[i]):
            value = rhs[i] / A[i, j]
            if j not in used and 0.0 <= value <= upper[j]:
                crash[i] = int(j)
                used.add(int(j))
                break
    return crash


def _drive_out_artificials(tab: _Tableau, art: np.ndarray):
    for p in range(tab.m):
        if not art[tab.basis[p]]:
            continue
        row = np.where(~art & ~tab.is_basic, np.abs(tab.T[p]), 0.0)
        q = int(np.argmax(row))
        if row[q] <= _PIV_TOL:
            continue  # redundant row; the artificial stays basic at zero
        leave = tab.basis[p]
        value = tab.upper[q] if tab.at_upper[q] else 0.0
        tab._pivot(p, q)
        tab.beta[p] = value
        tab.is_basic[leave] = False
        tab.at_upper[leave] = False
        tab.is_basic[q] = True
        tab.at_upper[q] = False
        tab.basis[p] = q
    tab.refresh()


def solve_lp(problem: MilpProblem) -> MilpSolution:
    """Solve the LP relaxation of ``problem`` (integrality ignored)."""
    sol = _lp(problem, problem.lo.copy(), problem.hi.copy())
    sol.nodes = 1
    return sol


def _fractionality(problem: MilpProblem, v: np.ndarray) -> np.ndarray:
    frac = np.zeros_like(v)
    ints = problem.integrality
    f = v[ints] - np.floor(v[ints])
    frac[ints] = np.minimum(f, 1.0 - f)
    return frac


def _polish(problem: MilpProblem, v: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # snap integer variables and re-solve for the continuous part
    ints = problem.integrality
    r = np.round(v[ints])
    lo2, hi2 = lo.copy(), hi.copy()
    lo2[ints] = r
    hi2[ints] = r
    sol = _lp(problem, lo2, hi2)
    if sol.optimal:
        return sol.values
    out = v.copy()
    out[ints] = r
    return out


def solve_milp(problem: MilpProblem, node_limit: int = NODE_LIMIT, record_nodes: bool = False) -> MilpSolution:
    """Global optimum by best-first branch-and-bound.

    Branches on the most fractional integer variable (lowest index on ties),
    down-branch first.  Every node's relaxation bound is checked against its
    parent's: a child can never bound below the node it was split from.
    """
    counter = itertools.count()
    node_log: list[NodeRecord] = []
    nodes = 0
    pivots = 0

    def relax(lo, hi):
        nonlocal nodes, pivots
        sol = _lp(problem, lo, hi)
        nodes += 1
        pivots += sol.pivots
        if record_nodes:
            node_log.append(NodeRecord(lo.copy(), hi.copy(), sol.objective, sol.status))
        return sol

    root = relax(problem.lo.copy(), problem.hi.copy())
    if root.status is not Status.OPTIMAL:
        return MilpSolution(root.status, nodes=nodes, pivots=pivots, message=root.message, node_log=node_log)

    best_v, best_obj = None, np.inf
    heap: list = []

    def consider(sol, lo, hi):
        nonlocal best_v, best_obj
        frac = _fractionality(problem, sol.values)
        if frac.max(initial=0.0) <= INT_TOL:
            v = _polish(problem, sol.values, lo, hi)
            obj = float(problem.c @ v)
            if obj < best_obj:
                best_v, best_obj = v, obj
            return
        if sol.objective < best_obj - _prune_tol(best_obj):
            heapq.heappush(heap, (sol.objective, next(counter), lo, hi, sol.values, frac))

    consider(root, problem.lo.copy(), problem.hi.copy())
    while heap:
        bound, _, lo, hi, v, frac = heapq.heappop(heap)
        if bound >= best_obj - _prune_tol(best_obj):
            continue
        if nodes >= node_limit:
            status = Status.ITERATION_LIMIT
            return MilpSolution(status, best_v, best_obj, nodes, pivots, "node limit reached", node_log)
        j = int(np.argmax(frac))
        for side in (0, 1):
            clo, chi = lo.copy(), hi.copy()
            if side == 0:
                chi[j] = np.floor(v[j])
            else:
                clo[j] = np.ceil(v[j])
            child = relax(clo, chi)
            if child.status is Status.INFEASIBLE:
                continue
            if child.status is not Status.OPTIMAL:
                log.warning("node relaxation ended with %s", child.status.value)
                continue
            assert child.objective >= bound - 1e-7 * max(1.0, abs(bound)), "child bound below parent"
            consider(child, clo, chi)

    if best_v is None:
        return MilpSolution(Status.INFEASIBLE, nodes=nodes, pivots=pivots, message="no integral point", node_log=node_log)
    return MilpSolution(Status.OPTIMAL, best_v, best_obj, nodes, pivots, node_log=node_log)


def _prune_tol(obj: float) -> float:
    return 1e-9 * max(1.0, abs(obj)) if np.isfinite(obj) else 0.0


def to_lp_format(problem: MilpProblem) -> str:
    """Plain-text LP-style dump for cross-checking with external solvers."""
    names = problem.names or [f"v{j}" for j in range(problem.num_vars)]

    def expr(coefs):
        terms = [f"{'-' if a < 0 else '+'} {abs(a):.17g} {names[j]}" for j, a in enumerate(coefs) if a != 0]
        return " ".join(terms) if terms else "0"

    out = ["Minimize", f" obj: {expr(problem.c)}", "Subject To"]
    for i, (row, b) in enumerate(zip(problem.A_ub, problem.b_ub)):
        out.append(f" ub{i}: {expr(row)} <= {b:.17g}")
    for i, (row, b) in enumerate(zip(problem.A_eq, problem.b_eq)):
        out.append(f" eq{i}: {expr(row)} = {b:.17g}")
    out.append("Bounds")
    for j, name in enumerate(names):
        hi = "+inf" if np.isinf(problem.hi[j]) else f"{problem.hi[j]:.17g}"
        out.append(f" {problem.lo[j]:.17g} <= {name} <= {hi}")
    ints = [names[j] for j in np.flatnonzero(problem.integrality)]
    if ints:
        out.append("General")
        out.append(" " + " ".join(ints))
    out.append("End")
    return "\n".join(out) + "\n"
