"""Iterative mixed-integer linearization of the coding problem.

Each link count ``x_i`` becomes a one-hot block of ``theta + 1`` binaries, so
``log2(x_i + 1)`` and ``x_i**2`` are dot products with constant vectors.
The cumulative terms ``y_i**2`` and ``x_i * y_i`` are replaced by slack
variables that are pushed up by first-order Taylor cuts anchored at the
previous iterate; the MILP is re-solved until the decoded ``x`` repeats.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import model
from .errors import FractionalBlock, Infeasible
from .model import EvalResult, LinkVector, ProblemSpec
from .solver import MilpProblem, MilpSolution, Status, solve_milp

log = logging.getLogger(__name__)

ONEHOT_TOL = 1e-6
MAX_ITER = 20


@dataclass(frozen=True)
class VariableLayout:
    """Column order: one-hot blocks by magnitude, then all ``y**2`` slacks,
    then all ``x*y`` slacks."""

    n: int
    theta: int

    @property
    def width(self) -> int:
        return self.theta + 1

    @property
    def num_binary(self) -> int:
        return (self.n + 1) * self.width

    @property
    def num_vars(self) -> int:
        return (self.n + 1) * (self.theta + 3)

    def block(self, i: int) -> slice:
        return slice(i * self.width, (i + 1) * self.width)

    def z_sq(self, i: int) -> int:
        return self.num_binary + i

    def z_xy(self, i: int) -> int:
        return self.num_binary + self.n + 1 + i

    def names(self) -> list[str]:
        out = [f"x{i}_{k}" for i in range(self.n + 1) for k in range(self.width)]
        out += [f"zyy{i}" for i in range(self.n + 1)]
        out += [f"zxy{i}" for i in range(self.n + 1)]
        return out

    def x_expr(self, i: int) -> np.ndarray:
        """Row vector whose dot product with the variables is ``x_i``."""
        row = np.zeros(self.num_vars)
        row[self.block(i)] = np.arange(self.width)
        return row

    def y_expr(self, i: int) -> np.ndarray:
        """Row vector for ``y_i``, the links of all magnitudes below ``i``."""
        row = np.zeros(self.num_vars)
        if i:
            row[: i * self.width] = np.tile(np.arange(self.width), i)
        return row


def build_layout(n: int, theta: int) -> VariableLayout:
    if n < 0 or theta < 0:
        raise ValueError("n and theta must be non-negative")
    return VariableLayout(n, theta)


def encode_onehot(x: Sequence[int], layout: VariableLayout) -> np.ndarray:
    """Binary part of the assignment representing ``x``."""
    if len(x) != layout.n + 1:
        raise ValueError(f"expected {layout.n + 1} links, got {len(x)}")
    out = np.zeros(layout.num_binary)
    for i, v in enumerate(x):
        if not 0 <= v <= layout.theta:
            raise ValueError(f"x[{i}] = {v} outside [0, {layout.theta}]")
        out[i * layout.width + int(v)] = 1.0
    return out


def decode_onehot(values: Sequence[float], layout: VariableLayout, tol: float = ONEHOT_TOL) -> LinkVector:
    values = np.asarray(values, dtype=float)
    if values.size < layout.num_binary:
        raise ValueError("assignment shorter than the binary blocks")
    ks = np.arange(layout.width)
    x = []
    for i in range(layout.n + 1):
        blk = values[layout.block(i)]
        if blk.min() < -tol or blk.max() > 1 + tol or abs(blk.sum() - 1) > tol:
            raise FractionalBlock(f"block {i} is not one-hot: {blk.tolist()}")
        if np.abs(blk - np.round(blk)).max() > tol:
            raise FractionalBlock(f"block {i} is fractional: {blk.tolist()}")
        v = float(ks @ blk)
        x.append(int(round(v)))
    return tuple(x)


@dataclass(frozen=True)
class Cut:
    """``coefs @ v <= rhs``, produced by the anchor ``(x_tilde, y_tilde)``."""

    kind: str  # "sq" or "xy"
    index: int
    anchor: tuple[float, float]
    coefs: np.ndarray = field(compare=False, repr=False)
    rhs: float = 0.0

    @property
    def key(self) -> tuple:
        return (self.kind, self.index, self.anchor)


@dataclass(frozen=True)
class LinearizedModel:
    spec: ProblemSpec
    layout: VariableLayout
    objective: np.ndarray
    capacity_row: np.ndarray
    quota_row: np.ndarray
    onehot: np.ndarray
    cuts: tuple[Cut, ...] = ()
    accumulate_bilinear: bool = False
    bilinear: str = "carriers"

    def to_problem(self) -> MilpProblem:
        lay = self.layout
        rows = [-self.capacity_row, self.quota_row] + [c.coefs for c in self.cuts]
        rhs = [-(self.spec.payload - model.PAYLOAD_TOL), float(lay.theta)] + [c.rhs for c in self.cuts]
        lo = np.zeros(lay.num_vars)
        hi = np.ones(lay.num_vars)
        hi[lay.num_binary:] = float(lay.theta**2)
        ints = np.zeros(lay.num_vars, dtype=bool)
        ints[: lay.num_binary] = True
        return MilpProblem(
            self.objective,
            np.array(rows),
            np.array(rhs),
            self.onehot,
            np.ones(lay.n + 1),
            lo,
            hi,
            ints,
            names=lay.names(),
        )

    def cut_keys(self) -> frozenset:
        return frozenset(c.key for c in self.cuts)


def build_base_model(
    spec: ProblemSpec, accumulate_bilinear: bool = False, bilinear: str = "carriers"
) -> LinearizedModel:
    """Model without Taylor cuts; its slacks sit at zero at the optimum."""
    lay = build_layout(spec.n, spec.theta)
    ks = np.arange(lay.width, dtype=float)
    per_k = ks * ks / 3.0 + ks / 6.0
    log_k = np.log2(ks + 1.0)
    obj = np.zeros(lay.num_vars)
    cap = np.zeros(lay.num_vars)
    quota = np.zeros(lay.num_vars)
    onehot = np.zeros((lay.n + 1, lay.num_vars))
    for i, a in enumerate(spec.counts):
        blk = lay.block(i)
        obj[blk] = a * per_k
        cap[blk] = a * log_k
        quota[blk] = ks
        onehot[i, blk] = 1.0
        obj[lay.z_sq(i)] = a
        obj[lay.z_xy(i)] = a
    return LinearizedModel(spec, lay, obj, cap, quota, onehot, (), accumulate_bilinear, bilinear)


def taylor_cuts(layout: VariableLayout, x_prev: Sequence[float], bilinear: str = "carriers") -> list[Cut]:
    """Linearized ``z_sq_i >= y_i**2`` and ``z_xy_i >= x_i*y_i`` around ``x_prev``.

    With ``bilinear="carriers"`` the ``x*y`` cut is only emitted where the
    anchor links something (``x_prev[i] > 0``).  At a non-carrier the plane
    reads ``z >= y_prev[i] * x_i``, which overcharges a new carrier whose
    inherited shift drops, and pins the iteration to its first answer.
    ``bilinear="all"`` emits it for every magnitude.  The anchor may be
    fractional (see the cycle damping in ``iterate_optimize``).
    """
    if bilinear not in ("carriers", "all"):
        raise ValueError(f"unknown bilinear cut scope {bilinear!r}")
    y_prev = model.cumulative_deviations(x_prev)
    cuts = []
    for i, (xt, yt) in enumerate(zip(x_prev, y_prev)):
        if yt:
            row = 2 * yt * layout.y_expr(i)
            row[layout.z_sq(i)] = -1.0
            cuts.append(Cut("sq", i, (0, yt), row, float(yt * yt)))
        if bilinear == "carriers" and not xt:
            continue
        if (xt or yt) and (i or yt):
            row = xt * layout.y_expr(i) + yt * layout.x_expr(i)
            row[layout.z_xy(i)] = -1.0
            cuts.append(Cut("xy", i, (xt, yt), row, float(xt * yt)))
    return cuts


def add_taylor_cuts(lin: LinearizedModel, x_prev: Sequence[float]) -> LinearizedModel:
    """Square cuts accumulate (they never cut off an integer point); bilinear
    cuts are replaced by the new anchor's unless ``accumulate_bilinear``."""
    new = taylor_cuts(lin.layout, x_prev, lin.bilinear)
    kept = [c for c in lin.cuts if c.kind == "sq" or lin.accumulate_bilinear]
    seen = {c.key for c in kept}
    for c in new:
        if c.key not in seen:
            kept.append(c)
            seen.add(c.key)
    return replace(lin, cuts=tuple(kept))


@dataclass(frozen=True)
class IterationRecord:
    x: LinkVector
    milp_objective: float
    distortion: float
    capacity: float
    feasible: bool


@dataclass
class MilpResult:
    x: LinkVector
    evaluation: EvalResult
    iterations: int
    converged: bool
    trace: list[IterationRecord]
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "x": list(self.x),
            "capacity_bits": self.evaluation.capacity,
            "distortion": self.evaluation.distortion,
            "iterations": self.iterations,
            "converged": self.converged,
            "per_iteration_trace": [
                {
                    "x": list(r.x),
                    "milp_objective": r.milp_objective,
                    "distortion": r.distortion,
                    "capacity_bits": r.capacity,
                    "feasible": r.feasible,
                }
                for r in self.trace
            ],
        }


def _rank(spec: ProblemSpec, x: LinkVector, ev: EvalResult):
    return (ev.distortion_exact, model.capacity_product(spec.counts, x), x)


def iterate_optimize(
    spec: ProblemSpec,
    max_iter: int = MAX_ITER,
    solver: Callable[[MilpProblem], MilpSolution] = solve_milp,
    start: Sequence[int] | None = None,
    accumulate_bilinear: bool = False,
    bilinear: str = "carriers",
    damping_rounds: int = 1,
) -> MilpResult:
    """Successive linearization; returns the best iterate by true distortion.

    Stops when a decoded ``x`` repeats an earlier iterate, when the new
    anchor adds no cut, or after ``max_iter`` solves (``converged`` False).
    The first ``damping_rounds`` cycles (of length two or more) do not stop
    the loop: the cuts are re-anchored at the mean of the cycle's iterates
    instead.  ``start`` seeds the first cuts with a known coding instead of
    solving the cut-free model first.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    lin = build_base_model(spec, accumulate_bilinear, bilinear)
    seen: list[LinkVector] = []
    trace: list[IterationRecord] = []
    best = None
    if start is not None:
        x0 = model.check_links(start, spec.theta)
        ev0 = model.evaluate(spec, x0)
        if ev0.feasible:
            best = (_rank(spec, x0, ev0), x0, ev0)
        seen.append(x0)
        lin = add_taylor_cuts(lin, x0)

    converged, reason = False, "iteration limit"
    for it in range(1, max_iter + 1):
        sol = solver(lin.to_problem())
        if sol.status is Status.INFEASIBLE:
            if best is None:
                raise Infeasible(
                    f"payload {spec.payload} exceeds the capacity of every coding "
                    f"with n={spec.n}, theta={spec.theta}"
                )
            converged, reason = True, "cuts made the model infeasible"
            break
        if sol.values is None:
            reason = f"solver stopped: {sol.status.value}"
            break
        x = decode_onehot(sol.values, lin.layout)
        ev = model.evaluate(spec, x)
        trace.append(IterationRecord(x, sol.objective, ev.distortion, ev.capacity, ev.feasible))
        log.debug("iteration %d: x=%s milp=%.6g true=%.6g", it, x, sol.objective, ev.distortion)
        if ev.feasible:
            rank = _rank(spec, x, ev)
            if best is None or rank < best[0]:
                best = (rank, x, ev)
        if x in seen:
            cycle = seen[seen.index(x):]
            if len(cycle) > 1 and damping_rounds > 0:
                # oscillating anchors: linearize around the cycle's centre once more
                damping_rounds -= 1
                centre = tuple(float(v) for v in np.mean(cycle, axis=0))
                log.debug("cycle of length %d, re-anchoring at %s", len(cycle), centre)
                seen = [x]
                lin = add_taylor_cuts(lin, centre)
                continue
            converged = True
            reason = "fixed point" if x == seen[-1] else "cycle"
            break
        seen.append(x)
        nxt = add_taylor_cuts(lin, x)
        if nxt.cut_keys() == lin.cut_keys():
            converged, reason = True, "no new cuts"
            break
        lin = nxt
    if best is None:
        raise Infeasible("no feasible iterate found")
    _, x, ev = best
    return MilpResult(x, ev, len(trace), converged, trace, reason)

