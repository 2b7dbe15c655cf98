"""Exhaustive search over link vectors, driven by integer partitions.

Any link vector with ``sum(x) == t`` is a partition of ``t`` spread over
distinct magnitudes, so the feasible set under quota ``theta`` is the union
over ``t = 1..theta`` of every partition of ``t`` placed on the ``n + 1``
magnitudes.  The counting functions here reproduce that census exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice, permutations, product
from typing import Iterator, Sequence

import numpy as np

from . import model
from .errors import Infeasible, SearchSpaceTooLarge
from .model import EvalResult, LinkVector, ProblemSpec

GRID_CAP = 10**8
_CHUNK = 20000


@dataclass(frozen=True)
class PartitionMatrix:
    """Rows are multiplicity vectors: ``row[k-1]`` copies of summand ``k``."""

    t: int
    rows: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def empty(self) -> bool:
        return not self.rows


@dataclass(frozen=True)
class BruteResult:
    x: LinkVector
    evaluation: EvalResult
    evaluated_count: int


def _partitions_desc(t: int, largest: int) -> Iterator[list[int]]:
    # parts listed largest first; callers get them in ascending order of
    # largest part which, after conversion, matches the displayed matrices
    if t == 0:
        yield []
        return
    for k in range(min(t, largest), 0, -1):
        for rest in _partitions_desc(t - k, k):
            yield [k] + rest


def partitions(t: int) -> PartitionMatrix:
    """All partitions of ``t`` as multiplicity vectors of length ``t``.

    Rows are ordered by largest part ascending, with ties broken by
    decreasing multiplicity of the small summands; for t = 2, 3, 4 this is
    [2,0], [0,1] / [3,0,0], [1,1,0], [0,0,1] / [4,0,0,0], [2,1,0,0],
    [0,2,0,0], [1,0,1,0], [0,0,0,1].  ``t == 0`` gives an empty matrix.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return PartitionMatrix(0, ())
    rows = []
    for parts in _partitions_desc(t, t):
        lam = [0] * t
        for k in parts:
            lam[k - 1] += 1
        rows.append(tuple(lam))
    rows.sort(key=lambda lam: (_largest(lam), tuple(-v for v in lam)))
    return PartitionMatrix(t, tuple(rows))


def _largest(lam: Sequence[int]) -> int:
    return max(k + 1 for k, v in enumerate(lam) if v)


def comb_count(lam: Sequence[int], n_star: int) -> int:
    """Ways to give ``lam[k-1]`` distinct magnitudes the summand ``k``."""
    remaining = n_star
    total = 1
    for m in lam:
        if m > remaining:
            return 0
        total *= math.comb(remaining, m)
        remaining -= m
    return total


def feasible_count(t: int, n_star: int) -> int:
    """Number of link vectors over ``n_star`` magnitudes summing to exactly ``t``."""
    return sum(comb_count(row, n_star) for row in partitions(t).rows)


def total_feasible(theta: int, n_star: int) -> int:
    """Number of link vectors with ``1 <= sum(x) <= theta``."""
    return sum(feasible_count(t, n_star) for t in range(1, theta + 1))


def _place(lam: Sequence[int], free: tuple[int, ...], k: int, x: list[int]) -> Iterator[None]:
    # assign summand k+1 to lam[k] of the free magnitudes, then recurse
    if k == len(lam):
        yield None
        return
    for chosen in combinations(free, lam[k]):
        for p in chosen:
            x[p] = k + 1
        rest = tuple(p for p in free if p not in chosen)
        yield from _place(lam, rest, k + 1, x)
        for p in chosen:
            x[p] = 0


def enumerate_solutions(spec: ProblemSpec) -> Iterator[LinkVector]:
    """Zero vector first, then every ``x`` with ``1 <= sum(x) <= theta`` once."""
    n_star = spec.n + 1
    yield model.zero_links(spec.n)
    for t in range(1, spec.theta + 1):
        for lam in partitions(t).rows:
            x = [0] * n_star
            for _ in _place(lam, tuple(range(n_star)), 0, x):
                yield tuple(x)


def _support_blocks(n_star: int, theta: int) -> Iterator[np.ndarray]:
    """Same candidate set as ``enumerate_solutions``, as dense int64 chunks."""
    yield np.zeros((1, n_star), dtype=np.int64)
    for t in range(1, theta + 1):
        for lam in partitions(t).rows:
            values = [k + 1 for k, m in enumerate(lam) for _ in range(m)]
            k = len(values)
            if k > n_star:
                continue
            perms = np.array(sorted(set(permutations(values))), dtype=np.int64)
            combos = combinations(range(n_star), k)
            while True:
                pos = np.array(list(islice(combos, _CHUNK)), dtype=np.int64)
                if pos.size == 0:
                    break
                pos = pos.reshape(-1, k)
                rows = len(pos) * len(perms)
                block = np.zeros((rows, n_star), dtype=np.int64)
                r = np.repeat(np.arange(rows), k).reshape(rows, k)
                cols = np.repeat(pos, len(perms), axis=0)
                vals = np.tile(perms, (len(pos), 1))
                block[r, cols] = vals
                yield block


def _score_block(block: np.ndarray, a: np.ndarray, logtab: np.ndarray):
    y = np.cumsum(block, axis=1) - block
    d6 = (a * (2 * block * block + block + 6 * block * y + 6 * y * y)).sum(axis=1)
    cap = (a * logtab[block]).sum(axis=1)
    return d6, cap


def _finish(spec: ProblemSpec, ties: list[LinkVector], count: int) -> BruteResult:
    if not ties:
        raise Infeasible(
            f"payload {spec.payload} exceeds the capacity of every coding "
            f"with n={spec.n}, theta={spec.theta}"
        )
    counts = spec.counts
    best = min(ties, key=lambda x: (model.capacity_product(counts, x), x))
    return BruteResult(best, model.evaluate(spec, best), count)


def brute_force_optimize(spec: ProblemSpec) -> BruteResult:
    """Minimum-distortion coding by exhaustive partition-driven search.

    Ties are broken by smaller capacity, then lexicographically smaller x.
    Raises ``Infeasible`` when no coding reaches the payload.
    """
    n_star = spec.n + 1
    a = np.array(spec.counts, dtype=np.int64)
    logtab = np.log2(np.arange(1, spec.theta + 2, dtype=np.float64))
    best_d6 = None
    ties: list[LinkVector] = []
    count = 0
    for block in _support_blocks(n_star, spec.theta):
        count += len(block)
        d6, cap = _score_block(block, a, logtab)
        ok = cap >= spec.payload - model.PAYLOAD_TOL
        if not ok.any():
            continue
        d6 = d6[ok]
        lo = int(d6.min())
        if best_d6 is not None and lo > best_d6:
            continue
        winners = [tuple(int(v) for v in row) for row in block[ok][d6 == lo]]
        if best_d6 is None or lo < best_d6:
            best_d6, ties = lo, winners
        else:
            ties.extend(winners)
    return _finish(spec, ties, count)


def max_capacity(spec: ProblemSpec) -> float:
    """Largest capacity reachable within the quota."""
    a = np.array(spec.counts, dtype=np.int64)
    logtab = np.log2(np.arange(1, spec.theta + 2, dtype=np.float64))
    best = 0.0
    for block in _support_blocks(spec.n + 1, spec.theta):
        best = max(best, float((a * logtab[block]).sum(axis=1).max()))
    return best


def naive_grid_optimize(spec: ProblemSpec, cap: int = GRID_CAP) -> BruteResult:
    """Same contract as ``brute_force_optimize``, by scanning the full grid
    ``{0..theta}^(n+1)`` and evaluating each point with ``model.evaluate``."""
    size = (spec.theta + 1) ** (spec.n + 1)
    if size > cap:
        raise SearchSpaceTooLarge(f"grid has {size} points, cap is {cap}")
    best = None
    ties: list[LinkVector] = []
    for x in product(range(spec.theta + 1), repeat=spec.n + 1):
        if sum(x) > spec.theta:
            continue
        ev = model.evaluate(spec, x)
        if not ev.feasible:
            continue
        if best is None or ev.distortion_exact < best:
            best, ties = ev.distortion_exact, [x]
        elif ev.distortion_exact == best:
            ties.append(x)
    return _finish(spec, ties, size)
