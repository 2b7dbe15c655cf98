"""Capacity and distortion of a prediction-error coding.

A coding is described by a link vector ``x``: ``x[i]`` extra stego values
are linked to the absolute error magnitude ``i``.  Magnitude ``i`` then
carries ``log2(x[i] + 1)`` bits per occurrence and is shifted by the
cumulative deviation ``y[i] = x[0] + ... + x[i-1]`` plus a message digit.

Distortion is kept exact: six times the expected squared deviation is an
integer for integer counts and links, so all comparisons are done on that
integer and converted to ``Fraction``/``float`` only for callers.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import accumulate
from typing import Iterable, Sequence

from .errors import DimensionMismatch

LinkVector = tuple[int, ...]

# capacity >= payload is tested with this slack to absorb log2 rounding
PAYLOAD_TOL = 1e-9


@dataclass(frozen=True)
class AbsErrorHistogram:
    """Occurrence counts of absolute prediction errors, indexed by magnitude."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise ValueError("histogram needs at least the magnitude-0 bin")
        if any(c < 0 for c in counts):
            raise ValueError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, i):
        return self.counts[i]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def padded(self, n: int) -> "AbsErrorHistogram":
        """Histogram addressable up to magnitude ``n`` (missing bins are empty)."""
        if len(self.counts) > n:
            return self
        return AbsErrorHistogram(self.counts + (0,) * (n + 1 - len(self.counts)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["magnitude", "count"])
        for i, c in enumerate(self.counts):
            writer.writerow([i, c])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AbsErrorHistogram":
        reader = csv.reader(io.StringIO(text))
        rows = [r for r in reader if r and any(cell.strip() for cell in r)]
        if not rows or [c.strip() for c in rows[0]] != ["magnitude", "count"]:
            raise ValueError("histogram CSV needs a 'magnitude,count' header")
        counts = []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 2:
                raise ValueError(f"line {lineno}: expected two columns")
            mag, cnt = int(row[0]), int(row[1])
            if mag != len(counts):
                raise ValueError(
                    f"line {lineno}: magnitudes must be contiguous from 0, got {mag}"
                )
            counts.append(cnt)
        return cls(tuple(counts))


@dataclass(frozen=True)
class ProblemSpec:
    """Minimize distortion over links ``x[0..n]`` with ``sum(x) <= theta``
    subject to ``capacity >= payload``."""

    histogram: AbsErrorHistogram
    n: int
    theta: int
    payload: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        if self.payload < 0 or math.isnan(self.payload):
            raise ValueError("payload must be non-negative")
        if not isinstance(self.histogram, AbsErrorHistogram):
            object.__setattr__(self, "histogram", AbsErrorHistogram(tuple(self.histogram)))
        object.__setattr__(self, "histogram", self.histogram.padded(self.n))

    @property
    def counts(self) -> tuple[int, ...]:
        """Counts of the decision-indexed magnitudes ``0..n``."""
        return self.histogram.counts[: self.n + 1]

    def with_payload(self, payload: float) -> "ProblemSpec":
        return ProblemSpec(self.histogram, self.n, self.theta, payload)


@dataclass(frozen=True)
class EvalResult:
    capacity: float
    distortion: float
    feasible: bool
    distortion_exact: Fraction = field(default=Fraction(0), compare=False)


def check_links(x: Sequence[int], theta: int | None = None) -> LinkVector:
    """Validate a link vector and return it as a tuple of ints."""
    x = tuple(int(v) for v in x)
    if any(v < 0 for v in x):
        raise ValueError(f"link counts must be non-negative: {x}")
    if theta is not None:
        if any(v > theta for v in x):
            raise ValueError(f"link count above quota {theta}: {x}")
        if sum(x) > theta:
            raise ValueError(f"links {x} exceed quota {theta}")
    return x


def cumulative_deviations(x: Sequence[int]) -> tuple[int, ...]:
    """Shift inherited by each magnitude from the links of smaller ones."""
    return tuple(accumulate(x[:-1], initial=0)) if len(x) else ()


def _bins(hist: AbsErrorHistogram | Sequence[int], x: Sequence[int]) -> Sequence[int]:
    counts = hist.counts if isinstance(hist, AbsErrorHistogram) else hist
    if len(x) > len(counts):
        raise DimensionMismatch(
            f"link vector covers {len(x)} magnitudes, histogram only {len(counts)}"
        )
    return counts


def capacity(hist: AbsErrorHistogram | Sequence[int], x: Sequence[int]) -> float:
    """Embeddable bits ``sum_i a_i log2(x_i + 1)``."""
    counts = _bins(hist, x)
    return math.fsum(a * math.log2(xi + 1) for a, xi in zip(counts, x) if xi)


def per_value_distortion(x_i: int, y_i: int) -> Fraction:
    """Mean of ``(d + y_i)**2`` over the ``x_i + 1`` equally likely digits ``d``."""
    return Fraction(2 * x_i * x_i + x_i + 6 * x_i * y_i + 6 * y_i * y_i, 6)


def distortion_times6(hist: AbsErrorHistogram | Sequence[int], x: Sequence[int]) -> int:
    """Six times the expected total squared deviation, as an exact integer."""
    counts = _bins(hist, x)
    total = 0
    y = 0
    for a, xi in zip(counts, x):
        if a and (xi or y):
            total += a * (2 * xi * xi + xi + 6 * xi * y + 6 * y * y)
        y += xi
    return total


def distortion_exact(hist: AbsErrorHistogram | Sequence[int], x: Sequence[int]) -> Fraction:
    return Fraction(distortion_times6(hist, x), 6)


def distortion(hist: AbsErrorHistogram | Sequence[int], x: Sequence[int]) -> float:
    """Expected total squared deviation of the coding ``x`` on ``hist``."""
    return float(distortion_exact(hist, x))


def capacity_product(hist: AbsErrorHistogram | Sequence[int], x: Sequence[int]) -> int:
    """``prod (x_i + 1) ** a_i``; its log2 is the capacity, exactly comparable."""
    counts = _bins(hist, x)
    p = 1
    for a, xi in zip(counts, x):
        if xi and a:
            p *= (xi + 1) ** a
    return p


def evaluate(spec: ProblemSpec, x: Sequence[int]) -> EvalResult:
    x = check_links(x)
    if len(x) != spec.n + 1:
        raise DimensionMismatch(f"expected {spec.n + 1} links, got {len(x)}")
    counts = spec.counts
    cap = capacity(counts, x)
    exact = distortion_exact(counts, x)
    within_quota = all(v <= spec.theta for v in x) and sum(x) <= spec.theta
    feasible = within_quota and cap >= spec.payload - PAYLOAD_TOL
    return EvalResult(cap, float(exact), feasible, exact)


def zero_links(n: int) -> LinkVector:
    return (0,) * (n + 1)


def histogram_from_errors(magnitudes: Iterable[int]) -> AbsErrorHistogram:
    counts: list[int] = [0]
    for m in magnitudes:
        m = int(m)
        if m < 0:
            raise ValueError("magnitudes must be non-negative")
        if m >= len(counts):
            counts.extend([0] * (m + 1 - len(counts)))
        counts[m] += 1
    return AbsErrorHistogram(tuple(counts))


def max_capacity(hist: AbsErrorHistogram | Sequence[int], n: int, theta: int) -> float:
    """Largest capacity over link vectors on ``0..n`` within quota ``theta``."""
    counts = hist.counts if isinstance(hist, AbsErrorHistogram) else tuple(hist)
    counts = tuple(counts[: n + 1]) + (0,) * max(0, n + 1 - len(counts))
    # best[b]: max capacity using exactly b links so far
    best = [0.0] + [-math.inf] * theta
    for a in counts:
        nxt = list(best)
        for used in range(theta + 1):
            if best[used] == -math.inf:
                continue
            for k in range(1, theta - used + 1):
                val = best[used] + a * math.log2(k + 1)
                if val > nxt[used + k]:
                    nxt[used + k] = val
        best = nxt
    return max(best)
