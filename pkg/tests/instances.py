"""Seeded random problem instances shared by unit and acceptance tests."""
from __future__ import annotations

import numpy as np

from revstego.model import AbsErrorHistogram, max_capacity


def decaying_histogram(rng: np.random.Generator, n: int, extra: int = 0) -> AbsErrorHistogram:
    """Laplacian-like error histogram over magnitudes 0..n (+ ``extra`` empty bins).

    Magnitude 0 is damped because it only counts one sign.
    """
    peak = rng.integers(200, 5000)
    scale = rng.uniform(0.8, 4.0)
    i = np.arange(n + 1)
    base = peak * np.exp(-i / scale)
    base[0] *= 0.6
    noisy = base * rng.uniform(0.7, 1.3, size=n + 1)
    counts = np.maximum(np.rint(noisy), 1).astype(int)
    return AbsErrorHistogram(tuple(counts.tolist()) + (0,) * extra)


def small_histogram(rng: np.random.Generator, n: int, hi: int = 20) -> AbsErrorHistogram:
    return AbsErrorHistogram(tuple(rng.integers(0, hi + 1, size=n + 1).tolist()))


def payload_levels(hist, n, theta, fractions=(0.25, 0.5, 0.75)):
    top = max_capacity(hist, n, theta)
    return [f * top for f in fractions]
