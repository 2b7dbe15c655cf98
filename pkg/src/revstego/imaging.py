"""Greyscale images, chequered prediction and the end-to-end stego codec."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import codec
from .codec import MessageBits
from .errors import CorruptStream, EmbeddingOverflow, PGMFormatError
from .model import AbsErrorHistogram, histogram_from_errors


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """8-bit greyscale raster, ``pixels[row, col]``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("image must be a non-empty 2-D array")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValueError("intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, ImageGrid) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PixelPartition:
    context: np.ndarray
    query: np.ndarray

    @property
    def query_count(self) -> int:
        return int(self.query.sum())


def _header_tokens(data: bytes, count: int) -> tuple[list[tuple[int, int]], int]:
    tokens = []
    pos = 2
    while len(tokens) < count:
        if pos >= len(data):
            raise PGMFormatError(f"header truncated at byte {pos}")
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif ch.isdigit():
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            tokens.append((int(data[start:pos]), start))
        else:
            raise PGMFormatError(f"unexpected byte {ch!r} in header at offset {pos}")
    return tokens, pos


def read_pgm(data: bytes) -> ImageGrid:
    """Parse a binary (P5) PGM with maxval 255."""
    if data[:2] != b"P5":
        raise PGMFormatError("missing P5 magic number at byte 0")
    tokens, pos = _header_tokens(data, 3)
    (width, w_at), (height, h_at), (maxval, m_at) = tokens
    if width <= 0:
        raise PGMFormatError(f"bad width {width} at byte {w_at}")
    if height <= 0:
        raise PGMFormatError(f"bad height {height} at byte {h_at}")
    if maxval != 255:
        raise PGMFormatError(f"maxval {maxval} at byte {m_at}; only 255 is supported")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PGMFormatError(f"expected whitespace after maxval at byte {pos}")
    pos += 1
    need = width * height
    body = data[pos : pos + need]
    if len(body) < need:
        raise PGMFormatError(f"pixel data truncated: {len(body)} of {need} bytes from offset {pos}")
    return ImageGrid(np.frombuffer(body, dtype=np.uint8).reshape(height, width))


def write_pgm(grid: ImageGrid) -> bytes:
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return header + grid.pixels.tobytes()


def load_pgm(path: str | Path) -> ImageGrid:
    return read_pgm(Path(path).read_bytes())


def save_pgm(grid: ImageGrid, path: str | Path):
    Path(path).write_bytes(write_pgm(grid))


def split_chequered(grid: ImageGrid) -> PixelPartition:
    """Border and odd-parity interior pixels are context; the rest are queries."""
    if grid.width < 3 or grid.height < 3:
        raise ValueError("image must be at least 3x3")
    r, c = np.indices(grid.pixels.shape)
    interior = (r > 0) & (c > 0) & (r < grid.height - 1) & (c < grid.width - 1)
    query = interior & ((r + c) % 2 == 0)
    return PixelPartition(~query, query)


def predict(grid: ImageGrid, partition: PixelPartition) -> np.ndarray:
    """Rounded (half up) mean of the four orthogonal neighbours, per query
    pixel in raster order."""
    px = grid.pixels.astype(np.int64)
    r, c = np.nonzero(partition.query)
    total = px[r - 1, c] + px[r + 1, c] + px[r, c - 1] + px[r, c + 1]
    return (total + 2) // 4


def prediction_errors(grid: ImageGrid, partition: PixelPartition | None = None):
    partition = partition or split_chequered(grid)
    pred = predict(grid, partition)
    errors = grid.pixels[partition.query].astype(np.int64) - pred
    return partition, pred, errors


def abs_error_histogram(grid: ImageGrid) -> AbsErrorHistogram:
    _, _, errors = prediction_errors(grid)
    return histogram_from_errors(np.abs(errors).tolist())


def select_n(hist: AbsErrorHistogram, theta: int, coverage: float = 0.999) -> int:
    """Smallest n holding ``coverage`` of the error mass whose next ``theta``
    bins are empty, so every cover error fits the coding's reserved range."""
    counts = hist.counts
    total = sum(counts)
    running = 0
    for n, a in enumerate(counts):
        running += a
        if running >= coverage * total and not any(counts[n + 1 : n + 1 + theta]):
            return n
    return len(counts) - 1


def _merge(grid: ImageGrid, partition: PixelPartition, values: np.ndarray) -> ImageGrid:
    px = grid.pixels.copy()
    px[partition.query] = values.astype(np.uint8)
    return ImageGrid(px)


def encode(cover: ImageGrid, x: Sequence[int], message: MessageBits) -> ImageGrid:
    """Embed ``message`` into the query pixels of ``cover`` with links ``x``."""
    partition, pred, errors = prediction_errors(cover)
    cmap = codec.build_coding_map(x)
    stego_err = np.array(codec.modulate(errors.tolist(), cmap, message), dtype=np.int64)
    values = pred + stego_err
    bad = np.flatnonzero((values < 0) | (values > 255))
    if bad.size:
        r, c = np.argwhere(partition.query)[bad[0]]
        raise EmbeddingOverflow(
            f"{bad.size} query pixel(s) would leave [0, 255], first at row {r}, col {c} "
            f"(value {values[bad[0]]})"
        )
    return _merge(cover, partition, values)


def decode(stego: ImageGrid, x: Sequence[int]) -> tuple[ImageGrid, MessageBits]:
    """Recover the cover image and the message embedded with links ``x``."""
    partition, pred, stego_err = prediction_errors(stego)
    cmap = codec.build_coding_map(x)
    errors, message = codec.demodulate(stego_err.tolist(), cmap)
    values = pred + np.array(errors, dtype=np.int64)
    if values.size and (values.min() < 0 or values.max() > 255):
        raise CorruptStream("recovered intensities leave [0, 255]; wrong coding parameters?")
    return _merge(stego, partition, values), message


def embedding_capacity(cover: ImageGrid, x: Sequence[int]) -> int:
    """Whole message bits (excluding the 32-bit frame header) ``x`` can carry."""
    hist = abs_error_histogram(cover)
    return max(0, codec.exact_capacity_bits(codec.build_coding_map(x), hist) - codec.HEADER_BITS)


def mse_psnr(a: ImageGrid, b: ImageGrid) -> tuple[float, float]:
    """Mean squared error over all pixels and PSNR in dB (inf when identical)."""
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(f"shape mismatch: {a.pixels.shape} vs {b.pixels.shape}")
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(255.0**2 / mse)
    return mse, psnr


def synthetic_image(
    width: int = 256, height: int = 256, seed: int = 0, noise: float = 3.0, lo: int = 32, hi: int = 224
) -> ImageGrid:
    """Smooth gradient plus seeded Gaussian noise, kept inside ``[lo, hi]``
    so modest embeddings never overflow."""
    rng = np.random.default_rng(seed)
    r, c = np.indices((height, width), dtype=np.float64)
    fx, fy = rng.uniform(0.5, 2.0, size=2)
    phase = rng.uniform(0, 2 * np.pi)
    base = 0.5 * (c / max(width - 1, 1)) + 0.5 * (r / max(height - 1, 1))
    base = base + 0.15 * np.sin(2 * np.pi * (fx * c / width + fy * r / height) + phase)
    img = lo + (hi - lo) * (base - base.min()) / max(np.ptp(base), 1e-12)
    img = img + rng.normal(0.0, noise, size=img.shape)
    return ImageGrid(np.clip(np.rint(img), lo, hi).astype(np.uint8))
