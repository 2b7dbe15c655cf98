"""Reversible modulation of prediction errors under a link vector.

Cover magnitude ``v <= n`` owns the stego interval
``[v + y_v, v + y_v + x_v]``.  The framed message is read as one big
integer and spent as mixed-radix digits, least significant first, one digit
in base ``x_v + 1`` per carrier occurrence in scan order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import model
from .errors import CapacityExceeded, CorruptStream, NonEmptyReservedBins
from .model import AbsErrorHistogram, LinkVector

HEADER_BITS = 32


@dataclass(frozen=True)
class MessageBits:
    """A bit string stored as an integer (MSB first) plus its length."""

    value: int = 0
    length: int = 0

    def __post_init__(self):
        if self.length < 0 or self.value < 0 or self.value >> self.length:
            raise ValueError("value does not fit in the stated bit length")
        if self.length >= 1 << HEADER_BITS:
            raise ValueError("message too long for the 32-bit length header")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "MessageBits":
        value = length = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"not a bit: {b!r}")
            value = (value << 1) | b
            length += 1
        return cls(value, length)

    @classmethod
    def from_bytes(cls, data: bytes) -> "MessageBits":
        return cls(int.from_bytes(data, "big"), 8 * len(data))

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> (self.length - 1 - k)) & 1 for k in range(self.length))

    def to_bytes(self) -> bytes:
        if self.length % 8:
            raise ValueError("message length is not a whole number of bytes")
        return self.value.to_bytes(self.length // 8, "big")

    @property
    def framed_length(self) -> int:
        return HEADER_BITS + self.length


def frame(message: MessageBits) -> int:
    """Header (bit length, 32 bits) followed by the payload, as an integer."""
    return (message.length << message.length) | message.value


def unframe(number: int) -> MessageBits:
    # the header occupies the top bits, so bit_length(number) = L + bit_length(L)
    if number == 0:
        return MessageBits()
    total = number.bit_length()
    for hbits in range(1, HEADER_BITS + 1):
        length = total - hbits
        if length >= 0 and length.bit_length() == hbits and number >> length == length:
            return MessageBits(number & ((1 << length) - 1), length)
    raise CorruptStream("recovered digits do not form a length-framed message")


@dataclass(frozen=True)
class CodingMap:
    x: LinkVector
    y: tuple[int, ...] = field(init=False)
    owner: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        x = model.check_links(self.x)
        if not x:
            raise ValueError("empty link vector")
        object.__setattr__(self, "x", x)
        y = model.cumulative_deviations(x)
        object.__setattr__(self, "y", y)
        owner = []
        for v, (xv, yv) in enumerate(zip(x, y)):
            owner.extend([v] * (xv + 1))
        object.__setattr__(self, "owner", tuple(owner))

    @property
    def n(self) -> int:
        return len(self.x) - 1

    @property
    def top(self) -> int:
        """Largest stego magnitude the map produces, ``n + sum(x)``."""
        return self.n + sum(self.x)

    def interval(self, v: int) -> tuple[int, int]:
        if v > self.n:
            return (v, v)
        lo = v + self.y[v]
        return (lo, lo + self.x[v])

    def locate(self, s: int) -> tuple[int, int]:
        """Cover magnitude and digit behind stego magnitude ``s``."""
        if s > self.top:
            return s, 0
        v = self.owner[s]
        return v, s - v - self.y[v]


def build_coding_map(x: Sequence[int]) -> CodingMap:
    return CodingMap(tuple(x))


def exact_capacity_bits(cmap: CodingMap, hist: AbsErrorHistogram | Sequence[int]) -> int:
    """Whole bits representable by the carriers: ``floor(log2 prod (x_v+1)^a_v)``."""
    counts = hist.counts if isinstance(hist, AbsErrorHistogram) else tuple(hist)
    counts = counts[: cmap.n + 1]
    return model.capacity_product(counts, cmap.x[: len(counts)]).bit_length() - 1


def _carrier_histogram(errors: Sequence[int], n: int) -> list[int]:
    counts = [0] * (n + 1)
    for e in errors:
        m = abs(int(e))
        if m <= n:
            counts[m] += 1
    return counts


def check_reserved(errors: Sequence[int], cmap: CodingMap):
    lo, hi = cmap.n + 1, cmap.top
    if hi < lo:
        return
    for k, e in enumerate(errors):
        if lo <= abs(int(e)) <= hi:
            raise NonEmptyReservedBins(
                f"error #{k} has magnitude {abs(int(e))} inside the reserved range [{lo}, {hi}]"
            )


def modulate(errors: Sequence[int], cmap: CodingMap, message: MessageBits) -> list[int]:
    """Embed ``message`` into signed prediction errors; returns stego errors.

    Signs are kept; a modulated zero always becomes non-negative.
    """
    check_reserved(errors, cmap)
    hist = _carrier_histogram(errors, cmap.n)
    room = exact_capacity_bits(cmap, hist)
    # an empty message frames to 0 and needs no digits at all
    if message.length and message.framed_length > room:
        raise CapacityExceeded(f"framed message needs {message.framed_length} bits, carriers hold {room}")
    number = frame(message)
    x, y, n = cmap.x, cmap.y, cmap.n
    out = []
    for e in errors:
        e = int(e)
        m = -e if e < 0 else e
        if m > n:
            out.append(e)
            continue
        s = m + y[m]
        base = x[m] + 1
        if base > 1:
            number, digit = divmod(number, base)
            s += digit
        out.append(-s if e < 0 else s)
    assert number == 0
    return out


def demodulate(stego: Sequence[int], cmap: CodingMap) -> tuple[list[int], MessageBits]:
    """Invert ``modulate``: recover the cover errors and the message."""
    x, y = cmap.x, cmap.y
    top = cmap.top
    owner = cmap.owner
    cover = []
    digits = []
    for k, s in enumerate(stego):
        s = int(s)
        m = -s if s < 0 else s
        if m > top:
            cover.append(s)
            continue
        v = owner[m]
        d = m - v - y[v]
        if v == 0 and s < 0:
            raise CorruptStream(f"stego error #{k} is negative but decodes to a zero cover error")
        if x[v]:
            digits.append((d, x[v] + 1))
        cover.append(-v if s < 0 else v)
    number = 0
    for d, base in reversed(digits):
        number = number * base + d
    return cover, unframe(number)
