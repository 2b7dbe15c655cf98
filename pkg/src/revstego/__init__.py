"""Optimal reversible steganographic codings from prediction-error histograms."""
from .brute import brute_force_optimize, naive_grid_optimize
from .codec import MessageBits, build_coding_map, demodulate, modulate
from .imaging import ImageGrid, decode, encode
from .milp import iterate_optimize
from .model import AbsErrorHistogram, ProblemSpec, capacity, distortion, evaluate

__all__ = [
    "AbsErrorHistogram",
    "ImageGrid",
    "MessageBits",
    "ProblemSpec",
    "brute_force_optimize",
    "build_coding_map",
    "capacity",
    "decode",
    "demodulate",
    "distortion",
    "encode",
    "evaluate",
    "iterate_optimize",
    "modulate",
    "naive_grid_optimize",
]
__version__ = "0.1.0"
