"""Dense float32 tensors and seeded random streams.

Tensors are plain numpy float32 arrays; this module owns shape validation,
the elementwise/linear operations the rest of the toolkit uses, and the
explicitly-seeded RNG streams that make multi-run experiments replayable.
"""

from __future__ import annotations

import os

import numpy as np

DTYPE = np.float32

MAX_RANK = 5
MAX_ELEMENTS = 2**40

# Debug-mode finiteness checking; enabled via env var or set_debug_checks().
_DEBUG_CHECKS = bool(os.environ.get("PCB3DCNN_DEBUG"))


def set_debug_checks(enabled: bool) -> None:
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = enabled


class ShapeError(ValueError):
    pass


def validate_shape(shape) -> tuple[int, ...]:
    """Check a shape is rank 1..5 with positive extents and a sane element count."""
    dims = tuple(int(d) for d in shape)
    if not 1 <= len(dims) <= MAX_RANK:
        raise ShapeError(f"rank must be 1..{MAX_RANK}, got {len(dims)}")
    if any(d < 1 for d in dims):
        raise ShapeError(f"all extents must be >= 1, got {dims}")
    count = 1
    for d in dims:
        count *= d
        if count > MAX_ELEMENTS:
            raise ShapeError(f"element count overflow for shape {dims}")
    return dims


def _check_finite(x: np.ndarray) -> np.ndarray:
    if _DEBUG_CHECKS and not np.all(np.isfinite(x)):
        raise FloatingPointError("non-finite values in tensor")
    return x


def zeros(shape) -> np.ndarray:
    return np.zeros(validate_shape(shape), dtype=DTYPE)


def ones(shape) -> np.ndarray:
    return np.ones(validate_shape(shape), dtype=DTYPE)


def tensor(data) -> np.ndarray:
    out = np.asarray(data, dtype=DTYPE)
    validate_shape(out.shape)
    return out


def reshape(x: np.ndarray, shape) -> np.ndarray:
    dims = validate_shape(shape)
    if int(np.prod(dims)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} ({x.size} elems) to {dims}")
    return x.reshape(dims)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions mismatch: {a.shape} x {b.shape}")
    return _check_finite(np.matmul(a, b, dtype=DTYPE))


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return _check_finite((a + b).astype(DTYPE, copy=False))


def scale(a: np.ndarray, c: float) -> np.ndarray:
    return _check_finite((a * DTYPE(c)).astype(DTYPE, copy=False))


def emap(a: np.ndarray, fn) -> np.ndarray:
    """Elementwise map; fn must accept and return numpy arrays."""
    return _check_finite(np.asarray(fn(a), dtype=DTYPE).reshape(a.shape))


def random_uniform(shape, lo: float, hi: float, rng: "RngStream") -> np.ndarray:
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    dims = validate_shape(shape)
    return rng.generator.uniform(lo, hi, size=dims).astype(DTYPE)


class RngStream:
    """Counter-based (Philox) random stream with splittable substreams.

    A stream is identified by its 64-bit seed plus an integer path; the same
    (seed, path) produces the same sequence on every platform.  Substreams
    derived through different paths are statistically independent, so
    parallel experiment runs stay deterministic.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def substream(self, *path: int) -> "RngStream":
        """Fresh stream derived from this one; never advances self."""
        return RngStream(self.seed, self.path + tuple(path))

    def uniform(self, shape, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        return random_uniform(shape, lo, hi, self)

    def integers(self, lo: int, hi: int, size=None):
        return self.generator.integers(lo, hi, size=size)

    def shuffle(self, seq: list) -> None:
        self.generator.shuffle(seq)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"
