"""Pure numpy implementation of the population kernels.

Every function here has a twin in ``_ckernels.pyx`` and the two must agree
bit for bit; ``tests/test_kernels.py`` enforces this.
"""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_INV53 = 1.0 / (1 << 53)
_DROP_SENTINEL = np.uint64(1 << 62)


def _fmix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def stream_keys(seed, streams):
    """Per-stream 64-bit keys for ``streams`` (int array) under ``seed``."""
    s = np.asarray(streams, dtype=np.int64).astype(np.uint64)
    seed_arr = np.full(s.shape, int(seed) & _MASK64, dtype=np.uint64)
    return _fmix(seed_arr ^ _fmix(s + GOLDEN))


def raw_draws(seed, streams, offset, count):
    """53-bit integer draws, shape ``(len(streams), count)``."""
    keys = stream_keys(seed, streams)[:, None]
    ctr = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)[None, :]
    return _fmix(keys + ctr * GOLDEN) >> np.uint64(11)


def uniform(seed, streams, offset, count):
    return raw_draws(seed, streams, offset, count).astype(np.float64) * _INV53


def measure(probs, seed, stream_base):
    pop, m = probs.shape
    streams = np.arange(stream_base, stream_base + pop, dtype=np.int64)
    u = uniform(seed, streams, 0, m)
    return (u < probs).astype(np.uint8)


def repair(bits, budget, seed, stream_base, offset):
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    pop, m = bits.shape
    counts = bits.sum(axis=1, dtype=np.int64)
    out = bits.copy()
    todo = np.flatnonzero(counts != budget)
    if todo.size == 0:
        return out
    streams = np.arange(stream_base, stream_base + pop, dtype=np.int64)[todo]
    keys = raw_draws(seed, streams, offset, m)
    sub = bits[todo].astype(bool)
    dropping = (counts[todo] > budget)[:, None]
    # Drop rows keep the `budget` ones with the smallest keys; add rows keep
    # every one plus the smallest-key zeros. Both are a stable sort prefix.
    priority = np.where(
        dropping,
        np.where(sub, keys, _DROP_SENTINEL),
        np.where(sub, np.uint64(0), keys + np.uint64(1)),
    )
    order = np.argsort(priority, axis=1, kind="stable")[:, :budget]
    fixed = np.zeros((todo.size, m), dtype=np.uint8)
    np.put_along_axis(fixed, order, 1, axis=1)
    out[todo] = fixed
    return out


def rotate(angles, observed, best, half_delta, lo, hi):
    move = observed != best[None, :]
    step = np.where(best.astype(bool), half_delta, -half_delta)[None, :]
    moved = np.minimum(np.maximum(angles + step, lo), hi)
    return np.where(move, moved, angles)
