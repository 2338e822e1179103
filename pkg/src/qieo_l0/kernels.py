"""Population sampling kernels with a compiled fast path.

The compiled extension (``_ckernels``) is used when it was built; otherwise
the numpy twin in ``_pykernels`` is used. Set ``QIEO_L0_KERNELS=python`` to
force the fallback. Both produce identical bits for identical inputs.

Randomness is counter based: draw ``c`` of stream ``s`` under seed ``k`` is a
pure function of ``(k, s, c)``, so any individual's draws can be produced
without touching any other stream.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_impl = _pykernels
BACKEND = "python"
if os.environ.get("QIEO_L0_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass


def backend_module(name: str | None = None):
    """Return the kernel module for ``name`` ("python" / "cython"), or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


class Substream:
    """Sequential view of one counter-based random stream.

    Each call consumes draws from the stream's current position, so
    ``measure`` followed by ``repair`` on the same ``Substream`` matches what
    the population kernels do for that individual.
    """

    def __init__(self, seed: int, stream: int, position: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.position = int(position)

    def raw(self, count: int) -> np.ndarray:
        out = _impl.raw_draws(self.seed, np.array([self.stream]), self.position, count)[0]
        self.position += count
        return out

    def uniform(self, count: int) -> np.ndarray:
        out = _impl.uniform(self.seed, np.array([self.stream]), self.position, count)[0]
        self.position += count
        return out

    def __repr__(self) -> str:
        return f"Substream(seed={self.seed}, stream={self.stream}, position={self.position})"


def one_probabilities(angles: np.ndarray) -> np.ndarray:
    """P(bit = 1) = sin^2(angle); shared by both backends so results agree."""
    s = np.sin(angles)
    return s * s


def measure_population(angles: np.ndarray, seed: int, stream_base: int, backend=None) -> np.ndarray:
    """Collapse every register; row ``j`` uses stream ``stream_base + j``, draws ``0..m-1``."""
    impl = backend_module(backend)
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    return impl.measure(one_probabilities(angles), seed, int(stream_base))


def repair_population(
    bits: np.ndarray, budget: int, seed: int, stream_base: int, offset: int | None = None, backend=None
) -> np.ndarray:
    """Force every row to exactly ``budget`` ones by uniform random drop/add.

    Row ``j`` uses stream ``stream_base + j`` at draws ``offset..offset+m-1``
    (default ``offset = m``, i.e. right after the measurement draws).
    """
    impl = backend_module(backend)
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    m = bits.shape[1]
    if not 0 <= budget <= m:
        raise ValueError(f"budget {budget} outside [0, {m}]")
    return impl.repair(bits, int(budget), seed, int(stream_base), m if offset is None else int(offset))


def rotate_population(
    angles: np.ndarray, observed: np.ndarray, best: np.ndarray, delta: float, lo: float, hi: float, backend=None
) -> np.ndarray:
    impl = backend_module(backend)
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    observed = np.ascontiguousarray(observed, dtype=np.uint8)
    best = np.ascontiguousarray(best, dtype=np.uint8)
    if observed.shape != angles.shape or best.shape != (angles.shape[1],):
        raise ValueError(
            f"shape mismatch: angles {angles.shape}, observed {observed.shape}, best {best.shape}"
        )
    return impl.rotate(angles, observed, best, 0.5 * float(delta), float(lo), float(hi))
