"""Counter-based Gaussian streams.

Every standard normal is a pure function of ``(seed, stream, index,
component)``: the Philox-4x64 key is ``(seed, stream)`` and sample ``i`` owns
the counter blocks ``[i * b, (i + 1) * b)`` with ``b = ceil(dim / 4)``.
Component ``j`` of sample ``i`` is the ``j``-th 64-bit word of that range,
mapped through the inverse normal CDF. Any chunking of the index range
therefore reproduces the same numbers bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_CHUNK = 1 << 16


def _key(seed: int, stream: int) -> int:
    return (int(seed) & _MASK64) | ((int(stream) & _MASK64) << 64)


def _block(seed: int, stream: int, start: int, count: int, dim: int) -> np.ndarray:
    blocks = -(-dim // 4)
    bg = np.random.Philox(key=_key(seed, stream), counter=start * blocks)
    raw = bg.random_raw(count * blocks * 4).reshape(count, blocks * 4)[:, :dim]
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53
    return ndtri(u)


def standard_normals(seed: int, stream: int, start: int, count: int, dim: int,
                     workers: int = 1) -> np.ndarray:
    """Standard normals for sample indices ``start .. start+count-1``, shape ``(count, dim)``."""
    if count <= 0:
        return np.empty((0, dim))
    starts = list(range(start, start + count, _CHUNK))
    sizes = [min(_CHUNK, start + count - s) for s in starts]
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _block(seed, stream, a[0], a[1], dim), zip(starts, sizes)))
    else:
        parts = [_block(seed, stream, s, c, dim) for s, c in zip(starts, sizes)]
    return np.concatenate(parts, axis=0)


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """A numpy Generator on the same keyed Philox family, for auxiliary checks."""
    return np.random.Generator(np.random.Philox(key=_key(seed, stream)))
