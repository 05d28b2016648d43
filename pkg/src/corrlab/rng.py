"""Counter-based random streams.

Every block of variates is addressed by ``(seed, stream, chunk)``: the Philox
key is ``(seed, stream)`` and the chunk index occupies the top counter word,
so blocks never overlap and can be generated in any order or in parallel.
Normals come from inverse-CDF transformation of open-interval uniforms.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator

import numpy as np
from scipy.special import ndtri

CHUNK = 1 << 16


def _philox(seed: int, stream: int, chunk: int) -> np.random.Philox:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    counter = np.array([0, 0, 0, chunk], dtype=np.uint64)
    return np.random.Philox(key=key, counter=counter)


def uniform_block(seed: int, stream: int, chunk: int, shape) -> np.ndarray:
    """Uniforms in the open interval (0, 1)."""
    size = int(np.prod(shape))
    raw = _philox(seed, stream, chunk).random_raw(size)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return u.reshape(shape)


def normal_block(seed: int, stream: int, chunk: int, shape) -> np.ndarray:
    return ndtri(uniform_block(seed, stream, chunk, shape))


def chunk_sizes(samples: int, chunk: int = CHUNK) -> list[int]:
    full, rest = divmod(int(samples), chunk)
    return [chunk] * full + ([rest] if rest else [])


def iter_normal_chunks(seed: int, stream: int, samples: int, dim: int,
                       chunk: int = CHUNK) -> Iterator[np.ndarray]:
    for c, size in enumerate(chunk_sizes(samples, chunk)):
        yield normal_block(seed, stream, c, (size, dim))


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("CORRLAB_THREADS", "1")))
    except ValueError:
        return 1


def map_chunks(fn: Callable[[int, int], object], samples: int,
               threads: int | None = None, chunk: int = CHUNK) -> list:
    """``[fn(chunk_index, chunk_size)]`` in chunk order.

    Results are returned (and therefore reduced by callers) in chunk order,
    so the outcome does not depend on ``threads``.
    """
    sizes = chunk_sizes(samples, chunk)
    threads = default_threads() if threads is None else max(1, threads)
    if threads == 1 or len(sizes) == 1:
        return [fn(c, s) for c, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))
