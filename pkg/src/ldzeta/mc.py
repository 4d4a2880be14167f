"""Deterministic Monte Carlo plumbing.

Samples are generated in fixed-size blocks. Block ``b`` of stream ``s`` under
seed ``k`` always draws from a Philox generator keyed by ``(k, s)`` with the
counter positioned at ``b``, so the sample with index ``i`` is the same no
matter how many workers run or in which order blocks finish. Results are
concatenated in block order, which makes every downstream reduction
independent of the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from typing import Any, Callable

import numpy as np

BLOCK_SIZE = 4096
_MASK64 = (1 << 64) - 1

# Stream identifiers keep unrelated experiments from sharing random numbers.
STREAM_PHASES = 1
STREAM_GAUSS = 2
STREAM_SURROGATE = 3
STREAM_TAU = 4
STREAM_MGF = 5
STREAM_MISC = 9


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    key = (int(seed) & _MASK64) | ((int(stream) & _MASK64) << 64)
    counter = [0, int(block), 0, 0]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _blocks(n: int, block_size: int) -> list[tuple[int, int]]:
    return [(b, min(block_size, n - b * block_size)) for b in range(math.ceil(n / block_size))]


def _run_one(task):
    fn, seed, stream, block, count, args = task
    return fn(block_rng(seed, stream, block), count, *args)


def run_blocks(
    fn: Callable[..., Any],
    n: int,
    seed: int,
    stream: int,
    args: tuple = (),
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
):
    """Evaluate ``fn(rng, count, *args)`` over all blocks and stitch the output.

    ``fn`` returns either an array whose first axis is the sample axis or a
    dict of such arrays. With ``workers > 1`` blocks are farmed out to a
    process pool; ``fn`` and ``args`` must then be picklable.
    """
    if n <= 0:
        raise ValueError("sample count must be positive")
    tasks = [(fn, seed, stream, b, c, args) for b, c in _blocks(n, block_size)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_one, tasks))
    else:
        parts = [_run_one(t) for t in tasks]
    if isinstance(parts[0], dict):
        return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    return np.concatenate(parts)


@dataclass(frozen=True)
class TailEstimate:
    hits: int
    n: int
    p_hat: float
    std_err: float
    prediction: float | None = None
    ratio: float | None = None
    label: str = ""
    surrogate: bool = False

    @classmethod
    def from_indicator(cls, indicator: np.ndarray, prediction: float | None = None,
                       label: str = "", surrogate: bool = False) -> "TailEstimate":
        n = int(indicator.size)
        hits = int(np.count_nonzero(indicator))
        p = hits / n
        se = math.sqrt(p * (1.0 - p) / n)
        ratio = p / prediction if prediction else None
        return cls(hits, n, p, se, prediction, ratio, label, surrogate)

    def to_dict(self) -> dict:
        return asdict(self)


def mean_and_se(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error, summed with ``math.fsum``."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    mean = math.fsum(v) / n
    var = math.fsum((v - mean) ** 2) / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var / n)
