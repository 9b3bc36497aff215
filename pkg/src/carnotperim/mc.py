"""Monte-Carlo plumbing: deterministic substreams, estimates, batched maps.

Every stochastic routine in the package draws from a generator keyed by
(seed, *integer key path).  Results are therefore bit-identical for a given
seed regardless of worker count or scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

BATCH = 1 << 16


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the given (seed, key...) coordinates."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Estimate:
    """A Monte-Carlo point estimate with its standard error."""

    value: float
    stderr: float
    n_samples: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")

    def as_dict(self):
        return {
            "value": self.value,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


def joint_stderr(*estimates) -> float:
    return math.hypot(*[e.stderr for e in estimates])


def batch_sizes(n_samples: int, batch: int = BATCH):
    n = int(n_samples)
    sizes = [batch] * (n // batch)
    if n % batch:
        sizes.append(n % batch)
    return sizes


def ordered_map(fn, args_list, workers: int = 1):
    """Map fn over args_list preserving order; optional thread pool."""
    if workers <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(fn, args_list))


def mean_estimate(weight_sums, volume: float, seed: int) -> Estimate:
    """Combine per-batch (sum w, sum w^2, count) triples into an Estimate.

    The estimated integral is volume * mean(w); batches are reduced in a
    fixed order so the result does not depend on scheduling.
    """
    sw = 0.0
    sw2 = 0.0
    n = 0
    for bw, bw2, bn in weight_sums:
        sw += bw
        sw2 += bw2
        n += bn
    if n == 0:
        return Estimate(0.0, 0.0, 0, seed)
    mean = sw / n
    if n > 1:
        var = max(sw2 - sw * sw / n, 0.0) / (n - 1)
        se = volume * math.sqrt(var / n)
    else:
        se = 0.0
    return Estimate(volume * mean, se, n, seed)
