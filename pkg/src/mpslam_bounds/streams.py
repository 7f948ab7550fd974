"""Reproducible per-run random number streams.

Every Monte-Carlo run draws from its own counter-based Philox (4x64)
generator keyed directly by the 128-bit pair ``(seed, stream_index)``: the
scenario seed selects the experiment, the stream index the run. Keyed
streams are statistically independent and the mapping is pure arithmetic,
so the same (seed, run) pair reproduces the same draws on every platform
and regardless of how many runs execute or in which order.

Normal variates are produced by the Box-Muller transform applied to the
generator's uniform doubles (u1 in (0, 1], u2 in [0, 1)):

    radius = sqrt(-2 ln u1)
    z0 = radius * cos(2 pi u2),   z1 = radius * sin(2 pi u2)

with the second variate cached for the next request. The transform is fixed
here rather than delegated to library distribution code so that the exact
draw sequence is part of this package's contract.

Stream index 2^64 - 1 is reserved for sampling ground-truth trajectories;
run indices must stay below it.
"""

from __future__ import annotations

import math

import numpy as np

# Reserved stream for ground-truth trajectory sampling (never a run index).
GROUND_TRUTH_STREAM = 2**64 - 1

_MAX_UINT64 = 2**64 - 1


class RandomStream:
    """Counter-based stream of uniforms and Box-Muller normal variates."""

    def __init__(self, seed: int, stream_index: int):
        for name, value in (("seed", seed), ("stream index", stream_index)):
            if not 0 <= int(value) <= _MAX_UINT64:
                raise ValueError(f"{name} must fit in 64 bits, got {value}")
        self.seed = int(seed)
        self.stream_index = int(stream_index)
        key = np.array([self.seed, self.stream_index], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self._spare: float | None = None

    def uniform(self, size: int | None = None):
        """Uniform doubles in [0, 1) straight from the bit generator."""
        return self._gen.random(size)

    def standard_normal(self, size: int | None = None):
        """Standard normal draws; scalar for ``size=None``, else a 1-D array."""
        if size is None:
            return self._next_normal()
        out = np.empty(size)
        for i in range(size):
            out[i] = self._next_normal()
        return out

    def normal(self, mean: float, std: float) -> float:
        return mean + std * self._next_normal()

    def _next_normal(self) -> float:
        if self._spare is not None:
            value, self._spare = self._spare, None
            return value
        u1 = 1.0 - self._gen.random()  # in (0, 1]: keeps the log finite
        u2 = self._gen.random()
        radius = math.sqrt(-2.0 * math.log(u1))
        angle = 2.0 * math.pi * u2
        self._spare = radius * math.sin(angle)
        return radius * math.cos(angle)


def derive_run_stream(seed: int, run_index: int) -> RandomStream:
    """Independent, reproducible stream for Monte-Carlo run ``run_index``."""
    if not 0 <= int(run_index) < GROUND_TRUTH_STREAM:
        raise ValueError(
            f"run index must be in [0, {GROUND_TRUTH_STREAM}), got {run_index}"
        )
    return RandomStream(seed, run_index)


def trajectory_stream(seed: int) -> RandomStream:
    """Stream reserved for sampling the ground-truth trajectory."""
    return RandomStream(seed, GROUND_TRUTH_STREAM)
