"""Seeded, schedule-independent sampling.

Samples are produced in fixed-size blocks.  Block ``b`` draws from
``np.random.default_rng([seed, stream, b])``.  Its contents therefore depend
only on the configuration and never on how many workers evaluate the blocks.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lie_core import GradedLieAlgebra, bch_product, dilation

BLOCK = 4096
SHAPES = ("box", "logradial")
PAIR_MODES = ("uniform", "unit", "near")


def worker_count() -> int:
    raw = os.environ.get("NILMETRY_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_blocks(fn, n_blocks: int, workers: int | None = None) -> list:
    """Evaluate ``fn(b)`` for every block index, returning results in block order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or n_blocks <= 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_blocks)))


@dataclass(frozen=True)
class SamplerConfig:
    """How points and pairs are drawn.

    ``shape="box"`` draws coordinates uniformly from ``[-radius, radius]``.
    ``shape="logradial"`` draws a box point of radius 1 and dilates it by a
    factor log-uniform in ``[r_min, r_max]``, so homogeneous scales spread
    across many decades.
    """

    seed: int
    shape: str = "box"
    radius: float = 10.0
    r_min: float = 1e-3
    r_max: float = 1e3
    pair_mode: str = "uniform"
    count: int = 10_000

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown sampler shape {self.shape!r}")
        if self.pair_mode not in PAIR_MODES:
            raise ValueError(f"unknown pair mode {self.pair_mode!r}")
        if self.count < 1:
            raise ValueError("sample count must be at least 1")
        if self.radius <= 0 or not 0 < self.r_min < self.r_max:
            raise ValueError("sampler radii must be positive and ordered")

    def rng(self, stream: int, block: int) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), stream, block])

    def blocks(self, count: int | None = None) -> list:
        count = self.count if count is None else count
        sizes = [BLOCK] * (count // BLOCK)
        if count % BLOCK:
            sizes.append(count % BLOCK)
        return sizes

    def draw(self, alg: GradedLieAlgebra, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.shape == "box":
            return rng.uniform(-self.radius, self.radius, size=(n, alg.dim))
        unit = rng.uniform(-1.0, 1.0, size=(n, alg.dim))
        scale = np.exp(rng.uniform(np.log(self.r_min), np.log(self.r_max), size=n))
        return dilation(alg, scale, unit)

    def points(self, alg: GradedLieAlgebra, count: int | None = None, stream: int = 0) -> np.ndarray:
        sizes = self.blocks(count)
        parts = map_blocks(lambda b: self.draw(alg, self.rng(stream, b), sizes[b]), len(sizes))
        return np.concatenate(parts, axis=0)

    def pairs(self, alg: GradedLieAlgebra, count: int | None = None, stream: int = 1,
              gauge=None) -> tuple:
        """Return ``(x, y)`` arrays.

        ``unit`` and ``near`` modes build ``y = x * w`` with ``w`` rescaled by a
        dilation so that ``gauge(w)`` is 1, or uniform in (0, 1] respectively.
        ``gauge`` defaults to the homogeneous norm.
        """
        if gauge is None:
            from .metrics import HomogeneousGauge
            gauge = HomogeneousGauge(alg).norm
        sizes = self.blocks(count)

        def block(b):
            rng = self.rng(stream, b)
            n = sizes[b]
            x = self.draw(alg, rng, n)
            if self.pair_mode == "uniform":
                return x, self.draw(alg, rng, n)
            w = rng.uniform(-1.0, 1.0, size=(n, alg.dim))
            size = gauge(w)
            size = np.where(size > 0, size, 1.0)
            target = np.ones(n) if self.pair_mode == "unit" else rng.uniform(0.0, 1.0, size=n)
            target = np.where(target > 0, target, 1.0)
            w = dilation(alg, target / size, w)
            return x, bch_product(alg, x, w)

        parts = map_blocks(block, len(sizes))
        return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
