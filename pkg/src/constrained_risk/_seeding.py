"""Counter-based child seeds.

Block ``b`` of a computation seeded with ``seed`` draws from
``SeedSequence(seed, spawn_key=(b,))``. Streams depend only on
(seed, block index), never on scheduling or worker count.
"""

import numpy as np

BLOCK = 1 << 16


def block_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))


def block_sizes(total, size=BLOCK):
    full, rest = divmod(int(total), size)
    return [size] * full + ([rest] if rest else [])


class RunningMoments:
    """Mean/variance accumulated block by block (Chan et al. pairwise update)."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, values):
        values = np.asarray(values, dtype=float)
        nb = values.size
        if nb == 0:
            return
        mb = float(np.mean(values))
        m2b = float(np.sum((values - mb) ** 2))
        n = self.count + nb
        delta = mb - self.mean
        self.mean += delta * nb / n
        self.m2 += m2b + delta * delta * self.count * nb / n
        self.count = n

    @property
    def std(self):
        return (self.m2 / (self.count - 1)) ** 0.5 if self.count > 1 else 0.0

    @property
    def std_error(self):
        return self.std / self.count ** 0.5 if self.count else float("nan")


def cell_seed(seed, index):
    """Integer seed for an independent experiment cell."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
