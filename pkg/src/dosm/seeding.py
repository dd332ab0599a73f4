"""Named random streams derived from one master seed.

``Streams(seed).rng("engine.node.3")`` always yields the same generator
state for the same ``(seed, name)`` pair, independently of which other
streams were requested and in what order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name):
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


class Streams:
    def __init__(self, seed):
        self.seed = int(seed)

    def seq(self, name):
        return np.random.SeedSequence(self.seed, spawn_key=_name_key(name))

    def rng(self, name):
        return np.random.default_rng(self.seq(name))

    def node_rngs(self, prefix, n):
        return [self.rng(f"{prefix}.node.{i}") for i in range(n)]

    def int_seed(self, name):
        """A 63-bit integer seed for APIs that take plain ints."""
        return int(self.seq(name).generate_state(2, np.uint32).view(np.uint64)[0] >> np.uint64(1))
