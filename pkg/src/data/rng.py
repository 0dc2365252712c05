"""
Named deterministic random streams.
"""

import zlib

import numpy as np


class Rng:
    """
    Random stream identified by (seed, purpose, index).

    The same triple always yields the same sequence; different purposes or
    indices give independent streams.
    """

    def __init__(self, seed: int, purpose: str, index: int = 0):
        self.seed = int(seed)
        self.purpose = purpose
        self.index = int(index)
        entropy = [self.seed, zlib.crc32(purpose.encode("utf-8")), self.index]
        self.generator = np.random.default_rng(np.random.SeedSequence(entropy))

    def child(self, purpose: str, index: int = 0) -> "Rng":
        return Rng(self.seed, f"{self.purpose}/{purpose}", index)

    def __getattr__(self, name):
        if name == "generator":
            raise AttributeError(name)
        return getattr(self.generator, name)

    def __repr__(self):
        return f"Rng(seed={self.seed}, purpose={self.purpose!r}, index={self.index})"
