"""
Counter-based random streams.

Every random decision in the toolkit is drawn from an `RngStream`, a numpy
`Generator` over the Philox counter-based bit generator whose 128-bit key is
derived from (master_seed, stream_id) with SplitMix64 mixing.  Children are
addressed by integers, so sample `i` of a split always sees the same stream
no matter which thread or in what order it is generated.
"""
import enum

import numpy as np

MASK64 = (1 << 64) - 1


class StreamId(enum.IntEnum):
    TRAIN = 1
    VAL = 2
    TEST = 3
    SENS_MATCHED = 11
    SENS_FREE = 12
    HYBRID = 21
    SPRITES = 31
    PATTERNS = 32
    BACKGROUNDS = 33
    SYNTHETIC_BASE = 34
    SPLIT = 41
    NESTED = 42
    AUGMENT = 51
    KERNEL_NOISE = 61
    KERNEL_ELASTIC = 62


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(*words):
    h = 0
    for w in words:
        h = splitmix64(h ^ (int(w) & MASK64))
    return h


class RngStream(object):
    def __init__(self, master_seed, stream_id=0):
        self.master_seed = int(master_seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        key = np.array([mix(self.master_seed, self.stream_id, 0),
                        mix(self.master_seed, self.stream_id, 1)], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return 'RngStream(master_seed={}, stream_id={}, counter={})'.format(
            self.master_seed, self.stream_id, self.counter)

    @property
    def counter(self):
        """Low word of the Philox block counter; advances with every draw."""
        return int(self._gen.bit_generator.state['state']['counter'][0])

    @property
    def generator(self):
        return self._gen

    def child(self, *ids):
        return RngStream(self.master_seed, mix(self.stream_id, *ids))

    @classmethod
    def for_sample(cls, seed, stream, index):
        return cls(seed, mix(int(stream), index))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def bernoulli(self, p=0.5):
        return bool(self._gen.random() < p)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, n, size, replace=False):
        return self._gen.choice(n, size=size, replace=replace)

    def seed_word(self):
        """A fresh 63-bit integer, used to key kernel-internal streams."""
        return int(self._gen.integers(0, 1 << 63))
