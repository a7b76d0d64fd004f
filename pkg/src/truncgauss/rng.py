"""Seeded uniform streams.

A :class:`RandomStream` owns one ``numpy.random.Generator`` backed by PCG64.
Kernels receive ``stream.gen`` directly (numba understands Generator
objects).  Child streams for parallel work come from ``SeedSequence.spawn``,
so task ``k`` of a run always sees the same numbers whatever the worker
count.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from numba.np.random.generator_core import next_uint64

ALGORITHM = "PCG64"

_TWO53 = 9007199254740992.0
_TWO32 = 4294967296


@njit(cache=True)
def raw64_k(gen):
    """Next raw 64-bit output of the underlying bit generator."""
    return next_uint64(gen.bit_generator)


@njit(cache=True)
def uniform_k(gen):
    return gen.random()


@njit(cache=True)
def uniform_pos_k(gen):
    """Uniform on (0, 1]."""
    return 1.0 - gen.random()


@njit(cache=True)
def lemire_threshold(r):
    """Rejection threshold 2^32 mod r for a range of size r."""
    return (_TWO32 - r) % r


@njit(cache=True)
def randint_k(gen, lo, hi):
    """Exactly uniform integer on [lo, hi] (Lemire multiply-and-reject).

    The top 32 of the 53 random bits carried by ``gen.random()`` feed the
    multiply; products whose low word falls below 2^32 mod r are redrawn.
    """
    r = hi - lo + 1
    if r == 1:
        return lo
    thresh = -1
    while True:
        m = (int(gen.random() * _TWO53) >> 21) * r
        low = m & (_TWO32 - 1)
        if low < r:
            if thresh < 0:
                thresh = lemire_threshold(r)
            if low < thresh:
                continue
        return lo + (m >> 32)


@njit(cache=True)
def exponential_k(gen, rate):
    return -math.log(1.0 - gen.random()) / rate


@njit(cache=True)
def normal_k(gen):
    return gen.standard_normal()


class RandomStream:
    """Single-owner uniform stream with a recorded 64-bit seed."""

    def __init__(self, seed: int = 0):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self._ss = np.random.SeedSequence(seed)
        self.gen = np.random.Generator(np.random.PCG64(self._ss))

    @classmethod
    def _from_seedseq(cls, ss: np.random.SeedSequence, seed: int) -> "RandomStream":
        obj = cls.__new__(cls)
        obj.seed = seed
        obj._ss = ss
        obj.gen = np.random.Generator(np.random.PCG64(ss))
        return obj

    def spawn(self, n: int) -> list["RandomStream"]:
        """Independent child streams; child k is fixed by (seed, k)."""
        kids = np.random.SeedSequence(self.seed).spawn(n)
        return [RandomStream._from_seedseq(ss, self.seed) for ss in kids]

    def uniform(self) -> float:
        return uniform_k(self.gen)

    def uniform_int(self, lo: int, hi: int) -> int:
        if lo > hi:
            raise ValueError("uniform_int: lo > hi")
        if hi - lo >= 2**32:
            raise ValueError("uniform_int: range wider than 2^32")
        return randint_k(self.gen, int(lo), int(hi))

    def exponential(self, rate: float) -> float:
        if not rate > 0.0:
            raise ValueError("exponential: rate must be positive")
        return exponential_k(self.gen, float(rate))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, algorithm={ALGORITHM})"


def uniform(stream: RandomStream) -> float:
    return stream.uniform()


def uniform_int(stream: RandomStream, lo: int, hi: int) -> int:
    return stream.uniform_int(lo, hi)


def exponential(stream: RandomStream, rate: float) -> float:
    return stream.exponential(rate)


def exponential_from_uniform(u: float, rate: float) -> float:
    """Inversion map used by :func:`exponential`; ``u`` in [0, 1)."""
    return -math.log1p(-u) / rate
