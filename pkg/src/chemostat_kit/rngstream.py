"""Deterministic per-replicate random streams.

Each replicate draws from an independent xoshiro256++ stream whose state is
derived from ``(root_seed, replicate_index)`` through numpy's SeedSequence,
so results are reproducible regardless of worker count or scheduling.

The pure-Python implementation below is the reference; the event engine
carries a bit-identical compiled copy (see _fast_engine).
"""
from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
TWO_PI = 2.0 * math.pi
_INV_2_53 = 2.0 ** -53


def derive_state(root_seed: int, replicate: int = 0) -> np.ndarray:
    """Four nonzero uint64 words for the xoshiro256++ state of one replicate."""
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(int(replicate),))
    state = ss.generate_state(4, np.uint64)
    if not state.any():    # astronomically unlikely; xoshiro forbids all-zero
        state[0] = np.uint64(1)
    return state


class Xoshiro256pp:
    """xoshiro256++ with the uniform/normal/gamma/beta chain used by the IBM.

    Consumption is strictly sequential, so a run's draw sequence is a pure
    function of the initial state.
    """

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, state):
        s = [int(x) & _MASK64 for x in state]
        if not any(s):
            s[0] = 1
        self.s0, self.s1, self.s2, self.s3 = s

    def state(self) -> np.ndarray:
        return np.array([self.s0, self.s1, self.s2, self.s3], dtype=np.uint64)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        tmp = (s0 + s3) & _MASK64
        result = (((tmp << 23) | (tmp >> 41)) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def normal(self) -> float:
        """Standard normal via Box-Muller (cosine branch, no caching)."""
        u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        return r * math.cos(TWO_PI * u2)

    def gamma(self, shape: float) -> float:
        """Marsaglia-Tsang accept-reject gamma for shape >= 1."""
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            x = self.normal()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.uniform()
            if u < 1.0 - 0.0331 * x * x * x * x:
                return d * v
            if u <= 0.0:
                return d * v
            if math.log(u) < 0.5 * x * x + d - d * v + d * math.log(v):
                return d * v

    def beta_symmetric(self, p_beta: float) -> float:
        """Symmetric beta draw as a ratio of two gammas, strictly in (0, 1)."""
        while True:
            g1 = self.gamma(p_beta)
            g2 = self.gamma(p_beta)
            tot = g1 + g2
            if tot > 0.0:
                a = g1 / tot
                if 0.0 < a < 1.0:
                    return a
