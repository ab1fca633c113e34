"""Seed handling.

Replicate seeds are derived with the splitmix64 finalizer so that replicate
``s`` of base seed ``b`` is independent of how many replicates are drawn.
Streams come from numpy's PCG64; ``Generator.random`` yields 53-bit uniforms.
"""

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix(base_seed: int, *stream: int) -> int:
    x = splitmix64(int(base_seed) & _MASK)
    for s in stream:
        x = splitmix64(x ^ (int(s) & _MASK))
    return x


def generator(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(mix(seed, *stream))
