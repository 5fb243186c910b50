"""Deterministic stream derivation.

Every trial gets its own seed ``mix(master_seed, trial_index)``; inside a
trial, independent streams for traffic, chunk selection and coding
coefficients are split off with further ``mix`` calls.  ``mix`` is the
SplitMix64 finalizer applied to ``seed + golden * (index + 1)``.
"""

from __future__ import annotations

import random

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# stream labels inside a trial
TRAFFIC = 1
CHUNKS = 2
COEFFS = 3
PRECODE = 4
MESSAGES = 5


def splitmix64(x: int) -> int:
    x = (x + GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix(seed: int, index: int) -> int:
    """64-bit seed for stream ``index`` under ``seed``."""
    return splitmix64((seed & MASK64) ^ splitmix64((GOLDEN * (index + 1)) & MASK64))


def stream(seed: int, *labels: int) -> random.Random:
    s = seed & MASK64
    for label in labels:
        s = mix(s, label)
    return random.Random(s)


def np_stream(seed: int, *labels: int) -> np.random.Generator:
    s = seed & MASK64
    for label in labels:
        s = mix(s, label)
    return np.random.Generator(np.random.PCG64(s))
