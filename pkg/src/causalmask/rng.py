"""Seed-stream derivation.

Every random draw in the package comes from a Philox generator keyed by the
user seed plus a tuple of small integers naming the consumer (a graph node,
a trajectory index, a training run). Streams for different keys are
independent and do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import numpy as np

# namespace tags for spawn keys
NODE = 1
TRAJECTORY = 2
TRIAL = 3
TRAIN = 4
EVAL = 5
FIXTURE = 6
MIXING = 7


def stream(seed, *key):
    """Return an independent generator for ``(seed, *key)``."""
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                 spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def child_seed(seed, *key):
    """Derive a 64-bit integer seed for a sub-experiment."""
    return int(stream(seed, *key).integers(0, 2**63, dtype=np.int64))


def counter_words(seed, key, n):
    """Four 64-bit words per sample index from a counter-based Philox stream.

    Row ``i`` depends only on ``(seed, key, i)``: the generator is keyed by
    ``(seed, key)`` and its counter equals the sample index. Drawing more
    samples therefore never changes earlier rows.
    """
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                 spawn_key=tuple(int(k) for k in key))
    bg = np.random.Philox(key=seq.generate_state(2, np.uint64), counter=0)
    return bg.random_raw(4 * int(n)).reshape(int(n), 4)


def _open_unit(words):
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def counter_uniform(seed, key, n):
    """Uniform draws on the open interval (0, 1), one per sample index."""
    return _open_unit(counter_words(seed, key, n)[:, 0])


def counter_normal(seed, key, n):
    """Standard normal draws (Box-Muller), one per sample index."""
    w = counter_words(seed, key, n)
    u1 = _open_unit(w[:, 0])
    u2 = _open_unit(w[:, 1])
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
