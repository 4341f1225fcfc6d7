"""
Counter-based random streams.

A stream is identified by (experiment seed, *key); the same key always yields
the same numbers regardless of which worker process draws them.
"""
import numpy as np


def make_stream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the stream (seed, key...)."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))
