"""Seeded randomness: block selection and without-replacement fiber draws.

A counter-based bit generator (Philox) backs every stream, so a run is
reproducible bit-for-bit from its 64-bit seed, and derived streams (data
generation, held-out evaluation sets) never perturb the solver's draws.
"""

import numpy as np


def fresh_seed():
    """A 64-bit seed from system entropy."""
    return int(np.random.SeedSequence().entropy) & (2**64 - 1)


def derived_generator(seed, stream):
    """An independent Generator for side streams (stream 0 = the main one)."""
    return np.random.Generator(np.random.Philox(key=int(seed)).jumped(stream))


def floyd_sample(gen, j_n, batch):
    """Uniform size-``batch`` subset of {1, ..., j_n}, sorted.

    Floyd's algorithm: O(batch) memory, no full permutation of j_n.  The
    bounded draws come from one block of float64 uniforms (bias 2^-53).
    """
    j_n = int(j_n)
    batch = int(batch)
    if not 1 <= batch <= j_n:
        raise ValueError(f"batch size {batch} outside [1, {j_n}]")
    highs = np.arange(j_n - batch + 1, j_n + 1, dtype=np.int64)
    draws = 1 + (gen.random(batch) * highs).astype(np.int64)
    chosen = set()
    for j, t in zip(highs.tolist(), draws.tolist()):
        chosen.add(j if t in chosen else t)
    return np.fromiter(sorted(chosen), dtype=np.int64, count=batch)


class SamplerState:
    """Owns the solver's random stream; calls advance it in order."""

    def __init__(self, seed=None):
        self.seed = fresh_seed() if seed is None else int(seed)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def sample_block(self, n_modes):
        """Uniform mode index in {1, ..., N}."""
        if n_modes < 2:
            raise ValueError(f"need at least 2 modes, got {n_modes}")
        return int(self._gen.random() * n_modes) + 1

    def sample_fibers(self, j_n, batch):
        """Uniform without-replacement fiber batch from {1, ..., j_n}."""
        return floyd_sample(self._gen, j_n, batch)
