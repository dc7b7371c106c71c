"""Deterministic seed derivation.

Every worker (fold, tree, search sample, stability run) derives its RNG from
the run seed plus its own index, so concurrent and sequential execution give
identical results.
"""

import numpy as np


def derive_seed(base: int, *indices: int) -> int:
    """Stable child seed from a base seed and a path of indices."""
    ss = np.random.SeedSequence([int(base), *[int(i) for i in indices]])
    return int(ss.generate_state(1)[0])


def derive_rng(base: int, *indices: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *indices))
