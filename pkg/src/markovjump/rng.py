"""Deterministic RNG stream derivation.

Every stochastic routine takes a ``numpy.random.Generator``.  Ensemble
runs derive one independent stream per path from the master seed with

    SeedSequence([master_seed, domain, eps_index, path_index])

so results are reproducible bit-for-bit, independent of execution order
or worker count.  ``domain`` separates the major consumers; the codes
below are part of the on-disk reproducibility contract and must not be
renumbered.
"""

from __future__ import annotations

import numpy as np

# Stream domains (stable, see module docstring).
DOMAIN_PRELIMIT = 0
DOMAIN_LIMIT = 1
DOMAIN_COMPOUND = 2
DOMAIN_SWITCH = 3
DOMAIN_BOOTSTRAP = 4


def derive_rng(seed: int, domain: int, eps_index: int = 0, path_index: int = 0) -> np.random.Generator:
    """Return the stream for (seed, domain, eps_index, path_index)."""
    ss = np.random.SeedSequence([int(seed), int(domain), int(eps_index), int(path_index)])
    return np.random.default_rng(ss)
