"""Named random substreams derived from one top-level seed.

Every stochastic stage (data generation, measurement noise, weight init,
batch shuffling) draws from its own child of a single ``SeedSequence`` so a
run is reproducible end to end from one integer.
"""

from __future__ import annotations

import numpy as np

_STREAM_IDS = {"generator": 0, "noise": 1, "init": 2, "shuffle": 3}


def substream(seed: int, name: str) -> np.random.Generator:
    """Return the deterministic generator for stream ``name`` under ``seed``."""
    try:
        key = _STREAM_IDS[name]
    except KeyError:
        raise ValueError(
            f"unknown random stream {name!r}; known streams: {sorted(_STREAM_IDS)}"
        ) from None
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))
