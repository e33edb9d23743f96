"""Input validation and RNG plumbing shared across the package."""

from __future__ import annotations

import numpy as np

from .measures import GroupedDataset

__all__ = ["as_rng", "rng_stream", "as_grouped"]


def as_rng(seed) -> np.random.Generator:
    """Accept None, an int seed, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def rng_stream(seed, *path: int) -> np.random.Generator:
    """Named, counter-based RNG stream.

    The stream identity is (seed, path): a Philox generator keyed by a
    SeedSequence with ``spawn_key=path``. Distinct paths give statistically
    independent streams, so per-group generation can run in parallel while
    staying bit-reproducible.
    """
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(seq))


def as_grouped(X) -> GroupedDataset:
    """Coerce estimator input to a GroupedDataset.

    Accepts a GroupedDataset, or any sequence of (n_j, d) array-likes.
    """
    if isinstance(X, GroupedDataset):
        return X
    if isinstance(X, np.ndarray) and X.ndim == 2:
        raise ValueError(
            "expected grouped data (a sequence of per-group arrays or a "
            "GroupedDataset), got a single 2-d array; wrap it in a list "
            "to treat it as one group"
        )
    return GroupedDataset(X)
