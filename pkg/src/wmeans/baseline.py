"""Three-stage K-means baseline for multilevel clustering.

Stage 1 quantizes each group, stage 2 runs plain K-means on the pooled atom
locations of all local measures (atom weights are deliberately ignored),
stage 3 quantizes each atom cluster into a global measure with at most L
atoms. Also used to initialize the global measures of the Wasserstein-means
algorithms.
"""

from __future__ import annotations

import time
import warnings

import numpy as np

from ._validation import rng_stream
from .kmeans import lloyd, quantize
from .measures import GroupedDataset
from .multilevel import (
    MultilevelConfig,
    MultilevelResult,
    MultilevelState,
    objective_from_empiricals,
)

__all__ = ["three_stage_kmeans"]


def three_stage_kmeans(data: GroupedDataset, config: MultilevelConfig) -> MultilevelResult:
    """Run the baseline; deterministic given ``config.seed``.

    Group assignments are the majority stage-2 cluster among each group's
    atoms, ties resolved toward the lowest cluster index.
    """
    t0 = time.perf_counter()
    seed = config.seed
    budgets = config.local_budgets(data)
    m = data.n_groups

    local_measures = [
        quantize(points, k, rng=rng_stream(seed, 1, j))
        for j, (points, k) in enumerate(zip(data.groups, budgets))
    ]

    pooled_atoms = np.vstack([g.atoms for g in local_measures])
    n_global = config.n_global
    distinct = np.unique(pooled_atoms, axis=0).shape[0]
    if distinct < n_global:
        warnings.warn(
            f"only {distinct} distinct pooled atoms for {n_global} global "
            "clusters; clamping",
            stacklevel=2,
        )
        n_global = distinct
    stage2 = lloyd(pooled_atoms, n_global, rng=rng_stream(seed, 2))
    n_global = stage2.centroids.shape[0]

    global_measures = []
    for i in range(n_global):
        cluster_atoms = pooled_atoms[stage2.labels == i]
        global_measures.append(
            quantize(cluster_atoms, config.global_support, rng=rng_stream(seed, 3, i))
        )

    # majority vote of each group's atom labels
    assignments = np.zeros(m, dtype=int)
    offset = 0
    for j, g in enumerate(local_measures):
        labels = stage2.labels[offset:offset + g.n_atoms]
        counts = np.bincount(labels, minlength=n_global)
        assignments[j] = int(np.argmax(counts))
        offset += g.n_atoms

    objective = objective_from_empiricals(
        local_measures, global_measures, data.empiricals()
    )
    state = MultilevelState(
        local_measures=local_measures,
        global_measures=global_measures,
        assignments=assignments,
        objective_trace=[objective],
    )
    return MultilevelResult(
        state=state,
        iterations=1,
        converged=True,
        wall_time=time.perf_counter() - t0,
        method="tsk",
    )
