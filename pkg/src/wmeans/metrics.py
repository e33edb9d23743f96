"""Evaluation against generating truth: transport distances and label scores."""

from __future__ import annotations

import numpy as np
from sklearn.metrics import (
    adjusted_mutual_info_score,
    adjusted_rand_score,
    normalized_mutual_info_score,
)

from .multilevel import MultilevelResult, MultilevelState
from .synthdata import SyntheticTruth
from .transport import wasserstein2

__all__ = ["min_matching", "w_to_truth", "cluster_agreement"]


def _directed(A, B) -> float:
    # worst-case nearest-neighbour distance from collection A into B
    return max(min(wasserstein2(a, b) for b in B) for a in A)


def min_matching(A, B) -> float:
    """Minimum-matching distance between two collections of measures:
    max of the two directed worst-case nearest-neighbour W_2 distances."""
    A = list(A)
    B = list(B)
    if not A or not B:
        raise ValueError("both collections must be nonempty")
    return max(_directed(A, B), _directed(B, A))


def w_to_truth(estimate, truth: SyntheticTruth) -> float:
    """Distance of a fitted state to the generating truth.

    Mean per-group W_2 between fitted and true local measures (matched by
    group index) plus the minimum-matching distance between the fitted and
    true global collections. Exact transport throughout; units are data
    units (doubling all coordinates doubles the value).
    """
    state = estimate.state if isinstance(estimate, MultilevelResult) else estimate
    if not isinstance(state, MultilevelState):
        raise TypeError("estimate must be a MultilevelResult or MultilevelState")
    m = len(truth.local_measures)
    if len(state.local_measures) != m:
        raise ValueError(
            f"estimate has {len(state.local_measures)} groups, truth has {m}"
        )
    local = sum(
        wasserstein2(g.positive_part(), t)
        for g, t in zip(state.local_measures, truth.local_measures)
    ) / m
    return float(local + min_matching(state.global_measures, truth.global_measures))


def cluster_agreement(pred, truth, kind: str = "nmi") -> float:
    """Label agreement score, invariant to label permutation.

    kind: "nmi", "ari", or "ami" (AMI with max-entropy normalization).
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("pred and truth must be equal-length nonempty 1-d arrays")
    kind = kind.lower()
    if kind == "nmi":
        return float(normalized_mutual_info_score(truth, pred))
    if kind == "ari":
        return float(adjusted_rand_score(truth, pred))
    if kind == "ami":
        return float(adjusted_mutual_info_score(truth, pred, average_method="max"))
    raise ValueError(f"unknown agreement kind {kind!r}")
