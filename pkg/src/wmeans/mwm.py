"""Multilevel Wasserstein means: joint local and global clustering.

Outer loop, per iteration: (1) per group, assign to the nearest global
measure and re-solve the local measure as a two-measure barycenter between
the group's empirical measure and its assigned global measure; (2) reassign,
then re-solve every global measure as the uniform barycenter of its member
local measures. Every block update is guarded: a step that would increase
the exactly evaluated objective is rejected, so the objective trace is
nonincreasing by construction.
"""

from __future__ import annotations

import time

import numpy as np

from ._validation import rng_stream
from .barycenter import BarycenterProblem, free_support_barycenter
from .baseline import three_stage_kmeans
from .measures import DiscreteMeasure, GroupedDataset, empirical_measure
from .multilevel import (
    MultilevelConfig,
    MultilevelResult,
    MultilevelState,
    assign_groups,
    mwm_objective,
    objective_from_empiricals,
)
from .transport import exact_coupling

__all__ = ["mwm_init", "local_update", "global_update", "mwm_run"]

GUARD_SLACK = 1e-12


def mwm_init(data: GroupedDataset, config: MultilevelConfig) -> MultilevelState:
    """Initial state: stage-1 quantizations as local measures, three-stage
    K-means globals, nearest-measure assignments."""
    base = three_stage_kmeans(data, config).state
    assignments = assign_groups(
        base.local_measures, base.global_measures, config.transport_method
    )
    return MultilevelState(
        local_measures=base.local_measures,
        global_measures=base.global_measures,
        assignments=assignments,
        objective_trace=[],
    )


def _local_term(g: DiscreteMeasure, p: DiscreteMeasure, h: DiscreteMeasure,
                m: int) -> float:
    return exact_coupling(g, p)[1] + exact_coupling(g, h)[1] / m


def local_update(g: DiscreteMeasure, p: DiscreteMeasure, h: DiscreteMeasure,
                 m: int, k: int, rng=None) -> DiscreteMeasure:
    """Re-solve one local measure given its assigned global measure.

    Minimizes W_2^2(G, P) + W_2^2(G, H)/m over measures with at most ``k``
    atoms, which is the two-measure barycenter with mixture weights
    (m, 1)/(m+1), warm-started at the current measure. The update is
    rejected if it does not improve the exact objective term.
    """
    lam = np.array([m / (m + 1.0), 1.0 / (m + 1.0)])
    problem = BarycenterProblem(measures=[p, h], lam=lam, k=k, init=g)
    candidate = free_support_barycenter(problem, rng=rng)
    # the barycenter objective is the term divided by (m+1)/m; compare the
    # actual MWM term to guard against any inner-solver slack
    if _local_term(candidate, p, h, m) <= _local_term(g, p, h, m) + GUARD_SLACK:
        return candidate
    return g


def global_update(members: list[DiscreteMeasure], global_support: int,
                  init: DiscreteMeasure | None = None, rng=None) -> DiscreteMeasure:
    """Uniform barycenter of a cluster's local measures.

    The support budget is min(L, sum_l |supp(G_l)| - |C| + 1), the barycenter
    support bound for the cluster.
    """
    if len(members) == 0:
        raise ValueError("global_update needs at least one member")
    bound = sum(g.support_size for g in members) - len(members) + 1
    k = max(1, min(global_support, bound))
    problem = BarycenterProblem(measures=members, k=k, init=init)
    return free_support_barycenter(problem, rng=rng)


def _cluster_cost(h: DiscreteMeasure, members) -> float:
    return sum(exact_coupling(h, g)[1] for g in members)


def _reseed_global(measure: DiscreteMeasure, global_support: int, rng) -> DiscreteMeasure:
    """Turn a local measure into a fresh global one, respecting the L budget."""
    measure = measure.positive_part()
    if measure.n_atoms <= global_support:
        return measure
    from .kmeans import lloyd

    res = lloyd(measure.atoms, global_support, rng=rng, sample_weight=measure.weights)
    w = np.bincount(res.labels, weights=measure.weights,
                    minlength=res.centroids.shape[0])
    return DiscreteMeasure(res.centroids, w / w.sum())


def mwm_run(data: GroupedDataset, config: MultilevelConfig) -> MultilevelResult:
    """Run multilevel Wasserstein means to convergence.

    Stops when the relative objective decrease over one outer iteration
    falls below ``config.rel_tol``, or after ``config.max_outer`` iterations
    (reported via the ``converged`` flag).
    """
    t0 = time.perf_counter()
    state = mwm_init(data, config)
    budgets = config.local_budgets(data)
    m = data.n_groups
    empiricals = [empirical_measure(g) for g in data.groups]
    method = config.transport_method

    locals_ = list(state.local_measures)
    globals_ = list(state.global_measures)
    trace = [objective_from_empiricals(locals_, globals_, empiricals)]

    converged = False
    iterations = 0
    for it in range(config.max_outer):
        iterations = it + 1
        rng = rng_stream(config.seed, 10, it)

        # step 1: local barycenter updates against the assigned globals
        assignments = assign_groups(locals_, globals_, method)
        for j in range(m):
            locals_[j] = local_update(
                locals_[j], empiricals[j], globals_[assignments[j]], m,
                budgets[j], rng=rng,
            )

        # step 2: reassign, then update each global over its cluster
        assignments = assign_groups(locals_, globals_, method)
        for i in range(len(globals_)):
            member_idx = np.flatnonzero(assignments == i)
            if member_idx.size == 0:
                # re-seed an empty global at the member farthest from its
                # assigned global measure (deterministic K-means analogue)
                far = max(
                    range(m),
                    key=lambda j: exact_coupling(
                        locals_[j], globals_[assignments[j]]
                    )[1],
                )
                globals_[i] = _reseed_global(locals_[far], config.global_support, rng)
                continue
            members = [locals_[j] for j in member_idx]
            candidate = global_update(
                members, config.global_support, init=globals_[i], rng=rng
            )
            if _cluster_cost(candidate, members) <= _cluster_cost(
                globals_[i], members
            ) + GUARD_SLACK:
                globals_[i] = candidate

        assignments = assign_groups(locals_, globals_, method)
        value = objective_from_empiricals(locals_, globals_, empiricals)
        prev = trace[-1]
        trace.append(value)
        if prev - value < config.rel_tol * max(prev, 1e-300):
            converged = True
            break

    state = MultilevelState(
        local_measures=locals_,
        global_measures=globals_,
        assignments=assignments,
        objective_trace=trace,
    )
    return MultilevelResult(
        state=state,
        iterations=iterations,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        method="mwm",
    )
