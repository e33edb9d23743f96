"""Multilevel Wasserstein means with sharing: one atom set for all groups.

All local measures are constrained to a common K-point support. Per outer
iteration: (1) move the shared atoms to the closed-form minimizer given the
current couplings to the group empiricals and assigned global measures;
(2) re-solve each group's weights over the shared support; (3) update the
global measures exactly as in the unconstrained algorithm. Updates are
guarded against the exact objective.
"""

from __future__ import annotations

import time

import numpy as np

from ._validation import rng_stream
from .barycenter import fixed_support_weights
from .baseline import three_stage_kmeans
from .kmeans import lloyd
from .measures import DiscreteMeasure, GroupedDataset, empirical_measure
from .multilevel import (
    MultilevelConfig,
    MultilevelResult,
    MultilevelState,
    assign_groups,
    objective_from_empiricals,
)
from .mwm import global_update, _cluster_cost, _reseed_global
from .transport import Coupling, exact_coupling, resolve_method, sinkhorn_coupling

__all__ = ["shared_support_init", "support_update", "local_weight_update", "mwms_run"]

GUARD_SLACK = 1e-12


def shared_support_init(data: GroupedDataset, n_shared: int, rng) -> np.ndarray:
    """Initial shared atoms: K-means centroids of the pooled raw data."""
    pooled = data.pooled()
    res = lloyd(pooled, n_shared, rng=rng)
    return res.centroids


def _coupling_plan(g: DiscreteMeasure, other: DiscreteMeasure, method: str) -> np.ndarray:
    method = resolve_method(g, other, method)
    if method == "exact":
        coupling, _ = exact_coupling(g, other)
        return coupling.plan
    return sinkhorn_coupling(g, other).coupling.plan


def support_update(
    shared_atoms: np.ndarray,
    data: GroupedDataset,
    data_couplings: list[np.ndarray],
    global_couplings: list[np.ndarray],
    assigned_globals: list[DiscreteMeasure],
    m_weight: float | None = None,
) -> np.ndarray:
    """Closed-form relocation of the shared atoms.

    Each atom moves to the coupling-weighted mean of the data points and
    global atoms it serves; the data side carries weight m (the number of
    groups), matching the objective's 1/m scaling of the global term. Atoms
    that currently carry no mass stay where they are.
    """
    K, d = shared_atoms.shape
    m = data.n_groups if m_weight is None else m_weight
    num = np.zeros((K, d))
    den = np.zeros(K)
    for points, T in zip(data.groups, data_couplings):
        num += m * (T @ points)
        den += m * T.sum(axis=1)
    for h, U in zip(assigned_globals, global_couplings):
        num += U @ h.atoms
        den += U.sum(axis=1)
    moved = shared_atoms.copy()
    mask = den > 0
    moved[mask] = num[mask] / den[mask, None]
    return moved


def local_weight_update(
    p: DiscreteMeasure,
    shared_atoms: np.ndarray,
    h: DiscreteMeasure,
    m: int,
) -> DiscreteMeasure:
    """Best weights over the shared support for one group.

    Minimizes W_2^2(G, P) + W_2^2(G, H)/m with supp(G) fixed to the shared
    atoms; solved exactly as a fixed-support two-measure barycenter. Atoms
    may receive zero weight.
    """
    lam = np.array([m / (m + 1.0), 1.0 / (m + 1.0)])
    weights = fixed_support_weights(shared_atoms, [p, h], lam)
    return DiscreteMeasure(shared_atoms, weights)


def mwms_run(data: GroupedDataset, config: MultilevelConfig) -> MultilevelResult:
    """Run the sharing variant. ``config.shared_atoms`` (K) is required and
    serves as every group's local budget."""
    if config.shared_atoms is None:
        raise ValueError("config.shared_atoms (K) is required for the sharing variant")
    t0 = time.perf_counter()
    m = data.n_groups
    K = config.shared_atoms
    method = config.transport_method
    empiricals = [empirical_measure(g) for g in data.groups]

    shared = shared_support_init(data, K, rng_stream(config.seed, 20))
    globals_ = three_stage_kmeans(data, config).state.global_measures
    # initialize each group's weights against its empirical measure alone
    locals_ = [
        DiscreteMeasure(shared, fixed_support_weights(shared, [p]))
        for p in empiricals
    ]
    trace = [objective_from_empiricals(locals_, globals_, empiricals)]

    converged = False
    iterations = 0
    assignments = assign_groups(locals_, globals_, method)
    for it in range(config.max_outer):
        iterations = it + 1
        rng = rng_stream(config.seed, 21, it)

        # step 1: shared-atom relocation from current couplings
        assignments = assign_groups(locals_, globals_, method)
        assigned = [globals_[i] for i in assignments]
        data_couplings = [
            _coupling_plan(g, p, method) for g, p in zip(locals_, empiricals)
        ]
        global_couplings = [
            _coupling_plan(g, h, method) for g, h in zip(locals_, assigned)
        ]
        moved = support_update(
            shared, data, data_couplings, global_couplings, assigned
        )
        relocated = [DiscreteMeasure(moved, g.weights) for g in locals_]
        if (
            objective_from_empiricals(relocated, globals_, empiricals)
            <= trace[-1] + GUARD_SLACK
        ):
            shared = moved
            locals_ = relocated

        # step 2: per-group weight re-solve over the shared support
        for j in range(m):
            candidate = local_weight_update(
                empiricals[j], shared, globals_[assignments[j]], m
            )
            old_term = (
                exact_coupling(locals_[j], empiricals[j])[1]
                + exact_coupling(locals_[j], globals_[assignments[j]])[1] / m
            )
            new_term = (
                exact_coupling(candidate, empiricals[j])[1]
                + exact_coupling(candidate, globals_[assignments[j]])[1] / m
            )
            if new_term <= old_term + GUARD_SLACK:
                locals_[j] = candidate

        # step 3: global updates over the reassigned clusters
        assignments = assign_groups(locals_, globals_, method)
        positive_locals = [g.positive_part() for g in locals_]
        for i in range(len(globals_)):
            member_idx = np.flatnonzero(assignments == i)
            if member_idx.size == 0:
                far = max(
                    range(m),
                    key=lambda j: exact_coupling(
                        positive_locals[j], globals_[assignments[j]]
                    )[1],
                )
                globals_[i] = _reseed_global(
                    positive_locals[far], config.global_support, rng
                )
                continue
            members = [positive_locals[j] for j in member_idx]
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
        shared_support=shared,
    )
    return MultilevelResult(
        state=state,
        iterations=iterations,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        method="mwms",
    )
