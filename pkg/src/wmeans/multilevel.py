"""Shared state, configuration, and objective for the multilevel algorithms.

The objective being minimized over local measures G_1..G_m and global
measures H_1..H_M is

    sum_j  W_2^2(G_j, P_j)  +  min_i W_2^2(G_j, H_i) / m

where P_j is the empirical measure of group j. Evaluation here is always
with the exact transport solver, never Sinkhorn, so traces are trustworthy
for monotonicity checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .measures import (
    DiscreteMeasure,
    GroupedDataset,
    empirical_measure,
    measure_from_dict,
    measure_to_dict,
)
from .transport import exact_coupling, transport_cost

__all__ = [
    "MultilevelConfig",
    "MultilevelState",
    "MultilevelResult",
    "assign_groups",
    "mwm_objective",
    "result_to_dict",
    "result_from_dict",
]

# Slack allowed when asserting the objective trace nonincreasing.
TRACE_SLACK = 1e-9


@dataclass
class MultilevelConfig:
    """Knobs shared by MWM, MWMS and the three-stage baseline.

    ``local_atoms`` is either one budget for every group or a per-group
    sequence; ``shared_atoms`` (K) is only consulted by the sharing variant,
    which also uses it as every group's local budget.
    """

    local_atoms: int | list[int] = 5
    n_global: int = 5
    global_support: int = 10
    max_outer: int = 100
    rel_tol: float = 1e-6
    seed: int | None = None
    transport_method: str = "auto"
    shared_atoms: int | None = None

    def __post_init__(self):
        if self.n_global < 1:
            raise ValueError("n_global must be >= 1")
        if self.global_support < 1:
            raise ValueError("global_support must be >= 1")
        budgets = self.local_atoms if isinstance(self.local_atoms, (list, tuple)) \
            else [self.local_atoms]
        if any(k < 1 for k in budgets):
            raise ValueError("local_atoms must be >= 1")
        if self.shared_atoms is not None and self.shared_atoms < 1:
            raise ValueError("shared_atoms must be >= 1")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if self.transport_method not in ("auto", "exact", "sinkhorn"):
            raise ValueError(f"unknown transport method {self.transport_method!r}")

    def local_budgets(self, data: GroupedDataset) -> list[int]:
        """Per-group atom budgets, clamped to group sizes (with a warning)."""
        m = data.n_groups
        if isinstance(self.local_atoms, (list, tuple)):
            if len(self.local_atoms) != m:
                raise ValueError(
                    f"local_atoms has {len(self.local_atoms)} entries for {m} groups"
                )
            budgets = list(self.local_atoms)
        else:
            budgets = [int(self.local_atoms)] * m
        sizes = data.group_sizes
        clamped = []
        for j, (k, n) in enumerate(zip(budgets, sizes)):
            if k > n:
                warnings.warn(
                    f"group {j} has {n} points < local budget {k}; clamping",
                    stacklevel=2,
                )
                k = n
            clamped.append(k)
        return clamped


@dataclass
class MultilevelState:
    local_measures: list[DiscreteMeasure]
    global_measures: list[DiscreteMeasure]
    assignments: np.ndarray  # (m,), values in [0, M)
    objective_trace: list[float] = field(default_factory=list)
    shared_support: np.ndarray | None = None  # (K, d), sharing variant only


@dataclass
class MultilevelResult:
    state: MultilevelState
    iterations: int
    converged: bool
    wall_time: float
    method: str = ""


def assign_groups(local_measures, global_measures, method: str = "exact") -> np.ndarray:
    """Nearest global measure per group in squared W_2, lowest index on ties."""
    if len(global_measures) == 0:
        raise ValueError("need at least one global measure")
    dists = np.array(
        [
            [transport_cost(g, h, method) for h in global_measures]
            for g in local_measures
        ]
    )
    return np.argmin(dists, axis=1)


def objective_from_empiricals(local_measures, global_measures, empiricals) -> float:
    m = len(empiricals)
    total = 0.0
    for g, p in zip(local_measures, empiricals):
        _, local_cost = exact_coupling(g, p)
        global_cost = min(exact_coupling(g, h)[1] for h in global_measures)
        total += local_cost + global_cost / m
    return float(total)


def mwm_objective(state: MultilevelState, data: GroupedDataset) -> float:
    """Exact multilevel objective of a state. Used for traces and guards."""
    if len(state.local_measures) != data.n_groups:
        raise ValueError("state and data disagree on number of groups")
    return objective_from_empiricals(
        state.local_measures,
        state.global_measures,
        [empirical_measure(g) for g in data.groups],
    )


def result_to_dict(result: MultilevelResult) -> dict:
    """JSON-ready result. Wall time is deliberately excluded so that output
    files are byte-identical across reruns with the same seed."""
    state = result.state
    payload = {
        "method": result.method,
        "m": len(state.local_measures),
        "locals": [measure_to_dict(g) for g in state.local_measures],
        "globals": [measure_to_dict(h) for h in state.global_measures],
        "assignments": [int(i) for i in state.assignments],
        "objective_trace": [float(v) for v in state.objective_trace],
        "iterations": result.iterations,
        "converged": result.converged,
    }
    if state.shared_support is not None:
        payload["shared_support"] = state.shared_support.tolist()
    return payload


def result_from_dict(payload: dict) -> MultilevelResult:
    try:
        shared = payload.get("shared_support")
        state = MultilevelState(
            local_measures=[measure_from_dict(d) for d in payload["locals"]],
            global_measures=[measure_from_dict(d) for d in payload["globals"]],
            assignments=np.asarray(payload["assignments"], dtype=int),
            objective_trace=[float(v) for v in payload["objective_trace"]],
            shared_support=None if shared is None else np.asarray(shared, dtype=float),
        )
        return MultilevelResult(
            state=state,
            iterations=int(payload["iterations"]),
            converged=bool(payload["converged"]),
            wall_time=0.0,
            method=payload.get("method", ""),
        )
    except KeyError as exc:
        raise ValueError(f"result dict missing key {exc}") from exc
