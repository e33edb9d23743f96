"""Seeded generators for the two synthetic benchmark processes.

Both processes first draw M global measures whose atoms are Gaussian around
the staircase means 5*(i-1)*1_d. The no-constraint (NC) process then gives
every group its own Gaussian-blurred atoms drawn through its global measure;
the local-constraint (LC) process draws one shared pool of K atoms and lets
each group use exactly the pool atoms carrying its global label.

Randomness is organized as named Philox streams (see ``rng_stream``): the
global structure, the shared pool, and each group consume disjoint streams,
so generation is reproducible and parallelizable per group.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ._validation import rng_stream
from .measures import (
    DiscreteMeasure,
    GroupedDataset,
    measure_from_dict,
    measure_to_dict,
)

__all__ = [
    "GenParams",
    "SyntheticTruth",
    "generate_nc",
    "generate_lc",
    "write_grouped_csv",
    "read_grouped_csv",
    "truth_to_dict",
    "truth_from_dict",
]

VARIANCE_MODES = ("constant", "proportional")


@dataclass
class GenParams:
    """Benchmark dimensions; defaults follow the standard preset."""

    m: int = 50            # number of groups
    n_j: int = 50          # observations per group
    d: int = 10            # ambient dimension
    n_global: int = 5      # M, number of global measures
    global_atoms: int = 6  # atoms per global measure
    local_atoms: int = 5   # atoms per local measure (NC)
    shared_atoms: int = 50  # K, size of the shared pool (LC)
    variance: str = "constant"
    seed: int | None = 0

    def __post_init__(self):
        for name in ("m", "n_j", "d", "n_global", "global_atoms",
                     "local_atoms", "shared_atoms"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.variance not in VARIANCE_MODES:
            raise ValueError(f"variance must be one of {VARIANCE_MODES}")


@dataclass
class SyntheticTruth:
    global_measures: list[DiscreteMeasure]
    local_measures: list[DiscreteMeasure]
    labels: np.ndarray  # (m,), global label per group, 0-based
    shared_support: np.ndarray | None = None  # (K, d), LC only
    shared_labels: np.ndarray | None = None  # (K,), LC only


def _draw_globals(params: GenParams, rng) -> list[DiscreteMeasure]:
    measures = []
    for i in range(params.n_global):
        mean = 5.0 * i * np.ones(params.d)
        atoms = mean + rng.standard_normal((params.global_atoms, params.d))
        weights = rng.dirichlet(np.ones(params.global_atoms))
        measures.append(DiscreteMeasure(atoms, weights))
    return measures


def _sample_atoms(measure: DiscreteMeasure, size: int, rng) -> np.ndarray:
    idx = rng.choice(measure.n_atoms, size=size, p=measure.weights)
    return measure.atoms[idx]


def generate_nc(params: GenParams):
    """No-constraint nested mixture process.

    Per group: a uniform global label, local atoms Gaussian around draws
    from the labelled global measure (variance 1, or 1+label in the
    proportional mode), Dirichlet weights, then observations Gaussian
    around draws from the local measure.
    """
    globals_ = _draw_globals(params, rng_stream(params.seed, 0))
    groups = []
    locals_ = []
    labels = np.zeros(params.m, dtype=int)
    for j in range(params.m):
        rng = rng_stream(params.seed, 1, j)
        z = int(rng.integers(params.n_global))
        labels[j] = z
        tau = _sample_atoms(globals_[z], params.local_atoms, rng)
        sigma = 1.0 if params.variance == "constant" else float(np.sqrt(z + 1.0))
        atoms = tau + sigma * rng.standard_normal(tau.shape)
        weights = rng.dirichlet(np.ones(params.local_atoms))
        g = DiscreteMeasure(atoms, weights)
        locals_.append(g)
        centers = _sample_atoms(g, params.n_j, rng)
        groups.append(centers + rng.standard_normal(centers.shape))
    truth = SyntheticTruth(
        global_measures=globals_, local_measures=locals_, labels=labels
    )
    return GroupedDataset(groups), truth


def generate_lc(params: GenParams):
    """Local-constraint process with a shared atom pool.

    Pool labels are resampled (up to 100 times) until every global label
    owns at least one pool atom, so no group can end up with an empty
    support.
    """
    globals_ = _draw_globals(params, rng_stream(params.seed, 0))
    pool_rng = rng_stream(params.seed, 2)
    K = params.shared_atoms
    for attempt in range(100):
        pool_labels = pool_rng.integers(params.n_global, size=K)
        if np.unique(pool_labels).size == params.n_global:
            break
    else:
        raise RuntimeError(
            "could not draw shared-atom labels covering every global label "
            "in 100 attempts; increase shared_atoms or decrease n_global"
        )
    tau = np.vstack(
        [_sample_atoms(globals_[z], 1, pool_rng) for z in pool_labels]
    )
    if params.variance == "constant":
        sigma = np.ones(K)
    else:
        sigma = np.sqrt(pool_labels + 1.0)
    pool = tau + sigma[:, None] * pool_rng.standard_normal((K, params.d))

    groups = []
    locals_ = []
    labels = np.zeros(params.m, dtype=int)
    for j in range(params.m):
        rng = rng_stream(params.seed, 1, j)
        z = int(rng.integers(params.n_global))
        labels[j] = z
        own = np.flatnonzero(pool_labels == z)
        weights = rng.dirichlet(np.ones(own.size))
        g = DiscreteMeasure(pool[own], weights)
        locals_.append(g)
        centers = _sample_atoms(g, params.n_j, rng)
        groups.append(centers + rng.standard_normal(centers.shape))
    truth = SyntheticTruth(
        global_measures=globals_,
        local_measures=locals_,
        labels=labels,
        shared_support=pool,
        shared_labels=pool_labels,
    )
    return GroupedDataset(groups), truth


def write_grouped_csv(data: GroupedDataset, path) -> None:
    """Columns: group_id, x0, ..., x{d-1}. Floats use repr round-tripping."""
    d = data.dim
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group_id"] + [f"x{i}" for i in range(d)])
    for j, g in enumerate(data.groups):
        for row in g:
            writer.writerow([j] + [repr(float(x)) for x in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_grouped_csv(path) -> GroupedDataset:
    groups: dict[int, list[list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "group_id":
            raise ValueError(f"{path}: expected header starting with group_id")
        for ln, row in enumerate(reader, start=2):
            try:
                gid = int(row[0])
                coords = [float(x) for x in row[1:]]
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{ln}: malformed row") from exc
            groups.setdefault(gid, []).append(coords)
    if not groups:
        raise ValueError(f"{path}: no data rows")
    return GroupedDataset([groups[g] for g in sorted(groups)])


def truth_to_dict(truth: SyntheticTruth) -> dict:
    payload = {
        "globals": [measure_to_dict(h) for h in truth.global_measures],
        "locals": [measure_to_dict(g) for g in truth.local_measures],
        "labels": [int(z) for z in truth.labels],
        "shared_support": None,
        "shared_labels": None,
    }
    if truth.shared_support is not None:
        payload["shared_support"] = truth.shared_support.tolist()
        payload["shared_labels"] = [int(z) for z in truth.shared_labels]
    return payload


def truth_from_dict(payload: dict) -> SyntheticTruth:
    try:
        shared = payload.get("shared_support")
        return SyntheticTruth(
            global_measures=[measure_from_dict(d) for d in payload["globals"]],
            local_measures=[measure_from_dict(d) for d in payload["locals"]],
            labels=np.asarray(payload["labels"], dtype=int),
            shared_support=None if shared is None else np.asarray(shared, dtype=float),
            shared_labels=None if shared is None
            else np.asarray(payload["shared_labels"], dtype=int),
        )
    except KeyError as exc:
        raise ValueError(f"truth dict missing key {exc}") from exc
