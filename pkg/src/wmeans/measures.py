"""Finitely supported probability measures on R^d and grouped point clouds.

A discrete measure is a set of atom locations together with a probability
weight vector. These objects are the common currency of the whole package:
empirical measures of raw data, local cluster measures, and global cluster
measures are all instances of :class:`DiscreteMeasure`.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DiscreteMeasure",
    "GroupedDataset",
    "make_measure",
    "empirical_measure",
    "dedupe",
    "measure_to_dict",
    "measure_from_dict",
]

# Weight vectors further than this from total mass 1 are rejected as caller
# bugs; anything inside is renormalized to sum exactly 1.
WEIGHT_SUM_TOL = 1e-9


def _as_atoms(atoms) -> np.ndarray:
    arr = np.asarray(atoms, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"atoms must be a nonempty (k, d) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("atoms must have finite coordinates")
    return arr


class DiscreteMeasure:
    """A probability measure with finitely many atoms in R^d.

    Parameters
    ----------
    atoms : array-like, shape (k, d)
        Atom locations. A 1-d array of length k is treated as k points in R^1.
    weights : array-like, shape (k,)
        Nonnegative weights summing to 1 (within ``WEIGHT_SUM_TOL``); they are
        renormalized to sum exactly 1. Zero weights are permitted; duplicate
        atoms are kept as distinct entries.

    Both arrays are stored as read-only float64; instances are immutable and
    safe to share across threads.
    """

    __slots__ = ("atoms", "weights")

    def __init__(self, atoms, weights):
        atoms = _as_atoms(atoms)
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape[0] != atoms.shape[0]:
            raise ValueError(
                f"got {atoms.shape[0]} atoms but {weights.shape[0]} weights"
            )
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        total = weights.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total!r}")
        weights = weights / total
        atoms = np.ascontiguousarray(atoms)
        atoms.flags.writeable = False
        weights.flags.writeable = False
        self.atoms = atoms
        self.weights = weights

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def support_size(self) -> int:
        """Number of atoms carrying strictly positive mass."""
        return int(np.count_nonzero(self.weights > 0))

    def positive_part(self) -> "DiscreteMeasure":
        """Drop zero-weight atoms. Returns self if none are present."""
        mask = self.weights > 0
        if mask.all():
            return self
        return DiscreteMeasure(self.atoms[mask], self.weights[mask])

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (
            self.atoms.shape == other.atoms.shape
            and np.array_equal(self.atoms, other.atoms)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.atoms.tobytes(), self.weights.tobytes()))

    def __repr__(self):
        return f"DiscreteMeasure(n_atoms={self.n_atoms}, dim={self.dim})"


def make_measure(atoms, weights) -> DiscreteMeasure:
    """Validated construction of a :class:`DiscreteMeasure`."""
    return DiscreteMeasure(atoms, weights)


def empirical_measure(points) -> DiscreteMeasure:
    """Uniform measure (1/n on each point) over ``points``, in input order.

    Point multiplicity is preserved: n input points yield n atoms of weight
    1/n each, even when locations repeat.
    """
    atoms = _as_atoms(points)
    n = atoms.shape[0]
    return DiscreteMeasure(atoms, np.full(n, 1.0 / n))


def dedupe(measure: DiscreteMeasure, tol: float = 1e-9) -> DiscreteMeasure:
    """Merge atoms within Euclidean distance ``tol``, summing their weights.

    Greedy in atom order: each atom joins the first earlier representative
    within ``tol``. The representative keeps its location.
    """
    atoms = measure.atoms
    weights = measure.weights
    reps: list[int] = []
    merged_w: list[float] = []
    for i in range(atoms.shape[0]):
        hit = -1
        for r, rep in enumerate(reps):
            if np.linalg.norm(atoms[i] - atoms[rep]) <= tol:
                hit = r
                break
        if hit >= 0:
            merged_w[hit] += weights[i]
        else:
            reps.append(i)
            merged_w.append(weights[i])
    return DiscreteMeasure(atoms[reps], np.asarray(merged_w))


def measure_to_dict(measure: DiscreteMeasure) -> dict:
    """JSON-ready representation: ``{"atoms": [[...]], "weights": [...]}``."""
    return {
        "atoms": measure.atoms.tolist(),
        "weights": measure.weights.tolist(),
    }


def measure_from_dict(payload: dict) -> DiscreteMeasure:
    try:
        return DiscreteMeasure(payload["atoms"], payload["weights"])
    except KeyError as exc:
        raise ValueError(f"measure dict missing key {exc}") from exc


class GroupedDataset:
    """m groups of raw observation vectors sharing one ambient dimension.

    Parameters
    ----------
    groups : sequence of array-like, each shape (n_j, d)
        Every group must be nonempty and all groups must agree on d.
    """

    __slots__ = ("groups",)

    def __init__(self, groups):
        groups = list(groups)
        if len(groups) == 0:
            raise ValueError("need at least one group")
        arrays = []
        for j, g in enumerate(groups):
            arr = np.asarray(g, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.ndim != 2 or arr.shape[0] == 0:
                raise ValueError(f"group {j} must be a nonempty (n, d) array")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"group {j} contains non-finite values")
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            arrays.append(arr)
        d = arrays[0].shape[1]
        for j, arr in enumerate(arrays):
            if arr.shape[1] != d:
                raise ValueError(
                    f"group {j} has dimension {arr.shape[1]}, expected {d}"
                )
        self.groups = arrays

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def dim(self) -> int:
        return self.groups[0].shape[1]

    @property
    def group_sizes(self) -> list[int]:
        return [g.shape[0] for g in self.groups]

    def empiricals(self) -> list[DiscreteMeasure]:
        return [empirical_measure(g) for g in self.groups]

    def pooled(self) -> np.ndarray:
        return np.vstack(self.groups)

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, j):
        return self.groups[j]

    def __repr__(self):
        return f"GroupedDataset(m={self.n_groups}, dim={self.dim}, sizes={self.group_sizes})"
