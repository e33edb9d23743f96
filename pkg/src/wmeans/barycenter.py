"""Weighted Wasserstein barycenters of finitely many discrete measures.

Two layers: an exact fixed-support weight solver (given candidate atom
locations, find the best weight vector), and a free-support alternating
scheme that interleaves optimal couplings, barycentric projection of the
atoms, and the weight solver. Every accepted step is guarded against the
exactly evaluated objective, so the objective sequence is certified
nonincreasing even when an inner solver is approximate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix
from scipy.spatial.distance import cdist

from ._validation import as_rng
from .kmeans import kmeans_pp, lloyd
from .measures import DiscreteMeasure
from .transport import exact_coupling, exact_coupling_with_duals

__all__ = [
    "BarycenterProblem",
    "fixed_support_weights",
    "free_support_barycenter",
    "barycenter_objective",
]

# Joint-LP route for the weight solve is used up to this many input atoms
# (support + measures combined); beyond it, projected subgradient.
LP_ATOM_LIMIT = 4096

SUBGRADIENT_STEPS = 500

# Atoms lighter than this are dropped after a weight update.
WEIGHT_FLOOR = 1e-12

# Guard slack: an accepted step may exceed the previous objective by at most
# this much (absolute, on a squared-distance scale).
GUARD_SLACK = 1e-12


@dataclass
class BarycenterProblem:
    """Barycenter of ``measures`` with mixture weights ``lam`` in the simplex.

    ``k`` caps the support size of the solution; ``init`` optionally warm
    starts the search.
    """

    measures: list[DiscreteMeasure]
    lam: np.ndarray | None = None
    k: int = 1
    init: DiscreteMeasure | None = None

    def __post_init__(self):
        if len(self.measures) == 0:
            raise ValueError("need at least one measure")
        d = self.measures[0].dim
        for i, m in enumerate(self.measures):
            if m.dim != d:
                raise ValueError(f"measure {i} has dimension {m.dim}, expected {d}")
        if self.lam is None:
            self.lam = np.full(len(self.measures), 1.0 / len(self.measures))
        self.lam = np.asarray(self.lam, dtype=float)
        if self.lam.shape != (len(self.measures),):
            raise ValueError("lam must have one entry per measure")
        if np.any(self.lam < 0) or abs(self.lam.sum() - 1.0) > 1e-9:
            raise ValueError("lam must lie in the probability simplex")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def barycenter_objective(candidate: DiscreteMeasure, measures, lam) -> float:
    """Exact objective sum_i lam_i W_2^2(candidate, measures[i])."""
    return float(
        sum(l * exact_coupling(candidate, m)[1] for l, m in zip(lam, measures))
    )


def _project_simplex(x: np.ndarray) -> np.ndarray:
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.flatnonzero(u * np.arange(1, len(x) + 1) > css)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(x - theta, 0.0)


def _weights_single(support: np.ndarray, measure: DiscreteMeasure):
    # With free weights only the column constraints bind, so every atom of
    # the measure sends its whole mass to its nearest support point.
    C = cdist(support, measure.atoms, "sqeuclidean")
    nearest = np.argmin(C, axis=0)
    a = np.zeros(support.shape[0])
    np.add.at(a, nearest, measure.weights)
    value = float(np.sum(measure.weights * C[nearest, np.arange(C.shape[1])]))
    return a, value


def _weights_pair(support: np.ndarray, m1: DiscreteMeasure, m2: DiscreteMeasure, lam):
    """Exact two-measure weight solve by reduction to a single transport.

    Routing a unit of mass from atom v of m1 to atom w of m2 through support
    point l costs lam_0*C1[l,v] + lam_1*C2[l,w]; minimizing over l yields a
    ground cost on m1 x m2 whose optimal plan induces the optimal shared
    weights (mass through each support point).
    """
    A = lam[0] * cdist(support, m1.atoms, "sqeuclidean")
    B = lam[1] * cdist(support, m2.atoms, "sqeuclidean")
    stack = A[:, :, None] + B[:, None, :]  # (k, s1, s2)
    route = np.argmin(stack, axis=0)  # (s1, s2)
    D = np.take_along_axis(stack, route[None, :, :], axis=0)[0]
    coupling, value = exact_coupling(m1, m2, cost=D)
    a = np.zeros(support.shape[0])
    np.add.at(a.reshape(-1), route.ravel(), coupling.plan.ravel())
    total = a.sum()
    if total > 0:
        a /= total
    return a, float(value)


def _weights_lp(support: np.ndarray, measures, lam):
    """Joint LP over shared weights a and per-measure couplings T^i."""
    k = support.shape[0]
    sizes = [m.n_atoms for m in measures]
    n_var = k + k * sum(sizes)
    costs = [l * cdist(support, m.atoms, "sqeuclidean") for l, m in zip(lam, measures)]
    c = np.concatenate([np.zeros(k)] + [C.ravel() for C in costs])

    rows, cols, vals = [], [], []
    b = []
    row = 0
    offset = k
    for m, s in zip(measures, sizes):
        # T^i 1 = a  (k rows)
        for l in range(k):
            rows.extend([row] * (s + 1))
            cols.extend(range(offset + l * s, offset + (l + 1) * s))
            cols.append(l)
            vals.extend([1.0] * s)
            vals.append(-1.0)
            b.append(0.0)
            row += 1
        # (T^i)' 1 = p_i  (s rows)
        for jj in range(s):
            rows.extend([row] * k)
            cols.extend(range(offset + jj, offset + k * s, s))
            vals.extend([1.0] * k)
            b.append(m.weights[jj])
            row += 1
        offset += k * s
    A = csr_matrix((vals, (rows, cols)), shape=(row, n_var))
    res = linprog(c, A_eq=A, b_eq=np.asarray(b), bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"fixed-support weight LP failed: {res.message}")
    a = np.maximum(res.x[:k], 0.0)
    a /= a.sum()
    return a, float(res.fun)


def _weights_subgradient(support: np.ndarray, measures, lam):
    """Projected subgradient with iterate averaging (plan-free fallback).

    The subgradient of a W_2^2 term with respect to the candidate weights is
    its row dual potential. Step size c/sqrt(t).
    """
    k = support.shape[0]
    costs = [cdist(support, m.atoms, "sqeuclidean") for m in measures]
    a = np.full(k, 1.0 / k)
    avg = np.zeros(k)
    c_step = None
    for t in range(1, SUBGRADIENT_STEPS + 1):
        g = np.zeros(k)
        for lam_i, m, C in zip(lam, measures, costs):
            cand = DiscreteMeasure(support, a)
            _, _, u = exact_coupling_with_duals(cand, m, cost=C)
            g += lam_i * u
        if c_step is None:
            c_step = 1.0 / (np.linalg.norm(g) + 1.0)
        a = _project_simplex(a - (c_step / np.sqrt(t)) * g)
        avg += a
    a = avg / SUBGRADIENT_STEPS
    a = np.maximum(a, 0.0)
    a /= a.sum()
    value = barycenter_objective(DiscreteMeasure(support, a), measures, lam)
    return a, value


def _solve_weights(support: np.ndarray, measures, lam):
    """Dispatch: closed form (N=1), transport reduction (N=2), LP, subgradient.

    Returns (weights, value, exact) where ``exact`` marks routes whose value
    is the true minimum for the given support.
    """
    n = len(measures)
    if n == 1:
        a, value = _weights_single(support, measures[0])
        return a, value * lam[0], True
    if n == 2:
        a, value = _weights_pair(support, measures[0], measures[1], lam)
        return a, value, True
    total_atoms = support.shape[0] + sum(m.n_atoms for m in measures)
    if total_atoms <= LP_ATOM_LIMIT:
        a, value = _weights_lp(support, measures, lam)
        return a, value, True
    a, value = _weights_subgradient(support, measures, lam)
    return a, value, False


def fixed_support_weights(support, measures, lam=None) -> np.ndarray:
    """Best weight vector on a fixed support.

    Minimizes sum_i lam_i W_2^2(sum_l a_l delta_{s_l}, measures[i]) over the
    probability simplex. Exact for one or two measures and for joint problems
    up to ``LP_ATOM_LIMIT`` atoms; projected subgradient beyond that.
    """
    support = np.asarray(support, dtype=float)
    if support.ndim == 1:
        support = support[:, None]
    if support.shape[0] == 0:
        raise ValueError("support must be nonempty")
    d = support.shape[1]
    for i, m in enumerate(measures):
        if m.dim != d:
            raise ValueError(f"measure {i} has dimension {m.dim}, support has {d}")
    if lam is None:
        lam = np.full(len(measures), 1.0 / len(measures))
    lam = np.asarray(lam, dtype=float)
    a, _, _ = _solve_weights(support, list(measures), lam)
    return a


def _pooled_atoms(problem: BarycenterProblem):
    pooled = np.vstack([m.atoms for m in problem.measures])
    pooled_w = np.concatenate(
        [l * m.weights for l, m in zip(problem.lam, problem.measures)]
    )
    return pooled, pooled_w


def _init_candidate(problem: BarycenterProblem, k_eff: int,
                    rng: np.random.Generator) -> DiscreteMeasure:
    if problem.init is not None:
        cand = problem.init.positive_part()
        if cand.n_atoms > k_eff:
            res = lloyd(cand.atoms, k_eff, rng=rng, sample_weight=cand.weights)
            w = np.bincount(res.labels, weights=cand.weights,
                            minlength=res.centroids.shape[0])
            return DiscreteMeasure(res.centroids, w / w.sum())
        if cand.n_atoms < k_eff:
            # top up a thin warm start with fresh candidate atoms at zero
            # weight: the alternating scheme can only move atoms, never split
            # them, so the support must start at full budget to be reachable
            pooled, pooled_w = _pooled_atoms(problem)
            extra = kmeans_pp(pooled, k_eff - cand.n_atoms, rng,
                              sample_weight=pooled_w, init_centers=cand.atoms)
            if extra.shape[0]:
                atoms = np.vstack([cand.atoms, extra])
                weights = np.concatenate([cand.weights, np.zeros(extra.shape[0])])
                return DiscreteMeasure(atoms, weights)
        return cand
    pooled, pooled_w = _pooled_atoms(problem)
    atoms = kmeans_pp(pooled, k_eff, rng, sample_weight=pooled_w)
    return DiscreteMeasure(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))


def free_support_barycenter(problem: BarycenterProblem, max_iter: int = 100,
                            tol: float = 1e-7, rng=None) -> DiscreteMeasure:
    """Locally optimal barycenter with at most ``problem.k`` atoms.

    Alternates (i) exact couplings from the candidate to every measure,
    (ii) atom relocation by barycentric projection, (iii) weight re-solving
    on the new support; an iteration is accepted only if the exactly
    evaluated objective does not increase. The returned support never
    exceeds sum_i s_i - N + 1 atoms (s_i counting positive-weight atoms).
    """
    rng = as_rng(rng)
    measures = [m.positive_part() for m in problem.measures]
    lam = problem.lam
    n = len(measures)
    bound = sum(m.n_atoms for m in measures) - n + 1
    k_eff = max(1, min(problem.k, bound))

    if n == 1 and k_eff >= measures[0].n_atoms:
        return measures[0]

    cand = _init_candidate(problem, k_eff, rng)
    obj = barycenter_objective(cand, measures, lam)

    for _ in range(max_iter):
        plans = []
        for m in measures:
            coupling, _ = exact_coupling(cand, m)
            plans.append(coupling.plan)

        # Barycentric projection: each atom moves to the lam-weighted mean of
        # the mass it sends. Row masses equal the candidate weights, so the
        # denominator is the weight vector itself.
        num = np.zeros_like(cand.atoms)
        for l, plan, m in zip(lam, plans, measures):
            num += l * (plan @ m.atoms)
        den = cand.weights
        new_atoms = np.where(den[:, None] > 0, num / np.where(den > 0, den, 1.0)[:, None],
                             cand.atoms)

        a, value, exact = _solve_weights(new_atoms, measures, lam)
        if not exact:
            value = barycenter_objective(DiscreteMeasure(new_atoms, a), measures, lam)
        if value > obj + GUARD_SLACK:
            break  # reject step, keep current candidate

        # zero-weight atoms are kept during iterations so the weight solver
        # can reactivate them; they are pruned only on return
        prev = obj
        cand, obj = DiscreteMeasure(new_atoms, a), value
        if prev - obj < tol * max(prev, 1e-300) or obj <= 0:
            break

    keep = cand.weights > WEIGHT_FLOOR
    if not keep.all():
        w = cand.weights[keep]
        cand = DiscreteMeasure(cand.atoms[keep], w / w.sum())
    return cand
