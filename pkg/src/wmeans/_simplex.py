"""Exact solver for the discrete transportation problem.

Primal transportation simplex on the bipartite flow network, jit-compiled
with numba. Strictly positive marginals are assumed; callers mask out
zero-weight atoms. A pivot cap guards against (rare) degenerate cycling,
in which case the caller falls back to an LP solve.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Dimensionless slack on reduced costs; scaled by max|cost| at runtime.
_RED_COST_RTOL = 1e-12


@njit(cache=True)
def _solve(p, q, C, max_pivots):  # pragma: no cover - exercised via wrapper
    """Return (plan, row_duals, col_duals, status).

    status 0: optimal vertex found. status 1: pivot cap reached.
    """
    k = p.shape[0]
    k2 = q.shape[0]
    n = k + k2
    nb = n - 1

    X = np.zeros((k, k2))
    barc_r = np.empty(nb, dtype=np.int64)
    barc_c = np.empty(nb, dtype=np.int64)

    # North-west corner initial basic feasible solution. Each step fixes one
    # basic cell and advances one index, yielding exactly k + k2 - 1 cells.
    a = p.copy()
    b = q.copy()
    i = 0
    j = 0
    for t in range(nb):
        barc_r[t] = i
        barc_c[t] = j
        m = a[i] if a[i] < b[j] else b[j]
        X[i, j] = m
        a[i] -= m
        b[j] -= m
        if a[i] <= b[j] and i < k - 1:
            i += 1
        else:
            j += 1

    u = np.zeros(k)
    v = np.zeros(k2)
    tol = _RED_COST_RTOL * (1.0 + np.abs(C).max())

    deg = np.zeros(n, dtype=np.int64)
    off = np.zeros(n + 1, dtype=np.int64)
    adj_node = np.empty(2 * nb, dtype=np.int64)
    adj_arc = np.empty(2 * nb, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    parc = np.empty(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    path_arcs = np.empty(nb, dtype=np.int64)
    known_u = np.empty(k, dtype=np.bool_)
    known_v = np.empty(k2, dtype=np.bool_)

    for _pivot in range(max_pivots):
        # Duals from the basis tree: u_i + v_j = c_ij on basic arcs.
        known_u[:] = False
        known_v[:] = False
        u[0] = 0.0
        known_u[0] = True
        for _sweep in range(n):
            done = True
            for t in range(nb):
                r = barc_r[t]
                c = barc_c[t]
                if known_u[r] and not known_v[c]:
                    v[c] = C[r, c] - u[r]
                    known_v[c] = True
                    done = False
                elif known_v[c] and not known_u[r]:
                    u[r] = C[r, c] - v[c]
                    known_u[r] = True
                    done = False
            if done:
                break

        # Entering arc: most negative reduced cost.
        best = -tol
        ei = -1
        ej = -1
        for r in range(k):
            ur = u[r]
            for c in range(k2):
                red = C[r, c] - ur - v[c]
                if red < best:
                    best = red
                    ei = r
                    ej = c
        if ei < 0:
            return X, u, v, 0

        # Locate the unique tree path from row node ei to column node k + ej.
        deg[:] = 0
        for t in range(nb):
            deg[barc_r[t]] += 1
            deg[k + barc_c[t]] += 1
        off[0] = 0
        for x in range(n):
            off[x + 1] = off[x] + deg[x]
        fill = off[:n].copy()
        for t in range(nb):
            rn = barc_r[t]
            cn = k + barc_c[t]
            adj_node[fill[rn]] = cn
            adj_arc[fill[rn]] = t
            fill[rn] += 1
            adj_node[fill[cn]] = rn
            adj_arc[fill[cn]] = t
            fill[cn] += 1

        parent[:] = -1
        parc[:] = -1
        top = 0
        stack[top] = ei
        top += 1
        parent[ei] = ei
        target = k + ej
        while top > 0:
            top -= 1
            x = stack[top]
            if x == target:
                break
            for e in range(off[x], off[x + 1]):
                y = adj_node[e]
                if parent[y] < 0:
                    parent[y] = x
                    parc[y] = adj_arc[e]
                    stack[top] = y
                    top += 1

        plen = 0
        x = target
        while x != ei:
            path_arcs[plen] = parc[x]
            plen += 1
            x = parent[x]

        # Walking back from the column node, path arcs alternate -,+,-,...
        # relative to the +theta on the entering arc.
        theta = np.inf
        leave = -1
        for s in range(plen):
            if s % 2 == 0:
                t = path_arcs[s]
                f = X[barc_r[t], barc_c[t]]
                if f < theta:
                    theta = f
                    leave = t
        X[ei, ej] += theta
        for s in range(plen):
            t = path_arcs[s]
            if s % 2 == 0:
                X[barc_r[t], barc_c[t]] -= theta
            else:
                X[barc_r[t], barc_c[t]] += theta
        barc_r[leave] = ei
        barc_c[leave] = ej

    return X, u, v, 1


def transport_simplex(p: np.ndarray, q: np.ndarray, C: np.ndarray, max_pivots: int = 100000):
    """Solve min <T, C> over couplings of strictly positive p and q.

    Returns (plan, row_duals, col_duals, status).
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    return _solve(p, q, C, max_pivots)
