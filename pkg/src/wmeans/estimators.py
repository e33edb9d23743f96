"""Scikit-learn style estimators wrapping the multilevel algorithms.

``X`` is grouped data: a :class:`~wmeans.measures.GroupedDataset` or any
sequence of per-group ``(n_j, d)`` arrays. ``fit`` learns local measures,
global measures, and a global cluster label per group; ``predict`` assigns
new groups to the fitted global measures. Parameters follow the sklearn
convention (stored verbatim, so ``get_params``/``set_params``/``clone``
work), and ``fit_predict`` comes from :class:`~sklearn.base.ClusterMixin`.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.exceptions import NotFittedError

from ._validation import as_grouped
from .baseline import three_stage_kmeans
from .kmeans import quantize
from .multilevel import MultilevelConfig, assign_groups
from .mwm import mwm_run
from .mwms import mwms_run

__all__ = [
    "MultilevelWassersteinMeans",
    "MultilevelWassersteinMeansSharing",
    "ThreeStageKMeans",
]


class _MultilevelBase(BaseEstimator, ClusterMixin):
    def _config(self) -> MultilevelConfig:
        raise NotImplementedError

    def _run(self, data):
        raise NotImplementedError

    def fit(self, X, y=None):
        data = as_grouped(X)
        result = self._run(data)
        state = result.state
        self.result_ = result
        self.local_measures_ = state.local_measures
        self.global_measures_ = state.global_measures
        self.labels_ = state.assignments.copy()
        self.objective_trace_ = list(state.objective_trace)
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        if state.shared_support is not None:
            self.shared_support_ = state.shared_support
        return self

    def predict(self, X):
        """Assign new groups to the fitted global measures.

        Each group is quantized with the local atom budget, then matched to
        the nearest global measure in squared W_2.
        """
        if not hasattr(self, "global_measures_"):
            raise NotFittedError("call fit before predict")
        data = as_grouped(X)
        k = getattr(self, "local_atoms", None) or getattr(self, "n_shared")
        measures = [
            quantize(g, min(k, g.shape[0]), seed=self.random_state)
            for g in data.groups
        ]
        return assign_groups(measures, self.global_measures_)


class MultilevelWassersteinMeans(_MultilevelBase):
    """Joint local quantization and global clustering of grouped data.

    Parameters
    ----------
    local_atoms : int or list of int
        Atom budget of each group's local measure.
    n_global : int
        Number of global measures (group clusters).
    global_support : int
        Atom cap for every global measure.
    max_outer, rel_tol : outer-loop stopping rule.
    method : "auto" | "exact" | "sinkhorn"
        Transport solver policy for inner distance computations.
    random_state : int or None
    """

    def __init__(self, local_atoms=5, n_global=5, global_support=10,
                 max_outer=100, rel_tol=1e-6, method="auto", random_state=None):
        self.local_atoms = local_atoms
        self.n_global = n_global
        self.global_support = global_support
        self.max_outer = max_outer
        self.rel_tol = rel_tol
        self.method = method
        self.random_state = random_state

    def _config(self) -> MultilevelConfig:
        return MultilevelConfig(
            local_atoms=self.local_atoms,
            n_global=self.n_global,
            global_support=self.global_support,
            max_outer=self.max_outer,
            rel_tol=self.rel_tol,
            seed=self.random_state,
            transport_method=self.method,
        )

    def _run(self, data):
        return mwm_run(data, self._config())


class MultilevelWassersteinMeansSharing(_MultilevelBase):
    """Sharing variant: all local measures live on one set of n_shared atoms."""

    def __init__(self, n_shared=50, n_global=5, global_support=10,
                 max_outer=100, rel_tol=1e-6, method="auto", random_state=None):
        self.n_shared = n_shared
        self.n_global = n_global
        self.global_support = global_support
        self.max_outer = max_outer
        self.rel_tol = rel_tol
        self.method = method
        self.random_state = random_state

    def _config(self) -> MultilevelConfig:
        return MultilevelConfig(
            n_global=self.n_global,
            global_support=self.global_support,
            max_outer=self.max_outer,
            rel_tol=self.rel_tol,
            seed=self.random_state,
            transport_method=self.method,
            shared_atoms=self.n_shared,
        )

    def _run(self, data):
        return mwms_run(data, self._config())


class ThreeStageKMeans(_MultilevelBase):
    """Plain three-stage K-means baseline with the same result surface."""

    def __init__(self, local_atoms=5, n_global=5, global_support=10,
                 random_state=None):
        self.local_atoms = local_atoms
        self.n_global = n_global
        self.global_support = global_support
        self.random_state = random_state

    def _config(self) -> MultilevelConfig:
        return MultilevelConfig(
            local_atoms=self.local_atoms,
            n_global=self.n_global,
            global_support=self.global_support,
            seed=self.random_state,
        )

    def _run(self, data):
        return three_stage_kmeans(data, self._config())
