"""Multilevel clustering of grouped data via Wasserstein means."""

from .measures import (
    DiscreteMeasure,
    GroupedDataset,
    dedupe,
    empirical_measure,
    make_measure,
)
from .transport import (
    Coupling,
    SinkhornResult,
    cost_matrix,
    exact_coupling,
    sinkhorn_coupling,
    wasserstein2,
)
from .barycenter import (
    BarycenterProblem,
    barycenter_objective,
    fixed_support_weights,
    free_support_barycenter,
)
from .kmeans import KmeansResult, lloyd, quantize
from .multilevel import (
    MultilevelConfig,
    MultilevelResult,
    MultilevelState,
    assign_groups,
    mwm_objective,
)
from .mwm import global_update, local_update, mwm_init, mwm_run
from .mwms import local_weight_update, mwms_run, support_update
from .baseline import three_stage_kmeans
from .synthdata import GenParams, SyntheticTruth, generate_lc, generate_nc
from .metrics import cluster_agreement, min_matching, w_to_truth
from .estimators import (
    MultilevelWassersteinMeans,
    MultilevelWassersteinMeansSharing,
    ThreeStageKMeans,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure",
    "GroupedDataset",
    "make_measure",
    "empirical_measure",
    "dedupe",
    "Coupling",
    "SinkhornResult",
    "cost_matrix",
    "exact_coupling",
    "sinkhorn_coupling",
    "wasserstein2",
    "BarycenterProblem",
    "fixed_support_weights",
    "free_support_barycenter",
    "barycenter_objective",
    "KmeansResult",
    "lloyd",
    "quantize",
    "MultilevelConfig",
    "MultilevelState",
    "MultilevelResult",
    "assign_groups",
    "mwm_objective",
    "mwm_init",
    "mwm_run",
    "local_update",
    "global_update",
    "mwms_run",
    "support_update",
    "local_weight_update",
    "three_stage_kmeans",
    "GenParams",
    "SyntheticTruth",
    "generate_nc",
    "generate_lc",
    "min_matching",
    "w_to_truth",
    "cluster_agreement",
    "MultilevelWassersteinMeans",
    "MultilevelWassersteinMeansSharing",
    "ThreeStageKMeans",
]
