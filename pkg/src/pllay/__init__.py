"""Topological layer toolkit: DTM filtrations, persistence, landscapes and PLLay."""
from .complexes import FilteredComplex, cubical_sublevel, dtm_filtration, rips
from .data import GridFunction, PointCloud, load_grid, load_point_cloud, save_grid, save_point_cloud
from .dtm import DtmField, DtmParams, dtm_points, dtm_points_grad, dtm_weights, dtm_weights_grad
from .landscape import LandscapeMatrix, LandscapeParams, landscape, landscape_jacobian, weighted_landscape
from .layer import AFFINE, LOG, Filtration, GTheta, PLLayLayer, g_eval, lipschitz_bound
from .metrics import bottleneck, hausdorff, w2_empirical, wasserstein
from .nn import MLP, MlpSpec, train, train_with_pllay
from .persistence import PersistenceDiagram, compute_persistence, persistent_betti
from .reduction import BACKEND

__version__ = "0.1.0"

__all__ = [
    "AFFINE", "BACKEND", "DtmField", "DtmParams", "FilteredComplex", "Filtration", "GTheta", "GridFunction",
    "LOG", "LandscapeMatrix", "LandscapeParams", "MLP", "MlpSpec", "PLLayLayer", "PersistenceDiagram",
    "PointCloud", "bottleneck", "compute_persistence", "cubical_sublevel", "dtm_filtration", "dtm_points",
    "dtm_points_grad", "dtm_weights", "dtm_weights_grad", "g_eval", "hausdorff", "landscape",
    "landscape_jacobian", "lipschitz_bound", "load_grid", "load_point_cloud", "persistent_betti", "rips",
    "save_grid", "save_point_cloud", "train", "train_with_pllay", "w2_empirical", "wasserstein",
    "weighted_landscape",
]
