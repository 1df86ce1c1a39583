"""Curvature-driven edge reweighting and spectral clustering on two-block SBMs."""
from ._backend import NAME as KERNEL_BACKEND
from .curvature import (CurvatureError, CurvatureValue, OverlapStats, curvature_all_edges, kappa_alpha,
                        lazy_measure, lly_curvature, overlap_stats)
from .graph import (Graph, GraphError, Labels, PairStats, build_graph, hall_matching_check,
                    load_graph_json, pair_stats, save_graph_json, truncated_distance)
from .meanfield import (ContrastSummary, MeanFieldTrajectory, benchmark_trajectory, contrast_summary,
                        f_n, mean_field_map, population_levels, s_star)
from .pipeline import (ExperimentReport, IterateState, IterationAborted, TrackingRecord,
                       benchmark_weights, ricci_iterate, run_experiment, tracking_error)
from .sbm import SbmParams, WindowReport, check_window, sample_sbm
from .spectral import (ClusteringResult, NormalizedLaplacian, SpectralSummary, eigs_bottom,
                       normalized_laplacian, perturbation_diagnostics, population_laplacian,
                       sign_cluster)
from .transport import SparseMeasure, TransportResult, kr_dual_check, wasserstein1

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
