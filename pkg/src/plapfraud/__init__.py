"""Graph p-Laplacian semi-supervised learning for imbalanced fraud data."""
from .graph import (EdgeFunction, GraphError, SparseGraph, build_graph, divergence,
                    gradient, inner_product_E, inner_product_V)
from .operators import (LocalVariation, curvature, energy, laplacian, local_variation,
                        objective, p_laplacian)
from .pipeline import (EvaluationReport, ExperimentConfig, GraphBuildConfig, build_knn_graph,
                       classify, evaluate, load_csv, make_label_vector, run_experiment)
from .sampling import (FRAUD, NORMAL, KMeansResult, LabeledDataset,
                       cluster_centroids_undersample, kmeans, stratified_split)
from .solver import (IterationCoefficients, SolveReport, SolverConfig, coefficients,
                     stationarity_residual, solve_fixed_point, solve_p2_direct)

__version__ = "0.1.0"
