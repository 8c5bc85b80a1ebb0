"""spcdist: dissimilarities for irregularly sampled longitudinal series.

The core measure refits each pair of subjects under the other subject's
REML-selected smoothing level and averages the two curve distances
(smoothing-parameter commutation).  The package adds the fixed-fit and
pointwise-Euclidean baselines, nearest-neighbor outlier scoring, k-medoids
clustering, and a reproducible simulation benchmark, all behind a CLI.
"""

from spcdist._backend import available_backends, backend_name
from spcdist.cluster import (
    Clustering,
    OutlierReport,
    flag_outliers,
    knn_outlier_scores,
    pam,
)
from spcdist.dataset import (
    Dataset,
    Subject,
    parse_long_csv,
    read_long_csv,
    validate,
    write_long_csv,
)
from spcdist.distance import (
    DissimilarityMatrix,
    FitCache,
    distance_matrix,
    eucl_distance,
    l2_between_fits,
    read_matrix_csv,
    spc_distance,
    ss_distance,
    write_matrix_csv,
)
from spcdist.errors import NumericError, SpcdistError, ValidationError
from spcdist.simbench import (
    BenchmarkReport,
    SimConfig,
    TruthTable,
    gen_curve,
    gen_noise,
    q_criterion,
    r_criterion,
    run_benchmark,
)
from spcdist.spline import (
    MixedModelParts,
    RemlSelection,
    SplineFit,
    build_mixed_model_parts,
    evaluate,
    fit_given_lambda,
    kernel_entry,
    restricted_loglik,
    select_lambda_reml,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "Clustering",
    "Dataset",
    "DissimilarityMatrix",
    "FitCache",
    "MixedModelParts",
    "NumericError",
    "OutlierReport",
    "RemlSelection",
    "SimConfig",
    "SpcdistError",
    "SplineFit",
    "Subject",
    "TruthTable",
    "ValidationError",
    "available_backends",
    "backend_name",
    "build_mixed_model_parts",
    "distance_matrix",
    "eucl_distance",
    "evaluate",
    "fit_given_lambda",
    "flag_outliers",
    "gen_curve",
    "gen_noise",
    "kernel_entry",
    "knn_outlier_scores",
    "l2_between_fits",
    "pam",
    "parse_long_csv",
    "q_criterion",
    "r_criterion",
    "read_long_csv",
    "read_matrix_csv",
    "restricted_loglik",
    "run_benchmark",
    "select_lambda_reml",
    "spc_distance",
    "ss_distance",
    "validate",
    "write_long_csv",
    "write_matrix_csv",
]
