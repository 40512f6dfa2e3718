"""mixmood: dataset dissimilarity measures, ante hoc unlabelled-dataset
ranking for semi-supervised learning, and a desk-scale MixMatch demo."""

__version__ = "0.1.0"

from .dissimilarity import (
    DatasetDissimilarity,
    DissimilarityParams,
    DistanceReport,
    Histogram,
    cosine_distance,
    density_distance_round,
    js_divergence,
    measure_dissimilarity,
    nn_distance_round,
    shared_histograms,
    subsample_pair,
)
from .errors import (
    ExtractorError,
    FormatError,
    MixmoodError,
    TrainingError,
    ValidationError,
)
from .featurize import (
    FlattenFeatures,
    OnnxModelFeatures,
    PreprocessStats,
    RandomProjectionFeatures,
    compute_stats,
    extract_features,
    gen_gaussian_noise,
    gen_sap_noise,
    resize,
    standardize,
)
from .io import (
    load_csv_matrix,
    load_fmat,
    load_imgb,
    load_png_dir,
    save_fmat,
    save_imgb,
)
from .mixmatch import (
    MixMatchClassifier,
    MixMatchConfig,
    MlpClassifier,
    SyntheticTask,
    TrainMetrics,
    gen_synthetic_task,
    guess_labels,
    mixmatch_grads,
    mixmatch_loss,
    mixup,
    rampup,
    sharpen,
    train_mixmatch,
)
from .ranking import (
    CorrelationTable,
    RankingReport,
    correlate_bundled,
    correlate_tables,
    emit_ranking_json,
    load_accuracy_table,
    load_distance_table,
    rank_candidates,
)
from .rng import PortableRng, derive_round_seed, splitmix64
from .stats import PearsonResult, WilcoxonResult, pearson, wilcoxon_signed_rank

__all__ = [
    "CorrelationTable",
    "DatasetDissimilarity",
    "DissimilarityParams",
    "DistanceReport",
    "ExtractorError",
    "FlattenFeatures",
    "FormatError",
    "Histogram",
    "MixMatchClassifier",
    "MixMatchConfig",
    "MixmoodError",
    "MlpClassifier",
    "OnnxModelFeatures",
    "PearsonResult",
    "PortableRng",
    "PreprocessStats",
    "RandomProjectionFeatures",
    "RankingReport",
    "SyntheticTask",
    "TrainMetrics",
    "TrainingError",
    "ValidationError",
    "WilcoxonResult",
    "compute_stats",
    "correlate_bundled",
    "correlate_tables",
    "cosine_distance",
    "density_distance_round",
    "derive_round_seed",
    "emit_ranking_json",
    "extract_features",
    "gen_gaussian_noise",
    "gen_sap_noise",
    "gen_synthetic_task",
    "guess_labels",
    "js_divergence",
    "load_accuracy_table",
    "load_csv_matrix",
    "load_distance_table",
    "load_fmat",
    "load_imgb",
    "load_png_dir",
    "measure_dissimilarity",
    "mixmatch_grads",
    "mixmatch_loss",
    "mixup",
    "nn_distance_round",
    "pearson",
    "rampup",
    "rank_candidates",
    "resize",
    "save_fmat",
    "save_imgb",
    "sharpen",
    "shared_histograms",
    "splitmix64",
    "standardize",
    "subsample_pair",
    "train_mixmatch",
    "wilcoxon_signed_rank",
]
