"""Moment-of-inertia image features and one-vs-rest kernel SVM classification."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .evaluation import (  # noqa: F401
    Metrics,
    SplitConfig,
    class_statistics,
    evaluate,
    stratified_split,
    trend_check,
)
from .features import (  # noqa: F401
    FeatureVector,
    Standardizer,
    apply_standardizer,
    extract_features,
    fit_standardizer,
)
from .inertia import (  # noqa: F401
    EigenPair,
    InertiaTensor,
    asymmetry,
    compute_tensor,
    coordinate_grid,
    eigenvalues,
    total_mass,
)
from .ingest import ClassLabel, DatasetManifest, GrayImage, load_image, scan_dataset  # noqa: F401
from .svm import (  # noqa: F401
    BinarySvmModel,
    KernelSpec,
    MultiClassModel,
    TrainConfig,
    decision,
    kernel_eval,
    predict,
    train_binary,
    train_multiclass,
)
