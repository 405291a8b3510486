"""Relation-aware window localization.

Scores candidate windows by how well the spatial relations they form with the
rest of a scene match relations predicted from appearance, and localizes by
maximizing a learned linear combination of relation-derived features.
"""

from .errors import GPFitError, InvariantError, RelwinError, ValidationError
from .evaluation import (
    EvalRecord,
    EvalReport,
    OverlapCurve,
    curve_to_csv,
    evaluate_model,
    overlap_curve,
    summarize,
)
from .geometry import (
    RelationTriple,
    Window,
    as_window_array,
    intersection_area,
    overlap_loss,
    overlaps_with,
    relation_descriptor,
    relation_tensor,
    relations_to,
    window_areas,
)
from .gp import (
    GPModel,
    KernelConfig,
    KernelSearchResult,
    RelationPrediction,
    gp_fit,
    gp_predict,
    kernel,
    kernel_matrix,
    learn_kernel,
    log_marginal_likelihood,
    predict_batch,
)
from .hyperfeatures import (
    FEATURE_NAMES,
    N_FEATURES,
    SceneContext,
    consistency_features,
    feature_matrix,
    feature_vector,
    global_features,
    local_features,
    score,
    score_features,
)
from .inference import InferenceResult, infer_brute, infer_fast, score_upper_bound
from .learner import (
    MarginConstraint,
    QPSolution,
    TrainingImage,
    TrainState,
    best_candidate,
    build_training_image,
    most_violated_constraint,
    solve_qp,
    train_structured,
)
from .model import (
    LocalizationModel,
    TrainOptions,
    assemble_gp_training_set,
    load_model,
    save_model,
    train_localization_model,
)
from .synthdata import (
    DatasetFile,
    GenConfig,
    SceneInstance,
    generate_container_scenes,
    generate_scene,
    generate_scenes,
    load_dataset,
    save_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES",
    "N_FEATURES",
    "DatasetFile",
    "EvalRecord",
    "EvalReport",
    "GPFitError",
    "GPModel",
    "GenConfig",
    "InferenceResult",
    "InvariantError",
    "KernelConfig",
    "KernelSearchResult",
    "LocalizationModel",
    "MarginConstraint",
    "OverlapCurve",
    "QPSolution",
    "RelationPrediction",
    "RelationTriple",
    "RelwinError",
    "SceneContext",
    "SceneInstance",
    "TrainOptions",
    "TrainState",
    "TrainingImage",
    "ValidationError",
    "Window",
    "as_window_array",
    "assemble_gp_training_set",
    "best_candidate",
    "build_training_image",
    "consistency_features",
    "curve_to_csv",
    "evaluate_model",
    "feature_matrix",
    "feature_vector",
    "generate_container_scenes",
    "generate_scene",
    "generate_scenes",
    "global_features",
    "gp_fit",
    "gp_predict",
    "infer_brute",
    "infer_fast",
    "intersection_area",
    "kernel",
    "kernel_matrix",
    "learn_kernel",
    "load_dataset",
    "load_model",
    "local_features",
    "log_marginal_likelihood",
    "most_violated_constraint",
    "overlap_curve",
    "overlap_loss",
    "overlaps_with",
    "predict_batch",
    "relation_descriptor",
    "relation_tensor",
    "relations_to",
    "save_dataset",
    "save_model",
    "score",
    "score_features",
    "score_upper_bound",
    "solve_qp",
    "summarize",
    "train_localization_model",
    "train_structured",
    "window_areas",
]
