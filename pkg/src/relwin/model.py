"""The trained localization model: shared GP plus scoring weights, one document.

A LocalizationModel bundles the fitted relation GP with the structured
scoring weights and serializes to a single JSON document.  The GP solve
state is stored alongside the training data so a reloaded model reproduces
predictions bit for bit without refactorizing.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .fileio import check_schema_version, read_json_doc, write_json_doc
from .gp import GPModel, KernelConfig, gp_fit, kernel_matrix, learn_kernel, predict_batch
from .hyperfeatures import FEATURE_NAMES, N_FEATURES, SCORE_SLICE, SceneContext, as_weights
from .learner import TrainState, build_training_image, train_structured
from .synthdata import SceneInstance
from .geometry import relations_to

__all__ = [
    "LocalizationModel",
    "TrainOptions",
    "save_model",
    "load_model",
    "assemble_gp_training_set",
    "train_localization_model",
]

MODEL_SCHEMA_VERSION = "1.0"
MODEL_KIND = "relwin/model"


@dataclass
class LocalizationModel:
    """Fitted GP and scoring weights, plus training metadata."""

    gp: GPModel
    weights: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.weights = as_weights(self.weights)

    def context_for(self, scene: SceneInstance) -> SceneContext:
        """Build the scoring context for one scene: predictions plus kernel."""
        mu, sigma = predict_batch(self.gp, scene.features)
        if mu.shape[1] != 3:
            raise ValidationError("localization model requires a 3-target GP")
        kernel = kernel_matrix(self.gp.config, scene.features)
        return SceneContext(scene.windows, scene.features, mu, sigma, kernel)


def save_model(model: LocalizationModel, path) -> None:
    """Serialize the model (kernel config, GP state, weights) to one document."""
    cfg = model.gp.config
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": MODEL_KIND,
        "kernel": {
            "length_scales": cfg.length_scales.tolist(),
            "signal_variance": float(cfg.signal_variance),
            "noise_variance": float(cfg.noise_variance),
        },
        "gp": {
            "inputs": model.gp.inputs.tolist(),
            "targets": model.gp.targets.tolist(),
            "chol": model.gp.chol.tolist(),
            "solve": model.gp.solve.tolist(),
        },
        "weights": model.weights.tolist(),
        "feature_names": list(FEATURE_NAMES),
        "info": model.info,
    }
    write_json_doc(path, doc)


def load_model(path) -> LocalizationModel:
    """Load a model document, rejecting unknown schema majors."""
    doc = read_json_doc(path, expected_kind=MODEL_KIND)
    check_schema_version(doc, 1, path)
    try:
        kcfg = KernelConfig(np.asarray(doc["kernel"]["length_scales"], dtype=float),
                            float(doc["kernel"]["signal_variance"]),
                            float(doc["kernel"]["noise_variance"]))
        gp_doc = doc["gp"]
        gp = GPModel(kcfg,
                     np.asarray(gp_doc["inputs"], dtype=float),
                     np.asarray(gp_doc["targets"], dtype=float),
                     np.asarray(gp_doc["chol"], dtype=float),
                     np.asarray(gp_doc["solve"], dtype=float))
        weights = np.asarray(doc["weights"], dtype=float)
        info = doc.get("info", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed model document: {exc}") from exc
    if doc.get("feature_names") != list(FEATURE_NAMES):
        raise ValidationError(f"{path}: model feature layout does not match this package")
    return LocalizationModel(gp, weights, info if isinstance(info, dict) else {})


def assemble_gp_training_set(scenes, cap: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack (appearance, relation-to-ground-truth) pairs across scenes.

    Scenes without ground truth are skipped.  When more than `cap` windows
    are available, a seeded uniform subsample (without replacement, kept in
    original order) is taken.
    """
    inputs = []
    targets = []
    for scene in scenes:
        if scene.ground_truth is None:
            continue
        inputs.append(scene.features)
        targets.append(relations_to(scene.windows, scene.ground_truth))
    if not inputs:
        raise ValidationError("no scene with ground truth to fit the GP on")
    X = np.vstack(inputs)
    Y = np.vstack(targets)
    if cap and X.shape[0] > cap:
        idx = np.random.default_rng([seed, 0x6B5]).choice(X.shape[0], size=cap, replace=False)
        idx.sort()
        X, Y = X[idx], Y[idx]
    return X, np.clip(Y, 0.0, 1.0)


@dataclass(frozen=True)
class TrainOptions:
    """End-to-end training knobs (GP, kernel search, structured learner)."""

    gamma: float = 1.0
    epsilon: float = 1e-3
    max_rounds: int = 100
    kernel_length: float = 1.0
    kernel_signal: float = 1.0
    kernel_noise: float = 5e-3
    kernel_iterations: int = 10
    gp_subsample: int = 512
    seed: int = 0
    features: str = "full"      # "full" or "score_only"
    threads: int = 1

    def __post_init__(self) -> None:
        if self.features not in ("full", "score_only"):
            raise ValidationError(f"unknown feature set {self.features!r}")
        if self.threads < 1:
            raise ValidationError("threads must be at least 1")
        if self.gp_subsample < 1:
            raise ValidationError("gp_subsample must be at least 1")


def _feature_mask(kind: str) -> np.ndarray | None:
    if kind == "full":
        return None
    mask = np.zeros(N_FEATURES)
    mask[SCORE_SLICE] = 1.0
    return mask


def train_localization_model(scenes, opts: TrainOptions = TrainOptions()
                             ) -> tuple[LocalizationModel, TrainState]:
    """Fit the GP, then train the scoring weights by cutting planes.

    Returns the model plus the full TrainState (objective trace, working
    set, convergence flag).  Thread count only parallelizes per-scene
    feature precomputation and cannot change results.
    """
    scenes = [s for s in scenes if s.ground_truth is not None]
    if not scenes:
        raise ValidationError("training needs at least one scene with ground truth")
    X, Y = assemble_gp_training_set(scenes, opts.gp_subsample, opts.seed)
    init = KernelConfig.isotropic(X.shape[1], opts.kernel_length,
                                  opts.kernel_signal, opts.kernel_noise)
    search = learn_kernel(X, Y, init, opts.kernel_iterations)
    gp = gp_fit(X, Y, search.config)
    shell = LocalizationModel(gp, np.zeros(N_FEATURES), {})
    mask = _feature_mask(opts.features)

    def build(indexed_scene) -> object:
        i, scene = indexed_scene
        image = build_training_image(shell.context_for(scene), scene.ground_truth,
                                     scene.scene_id)
        if mask is None:
            return image
        return type(image)(image.image_id, image.features * mask, image.loss,
                           image.best_index)

    if opts.threads > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            images = list(pool.map(build, enumerate(scenes)))
    else:
        images = [build(item) for item in enumerate(scenes)]

    state = train_structured(images, gamma=opts.gamma, epsilon=opts.epsilon,
                             max_rounds=opts.max_rounds)
    info = {
        "gamma": opts.gamma,
        "epsilon": opts.epsilon,
        "rounds": state.rounds,
        "converged": state.converged,
        "objective": state.objective_trace[-1] if state.objective_trace else 0.0,
        "kernel_search_improved": len(search.trace) > 1,
        "kernel_search_warning": search.warning,
        "features": opts.features,
        "seed": opts.seed,
        "train_scenes": len(scenes),
        "gp_points": int(gp.n_train),
    }
    return LocalizationModel(gp, state.weights, info), state
