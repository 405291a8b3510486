"""Deterministic synthetic scenes for training, evaluation, and benchmarks.

Each scene places a ground-truth box in a continuous image extent and samples
candidate windows around it: a configured fraction are near-ground-truth
(overlap > 0.5 enforced), the rest are uniform background boxes.  Appearance
vectors come from one fixed smooth map, shared by every scene of a config
(random affine plus a sinusoidal warp, seeded from the config), applied to a
code built from each window's true relation triple to the ground truth and
its normalized geometry, plus isotropic noise.  A GP can therefore learn to
predict relations from appearance.

The container scenario keeps the ground truth small and makes appearance
deliberately ambiguous for two groups: windows tightly covering the target
share their appearance code with displaced decoys of the same size, and true
container windows share theirs with near-miss windows that do not contain
the target.  Predicted means alone then misrank the decoys, while the
pairwise and consistency families still separate them through the container
windows' relations.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError
from .fileio import check_schema_version, read_json_doc, write_json_doc
from .geometry import as_window_array, relations_to, window_areas

__all__ = [
    "GenConfig",
    "SceneInstance",
    "DatasetFile",
    "NEAR_OVERLAP_FLOOR",
    "generate_scene",
    "generate_scenes",
    "generate_container_scenes",
    "save_dataset",
    "load_dataset",
]

DATASET_SCHEMA_VERSION = "1.0"
DATASET_KIND = "relwin/dataset"
# Minimum overlap with ground truth for a candidate to count as "near".
NEAR_OVERLAP_FLOOR = 0.5
# Geometry block weight inside the appearance code: appearance similarity is
# driven primarily by the relation triple, absolute position stays secondary.
_GEO_WEIGHT = 0.3
_REJECTION_TRIES = 64


@dataclass(frozen=True)
class GenConfig:
    """Scene-generator configuration; (seed, index) fully determine a scene."""

    seed: int = 0
    n_candidates: int = 120
    extent: tuple = (640.0, 480.0)
    scale_range: tuple = (0.2, 0.55)
    near_fraction: float = 0.3
    container_scenario: bool = False
    feature_dim: int = 8
    noise: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))
        object.__setattr__(self, "scale_range", tuple(float(v) for v in self.scale_range))
        if self.n_candidates < 1:
            raise ValidationError("n_candidates must be at least 1")
        if len(self.extent) != 2 or any(not math.isfinite(v) or v <= 0.0 for v in self.extent):
            raise ValidationError("extent must be two positive finite numbers")
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValidationError("scale_range must satisfy 0 < lo <= hi <= 1")
        if not 0.0 <= self.near_fraction <= 1.0:
            raise ValidationError("near_fraction must lie in [0, 1]")
        if self.feature_dim < 1:
            raise ValidationError("feature_dim must be at least 1")
        if not (math.isfinite(self.noise) and self.noise >= 0.0):
            raise ValidationError("noise must be finite and nonnegative")
        if self.container_scenario and self.n_candidates < 12:
            raise ValidationError("container scenario needs at least 12 candidates")


@dataclass
class SceneInstance:
    """One generated scene: windows, appearance vectors, optional ground truth."""

    scene_id: str
    extent: tuple
    windows: np.ndarray        # (N, 4)
    features: np.ndarray       # (N, D)
    ground_truth: np.ndarray | None   # (4,) or None

    def to_dict(self) -> dict:
        return {
            "id": self.scene_id,
            "extent": [float(v) for v in self.extent],
            "windows": self.windows.tolist(),
            "features": self.features.tolist(),
            "ground_truth": None if self.ground_truth is None else list(self.ground_truth),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneInstance":
        try:
            scene_id = str(doc["id"])
            extent = tuple(float(v) for v in doc["extent"])
            windows = as_window_array(np.asarray(doc["windows"], dtype=float))
            features = np.asarray(doc["features"], dtype=float)
            gt_raw = doc["ground_truth"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed scene record: {exc}") from exc
        if features.ndim != 2 or features.shape[0] != windows.shape[0]:
            raise ValidationError(
                f"scene {scene_id}: features shape {features.shape} does not match "
                f"{windows.shape[0]} windows")
        if not np.all(np.isfinite(features)):
            raise ValidationError(f"scene {scene_id}: features must be finite")
        ground_truth = None
        if gt_raw is not None:
            ground_truth = as_window_array(np.asarray(gt_raw, dtype=float).reshape(1, 4))[0]
        return cls(scene_id, extent, windows, features, ground_truth)


def _embedding_params(cfg: GenConfig):
    rng = np.random.default_rng([cfg.seed, 0xE3B])
    lin = rng.normal(size=(cfg.feature_dim, 6)) / math.sqrt(6.0)
    offset = rng.normal(size=cfg.feature_dim) * 0.3
    warp = rng.normal(size=(cfg.feature_dim, 6)) * 1.7
    phase = rng.uniform(0.0, 2.0 * math.pi, size=cfg.feature_dim)
    return lin, offset, warp, phase


def _embed(cfg: GenConfig, codes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    lin, offset, warp, phase = _embedding_params(cfg)
    x = codes @ lin.T + offset + 0.35 * np.sin(codes @ warp.T + phase)
    if cfg.noise > 0.0:
        x = x + cfg.noise * rng.normal(size=x.shape)
    return x


def _geometry_code(windows: np.ndarray, extent) -> np.ndarray:
    width, height = extent
    base = min(width, height)
    cx = 0.5 * (windows[:, 0] + windows[:, 2]) / width
    cy = 0.5 * (windows[:, 1] + windows[:, 3]) / height
    scale = np.log(np.sqrt(window_areas(windows)) / base)
    return _GEO_WEIGHT * np.stack([cx, cy, scale], axis=1)


def _random_box(rng: np.random.Generator, extent, lo: float, hi: float) -> np.ndarray:
    width, height = extent
    base = min(width, height)
    sides = np.minimum(base * rng.uniform(lo, hi, size=2), [width, height])
    cx = rng.uniform(sides[0] / 2.0, width - sides[0] / 2.0)
    cy = rng.uniform(sides[1] / 2.0, height - sides[1] / 2.0)
    return np.array([cx - sides[0] / 2.0, cy - sides[1] / 2.0,
                     cx + sides[0] / 2.0, cy + sides[1] / 2.0])


def _clamp_box(center: np.ndarray, sides: np.ndarray, extent) -> np.ndarray:
    width, height = extent
    sides = np.minimum(sides, [width, height])
    cx = float(np.clip(center[0], sides[0] / 2.0, width - sides[0] / 2.0))
    cy = float(np.clip(center[1], sides[1] / 2.0, height - sides[1] / 2.0))
    return np.array([cx - sides[0] / 2.0, cy - sides[1] / 2.0,
                     cx + sides[0] / 2.0, cy + sides[1] / 2.0])


def _box_center(box: np.ndarray) -> np.ndarray:
    return np.array([0.5 * (box[0] + box[2]), 0.5 * (box[1] + box[3])])


def _box_sides(box: np.ndarray) -> np.ndarray:
    return np.array([box[2] - box[0], box[3] - box[1]])


def _overlap(a: np.ndarray, b: np.ndarray) -> float:
    return float(relations_to(a.reshape(1, 4), b)[0, 0])


def _intersects(a: np.ndarray, b: np.ndarray) -> bool:
    return min(a[2], b[2]) > max(a[0], b[0]) and min(a[3], b[3]) > max(a[1], b[1])


def _contains(outer: np.ndarray, inner: np.ndarray) -> bool:
    return bool(outer[0] <= inner[0] and outer[1] <= inner[1]
                and outer[2] >= inner[2] and outer[3] >= inner[3])


def _near_box(rng: np.random.Generator, gt: np.ndarray, extent,
              pos_jitter: float = 0.07, size_jitter: float = 0.12) -> np.ndarray:
    """Jittered copy of the ground truth with overlap above NEAR_OVERLAP_FLOOR."""
    gt_center = _box_center(gt)
    gt_sides = _box_sides(gt)
    for _ in range(_REJECTION_TRIES):
        sides = gt_sides * np.exp(size_jitter * rng.normal(size=2))
        center = gt_center + pos_jitter * gt_sides * rng.normal(size=2)
        box = _clamp_box(center, sides, extent)
        if _overlap(box, gt) > NEAR_OVERLAP_FLOOR:
            return box
    return gt.copy()


def _displaced_box(rng: np.random.Generator, gt: np.ndarray, extent,
                   size_jitter: float = 0.12) -> np.ndarray:
    """Box with the ground truth's size distribution but disjoint from it."""
    width, height = extent
    gt_sides = _box_sides(gt)
    box = None
    for _ in range(_REJECTION_TRIES):
        sides = np.minimum(gt_sides * np.exp(size_jitter * rng.normal(size=2)), [width, height])
        cx = rng.uniform(sides[0] / 2.0, width - sides[0] / 2.0)
        cy = rng.uniform(sides[1] / 2.0, height - sides[1] / 2.0)
        box = _clamp_box(np.array([cx, cy]), sides, extent)
        if not _intersects(box, gt):
            return box
    # Deterministic fallback: anchor at the corner farthest from the target.
    gt_center = _box_center(gt)
    sides = _box_sides(box)
    cx = sides[0] / 2.0 if gt_center[0] > width / 2.0 else width - sides[0] / 2.0
    cy = sides[1] / 2.0 if gt_center[1] > height / 2.0 else height - sides[1] / 2.0
    return _clamp_box(np.array([cx, cy]), sides, extent)


def _container_box(rng: np.random.Generator, gt: np.ndarray, extent) -> np.ndarray:
    """Box fully containing the ground truth, 1.9x to 3.4x its side lengths."""
    gt_center = _box_center(gt)
    gt_sides = _box_sides(gt)
    sides = np.minimum(gt_sides * rng.uniform(1.9, 3.4, size=2),
                       [extent[0] * 0.95, extent[1] * 0.95])
    max_off = np.maximum(sides - gt_sides, 0.0) / 2.0
    center = gt_center + rng.uniform(-0.7, 0.7, size=2) * max_off
    # Clamping into the extent cannot break containment: the recentring never
    # moves the center farther than max_off from the ground-truth center.
    return _clamp_box(center, sides, extent)


def _near_miss_box(rng: np.random.Generator, gt: np.ndarray, extent) -> np.ndarray:
    """Container-sized box that does not contain the ground truth."""
    gt_center = _box_center(gt)
    gt_sides = _box_sides(gt)
    box = None
    for _ in range(_REJECTION_TRIES):
        sides = np.minimum(gt_sides * rng.uniform(1.9, 3.4, size=2),
                           [extent[0] * 0.95, extent[1] * 0.95])
        max_off = np.maximum(sides - gt_sides, 0.0) / 2.0
        axis = int(rng.integers(0, 2))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        offset = np.empty(2)
        offset[axis] = sign * (max_off[axis] + gt_sides[axis] * rng.uniform(0.3, 1.2))
        other = 1 - axis
        offset[other] = rng.uniform(-max_off[other], max_off[other])
        box = _clamp_box(gt_center + offset, sides, extent)
        if not _contains(box, gt):
            return box
    return box


def generate_scene(cfg: GenConfig, index: int = 0, scene_id: str | None = None) -> SceneInstance:
    """Generate one scene; fully determined by (cfg, index)."""
    rng = np.random.default_rng([cfg.seed, 0x5CE, int(index)])
    if cfg.container_scenario:
        windows, gt, relation_codes = _container_layout(cfg, rng)
    else:
        windows, gt, relation_codes = _default_layout(cfg, rng)
    perm = rng.permutation(windows.shape[0])
    windows = windows[perm]
    relation_codes = relation_codes[perm]
    codes = np.hstack([relation_codes, _geometry_code(windows, cfg.extent)])
    features = _embed(cfg, codes, rng)
    if scene_id is None:
        scene_id = f"scene-{index:06d}"
    return SceneInstance(scene_id, cfg.extent, windows, features, gt)


def _default_layout(cfg: GenConfig, rng: np.random.Generator):
    lo, hi = cfg.scale_range
    gt = _random_box(rng, cfg.extent, lo, hi)
    n = cfg.n_candidates
    n_near = int(round(cfg.near_fraction * n))
    boxes = [_near_box(rng, gt, cfg.extent) for _ in range(n_near)]
    boxes += [_random_box(rng, cfg.extent, 0.05, 0.85) for _ in range(n - n_near)]
    windows = np.stack(boxes)
    return windows, gt, relations_to(windows, gt)


def _container_layout(cfg: GenConfig, rng: np.random.Generator):
    n = cfg.n_candidates
    n_true = max(1, int(round(0.03 * n)))
    n_decoy = 3 * n_true
    n_containers = max(2, int(round(0.15 * n)))
    n_miss = n_containers
    n_background = n - (n_true + n_decoy + n_containers + n_miss)

    gt = _random_box(rng, cfg.extent, 0.07, 0.13)
    true_boxes = [_near_box(rng, gt, cfg.extent, pos_jitter=0.05, size_jitter=0.08)
                  for _ in range(n_true)]
    decoys = [_displaced_box(rng, gt, cfg.extent) for _ in range(n_decoy)]
    containers = [_container_box(rng, gt, cfg.extent) for _ in range(n_containers)]
    misses = [_near_miss_box(rng, gt, cfg.extent) for _ in range(n_miss)]
    background = [_random_box(rng, cfg.extent, 0.05, 0.8) for _ in range(n_background)]
    windows = np.stack(true_boxes + decoys + containers + misses + background)

    # Appearance codes: targets and decoys share one signature ("tight window
    # on the object"), containers and near-misses share another ("large
    # window around the object"); backgrounds are honest.
    small = np.array([0.82, 0.90, 0.90])
    small_spread = np.array([0.05, 0.04, 0.04])
    large = np.array([0.06, 0.05, 0.97])
    large_spread = np.array([0.03, 0.03, 0.02])
    n_small = n_true + n_decoy
    n_large = n_containers + n_miss
    codes = np.empty((n, 3))
    codes[:n_small] = np.clip(small + small_spread * rng.normal(size=(n_small, 3)), 0.0, 1.0)
    codes[n_small:n_small + n_large] = np.clip(
        large + large_spread * rng.normal(size=(n_large, 3)), 0.0, 1.0)
    if n_background > 0:
        codes[n_small + n_large:] = relations_to(windows[n_small + n_large:], gt)
    return windows, gt, codes


def generate_scenes(cfg: GenConfig, count: int, start: int = 0,
                    id_prefix: str = "scene") -> list:
    """Generate `count` scenes with rng indices start..start+count-1."""
    if count < 0:
        raise ValidationError("count must be nonnegative")
    return [generate_scene(cfg, start + i, f"{id_prefix}-{i:06d}") for i in range(count)]


def generate_container_scenes(cfg: GenConfig, count: int, start: int = 0,
                              id_prefix: str = "scene") -> list:
    """Container-scenario counterpart of generate_scenes."""
    if not cfg.container_scenario:
        cfg = GenConfig(**{**asdict(cfg), "container_scenario": True})
    return generate_scenes(cfg, count, start, id_prefix)


@dataclass
class DatasetFile:
    """A loaded dataset split."""

    split: str
    scenes: list
    generator: dict | None


def save_dataset(path, scenes, split: str, config: GenConfig | None = None) -> None:
    """Write one split as a single JSON document (.gz paths are gzipped)."""
    doc = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "kind": DATASET_KIND,
        "split": str(split),
        "generator": None if config is None else asdict(config),
        "scenes": [scene.to_dict() for scene in scenes],
    }
    write_json_doc(path, doc)


def load_dataset(path) -> DatasetFile:
    """Read a dataset split, rejecting unknown schema majors."""
    doc = read_json_doc(path, expected_kind=DATASET_KIND)
    check_schema_version(doc, 1, path)
    raw_scenes = doc.get("scenes")
    if not isinstance(raw_scenes, list):
        raise ValidationError(f"{path}: dataset has no scene list")
    scenes = [SceneInstance.from_dict(rec) for rec in raw_scenes]
    return DatasetFile(str(doc.get("split", "")), scenes, doc.get("generator"))
