"""Scoring-quality evaluation: per-scene picks and coverage/overlap curves.

Every evaluated scene contributes its top-scoring window; records are ranked
by score (descending, ties by scene id) and the curve reports, for each
coverage fraction on a 1% grid, the mean ground-truth overlap over the
highest-scored prefix.  A model whose score correlates with localization
quality yields a curve that decreases toward the unconditional mean at
coverage 1.0.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import overlaps_with
from .inference import infer_fast
from .model import LocalizationModel

__all__ = [
    "EvalRecord",
    "EvalReport",
    "OverlapCurve",
    "evaluate_model",
    "overlap_curve",
    "curve_to_csv",
    "summarize",
]

SUMMARY_COVERAGES = (0.1, 0.35, 0.5, 1.0)


@dataclass(frozen=True)
class EvalRecord:
    """Top-scoring window of one scene and its ground-truth overlap."""

    scene_id: str
    best_index: int
    window: np.ndarray
    score: float
    overlap: float


@dataclass(frozen=True)
class EvalReport:
    """Evaluation outcome: one record per scored scene plus the skip count."""

    records: list
    skipped: int


def evaluate_model(model: LocalizationModel, scenes, threads: int = 1) -> EvalReport:
    """Run inference on every scene with ground truth; skip and count the rest."""
    scenes = list(scenes)
    scored = [s for s in scenes if s.ground_truth is not None]
    skipped = len(scenes) - len(scored)

    def one(scene) -> EvalRecord:
        ctx = model.context_for(scene)
        result = infer_fast(model.weights, ctx)
        window = scene.windows[result.best_index]
        overlap = float(overlaps_with(window.reshape(1, 4), scene.ground_truth)[0])
        return EvalRecord(scene.scene_id, result.best_index, window.copy(),
                          result.best_score, overlap)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, scored))
    else:
        records = [one(s) for s in scored]
    return EvalReport(records, skipped)


def _ranked_overlaps(records) -> np.ndarray:
    order = sorted(range(len(records)),
                   key=lambda i: (-records[i].score, records[i].scene_id))
    return np.array([records[i].overlap for i in order])


def _prefix_mean(cumulative: np.ndarray, size: int) -> float:
    return float(cumulative[size - 1]) / size


@dataclass(frozen=True)
class OverlapCurve:
    """Mean overlap of the top-scored prefix at each coverage fraction."""

    coverages: np.ndarray
    mean_overlaps: np.ndarray


def overlap_curve(records, steps: int = 100) -> OverlapCurve:
    """Prefix-mean overlap at `steps` evenly spaced coverage fractions.

    Coverage k/steps uses the ceil(k * n / steps) highest-scored records, so
    coverage 1.0 is exactly the unconditional mean.
    """
    if not records:
        raise ValidationError("overlap curve needs at least one record")
    if steps < 1:
        raise ValidationError("steps must be positive")
    overlaps = _ranked_overlaps(records)
    n = overlaps.size
    cumulative = np.cumsum(overlaps)
    coverages = np.empty(steps)
    means = np.empty(steps)
    for k in range(1, steps + 1):
        size = -(-k * n // steps)  # ceil(k * n / steps) in integer arithmetic
        coverages[k - 1] = k / steps
        means[k - 1] = _prefix_mean(cumulative, size)
    return OverlapCurve(coverages, means)


def curve_to_csv(curve: OverlapCurve) -> str:
    lines = ["coverage,mean_overlap"]
    for c, m in zip(curve.coverages, curve.mean_overlaps):
        lines.append(f"{float(c)!r},{float(m)!r}")
    return "\n".join(lines) + "\n"


def summarize(report: EvalReport) -> dict:
    """Aggregate summary: counts plus mean overlap at the standard coverages."""
    records = report.records
    summary = {
        "scenes_evaluated": len(records),
        "scenes_skipped": report.skipped,
        "mean_overlap": None,
        "coverage_points": {},
    }
    if not records:
        return summary
    overlaps = _ranked_overlaps(records)
    cumulative = np.cumsum(overlaps)
    n = overlaps.size
    summary["mean_overlap"] = _prefix_mean(cumulative, n)
    for coverage in SUMMARY_COVERAGES:
        size = max(1, min(n, -(-int(round(coverage * 100)) * n // 100)))
        summary["coverage_points"][f"{coverage:.2f}"] = _prefix_mean(cumulative, size)
    return summary
