"""Axis-aligned windows and the spatial relations between them.

A window is a rectangle [x_min, x_max) x [y_min, y_max) in continuous image
coordinates.  The relation descriptor between an ordered pair of windows is
the triple

    (overlap, part, container)
      overlap   = |w & w2| / |w | w2|      intersection over union
      part      = |w & w2| / |w|           how much of w lies inside w2
      container = |w & w2| / |w2|          how much of w2 lies inside w

Every component lies in [0, 1]; all three are 1 exactly when the windows are
identical and all three are 0 exactly when they are disjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "Window",
    "RelationTriple",
    "intersection_area",
    "relation_descriptor",
    "overlap_loss",
    "as_window_array",
    "window_areas",
    "relations_to",
    "relation_tensor",
    "overlaps_with",
]


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle with strictly positive width and height."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(isinstance(c, (int, float)) and math.isfinite(c) for c in coords):
            raise ValidationError(f"window coordinates must be finite numbers: {coords!r}")
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValidationError(f"window must have positive width and height: {coords!r}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_array(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.x_max, self.y_max], dtype=float)

    @classmethod
    def from_sequence(cls, seq) -> "Window":
        vals = list(seq)
        if len(vals) != 4:
            raise ValidationError(f"window needs exactly 4 coordinates, got {len(vals)}")
        return cls(float(vals[0]), float(vals[1]), float(vals[2]), float(vals[3]))


@dataclass(frozen=True)
class RelationTriple:
    """Relation descriptor (overlap, part, container) for an ordered window pair."""

    overlap: float
    part: float
    container: float

    def as_array(self) -> np.ndarray:
        return np.array([self.overlap, self.part, self.container], dtype=float)


def intersection_area(w: Window, w2: Window) -> float:
    """Area of the intersection of two windows (0.0 when disjoint).

    Args:
      w: first window.
      w2: second window.

    Returns:
      Nonnegative intersection area.
    """
    dx = min(w.x_max, w2.x_max) - max(w.x_min, w2.x_min)
    dy = min(w.y_max, w2.y_max) - max(w.y_min, w2.y_min)
    if dx <= 0.0 or dy <= 0.0:
        return 0.0
    return dx * dy


def relation_descriptor(w: Window, w2: Window) -> RelationTriple:
    """Relation triple (overlap, part, container) of the ordered pair (w, w2).

    Args:
      w: first window.
      w2: second window.

    Returns:
      RelationTriple with every component in [0, 1].
    """
    inter = intersection_area(w, w2)
    a, b = w.area, w2.area
    # max() guards float round-off; mathematically union >= max(a, b) >= inter.
    union = max(a + b - inter, a, b, inter)
    return RelationTriple(inter / union, inter / a, inter / b)


def overlap_loss(w: Window, w2: Window) -> float:
    """Localization loss 1 - overlap(w, w2).

    Zero exactly for identical windows, one exactly for disjoint windows,
    and symmetric in its arguments.
    """
    return 1.0 - relation_descriptor(w, w2).overlap


def as_window_array(windows) -> np.ndarray:
    """Validate and convert windows to a float64 array of shape (N, 4).

    Accepts an (N, 4) array-like or a sequence of Window objects.  Raises
    ValidationError on non-finite coordinates or empty extents.
    """
    if isinstance(windows, np.ndarray):
        arr = windows.astype(float, copy=False)
    else:
        rows = [w.as_array() if isinstance(w, Window) else np.asarray(w, dtype=float) for w in windows]
        if not rows:
            raise ValidationError("window array must not be empty")
        arr = np.stack(rows)
    if arr.ndim != 2 or arr.shape[1] != 4 or arr.shape[0] == 0:
        raise ValidationError(f"expected an (N, 4) window array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("window coordinates must be finite")
    if np.any(arr[:, 2] <= arr[:, 0]) or np.any(arr[:, 3] <= arr[:, 1]):
        raise ValidationError("all windows must have positive width and height")
    return arr


def window_areas(windows: np.ndarray) -> np.ndarray:
    """Areas of an (N, 4) window array."""
    return (windows[:, 2] - windows[:, 0]) * (windows[:, 3] - windows[:, 1])


def _intersections_with(windows: np.ndarray, box: np.ndarray) -> np.ndarray:
    dx = np.minimum(windows[:, 2], box[2]) - np.maximum(windows[:, 0], box[0])
    dy = np.minimum(windows[:, 3], box[3]) - np.maximum(windows[:, 1], box[1])
    return np.clip(dx, 0.0, None) * np.clip(dy, 0.0, None)


def relations_to(windows: np.ndarray, box) -> np.ndarray:
    """Relation triples rho(w_i, box) for every window in an (N, 4) array.

    Args:
      windows: (N, 4) window array.
      box: single window as a length-4 sequence or Window.

    Returns:
      (N, 3) array with columns (overlap, part, container).
    """
    if isinstance(box, Window):
        box = box.as_array()
    box = np.asarray(box, dtype=float).reshape(4)
    inter = _intersections_with(windows, box)
    areas = window_areas(windows)
    box_area = (box[2] - box[0]) * (box[3] - box[1])
    union = np.maximum.reduce([areas + box_area - inter, areas, np.full_like(areas, box_area), inter])
    return np.stack([inter / union, inter / areas, inter / box_area], axis=1)


def relation_tensor(windows: np.ndarray) -> np.ndarray:
    """All-pairs relation triples for an (N, 4) window array.

    Returns:
      (N, N, 3) array R with R[i, l] = rho(w_i, w_l).
    """
    x0 = np.maximum(windows[:, None, 0], windows[None, :, 0])
    y0 = np.maximum(windows[:, None, 1], windows[None, :, 1])
    x1 = np.minimum(windows[:, None, 2], windows[None, :, 2])
    y1 = np.minimum(windows[:, None, 3], windows[None, :, 3])
    inter = np.clip(x1 - x0, 0.0, None) * np.clip(y1 - y0, 0.0, None)
    areas = window_areas(windows)
    a_i = np.broadcast_to(areas[:, None], inter.shape)
    a_l = np.broadcast_to(areas[None, :], inter.shape)
    union = np.maximum.reduce([a_i + a_l - inter, a_i, a_l, inter])
    return np.stack([inter / union, inter / a_i, inter / a_l], axis=2)


def overlaps_with(windows: np.ndarray, box) -> np.ndarray:
    """Overlap (IoU) of every window in an (N, 4) array with a single box."""
    return relations_to(windows, box)[:, 0]
