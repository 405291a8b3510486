"""Shared builders for randomized scenes and scene contexts."""

from __future__ import annotations

import numpy as np
import pytest

from relwin.geometry import as_window_array
from relwin.gp import KernelConfig, kernel_matrix
from relwin.hyperfeatures import SceneContext


def random_windows(rng: np.random.Generator, n: int, extent=(100.0, 100.0)) -> np.ndarray:
    """n random axis-aligned boxes with positive area inside the extent."""
    width, height = extent
    x0 = rng.uniform(0.0, width * 0.9, size=n)
    y0 = rng.uniform(0.0, height * 0.9, size=n)
    dx = rng.uniform(0.5, width * 0.5, size=n)
    dy = rng.uniform(0.5, height * 0.5, size=n)
    boxes = np.stack([x0, y0, np.minimum(x0 + dx, width), np.minimum(y0 + dy, height)],
                     axis=1)
    return as_window_array(boxes)


def random_context(rng: np.random.Generator, n: int, dim: int = 4,
                   length: float = 1.5) -> SceneContext:
    """Context with a genuine RBF kernel (symmetric by construction) and
    synthetic relation predictions; mu may stray slightly outside [0, 1]
    the way raw GP means do."""
    windows = random_windows(rng, n)
    features = rng.normal(size=(n, dim))
    cfg = KernelConfig.isotropic(dim, length)
    k = kernel_matrix(cfg, features)
    mu = rng.uniform(-0.1, 1.1, size=(n, 3))
    sigma = rng.uniform(0.01, 0.6, size=n)
    return SceneContext(windows, features, mu, sigma, k)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
