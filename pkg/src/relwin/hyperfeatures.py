"""Context features scored for one candidate window against a whole scene.

Scoring a candidate l inside a scene with N candidate windows uses four
feature families, concatenated into a fixed 11-dimensional vector:

  global (3):       mean over window pairs (i, j) of the disagreement between
                    their relations to l, weighted by appearance similarity
                    K(x_i, x_j).  High when similar-looking windows relate to
                    l differently.
  local (3):        mean over windows i of the distance of their relation to
                    l from the identical-window relation, weighted by
                    K(x_i, x_l).  High when windows that look like l do not
                    coincide with it.
  consistency (3):  worst-case disagreement between the relation each window
                    actually has to l and the relation predicted from its
                    appearance alone.
  score (2):        predicted overlap mean and shared predictive deviation of
                    l itself.

Each 3-vector family covers the (overlap, part, container) relation
components; predictions enter the consistency family clamped to [0, 1] while
the score family copies the raw mean.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .geometry import as_window_array, relation_tensor, relations_to, window_areas

__all__ = [
    "FEATURE_NAMES",
    "N_FEATURES",
    "GLOBAL_SLICE",
    "LOCAL_SLICE",
    "CONSISTENCY_SLICE",
    "SCORE_SLICE",
    "SceneContext",
    "as_weights",
    "global_features",
    "local_features",
    "consistency_features",
    "score_features",
    "feature_vector",
    "feature_matrix",
    "score",
]

FEATURE_NAMES = (
    "global_overlap", "global_part", "global_container",
    "local_overlap", "local_part", "local_container",
    "consistency_overlap", "consistency_part", "consistency_container",
    "score_mu", "score_sigma",
)
N_FEATURES = len(FEATURE_NAMES)
GLOBAL_SLICE = slice(0, 3)
LOCAL_SLICE = slice(3, 6)
CONSISTENCY_SLICE = slice(6, 9)
SCORE_SLICE = slice(9, 11)


class SceneContext:
    """Immutable per-scene bundle: windows, appearance, predictions, kernel.

    Holds everything scoring needs: the (N, 4) windows, their (N, D)
    appearance vectors, raw and clamped predicted relation means (N, 3), the
    shared predictive deviations (N,), and the precomputed appearance kernel
    matrix (N, N).  The all-pairs relation tensor is built lazily and cached
    because it is quadratic in N.
    """

    def __init__(self, windows, features, mu, sigma, kernel) -> None:
        self.windows = as_window_array(windows)
        n = self.windows.shape[0]
        self.features = np.asarray(features, dtype=float)
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValidationError(
                f"features must be (N, D) aligned with {n} windows, got {self.features.shape}")
        self.mu = np.asarray(mu, dtype=float)
        if self.mu.shape != (n, 3):
            raise ValidationError(f"mu must have shape ({n}, 3), got {self.mu.shape}")
        self.sigma = np.asarray(sigma, dtype=float).reshape(-1)
        if self.sigma.shape != (n,):
            raise ValidationError(f"sigma must have shape ({n},), got {self.sigma.shape}")
        self.kernel = np.asarray(kernel, dtype=float)
        if self.kernel.shape != (n, n):
            raise ValidationError(f"kernel must have shape ({n}, {n}), got {self.kernel.shape}")
        for name, arr in (("features", self.features), ("mu", self.mu),
                          ("sigma", self.sigma), ("kernel", self.kernel)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} must be finite")
        if np.any(self.sigma < 0.0):
            raise ValidationError("sigma must be nonnegative")
        if n > 1 and float(np.abs(self.kernel - self.kernel.T).max()) > 1e-12:
            raise ValidationError("kernel matrix must be symmetric within 1e-12")
        self.mu_clamped = np.clip(self.mu, 0.0, 1.0)
        self.areas = window_areas(self.windows)
        self._relations: np.ndarray | None = None
        self._kernel_pair_mean: float | None = None

    @property
    def n(self) -> int:
        return int(self.windows.shape[0])

    def relation_field(self, l: int) -> np.ndarray:
        """Relations rho(w_i, w_l) of every window to candidate l, shape (N, 3)."""
        if self._relations is not None:
            return self._relations[:, l, :]
        return relations_to(self.windows, self.windows[l])

    def relation_tensor(self) -> np.ndarray:
        """Cached all-pairs relation tensor, shape (N, N, 3)."""
        if self._relations is None:
            self._relations = relation_tensor(self.windows)
        return self._relations

    def kernel_pair_mean(self) -> float:
        """Mean kernel value over unordered window pairs (0.0 when N == 1)."""
        if self._kernel_pair_mean is None:
            n = self.n
            if n == 1:
                self._kernel_pair_mean = 0.0
            else:
                off = float(self.kernel.sum()) - float(np.trace(self.kernel))
                self._kernel_pair_mean = off / (n * n - n)
        return self._kernel_pair_mean

    def _check_index(self, l: int) -> int:
        l = int(l)
        if not 0 <= l < self.n:
            raise ValidationError(f"candidate index {l} out of range [0, {self.n})")
        return l


def as_weights(weights) -> np.ndarray:
    """Validate a weight vector: finite float64 of length N_FEATURES."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (N_FEATURES,):
        raise ValidationError(f"weights must have length {N_FEATURES}, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    return w


def _global_from_field(field: np.ndarray, kernel: np.ndarray, buf: np.ndarray | None = None) -> np.ndarray:
    n = field.shape[0]
    if n == 1:
        return np.zeros(3)
    if buf is None:
        buf = np.empty((n, n, 3))
    np.subtract(field[:, None, :], field[None, :, :], out=buf)
    np.abs(buf, out=buf)
    buf *= kernel[:, :, None]
    # Diagonal terms are exactly zero, so the full-matrix sum is twice the
    # pair sum; dividing by N^2 - N yields the mean over unordered pairs.
    return buf.sum(axis=(0, 1)) / (n * n - n)


def global_features(ctx: SceneContext, l: int) -> np.ndarray:
    """Pairwise relation disagreement around candidate l, one value per relation.

    For each relation component r this is the mean over unordered window
    pairs (i, j) of |rho_r(w_i, w_l) - rho_r(w_j, w_l)| * K(x_i, x_j); it is
    defined as (0, 0, 0) for single-window scenes.
    """
    l = ctx._check_index(l)
    return _global_from_field(ctx.relation_field(l), ctx.kernel)


def local_features(ctx: SceneContext, l: int) -> np.ndarray:
    """Appearance-weighted distance of candidate l from windows that resemble it.

    Mean over windows i of |1 - rho_r(w_i, w_l)| * K(x_i, x_l); the i == l
    term is exactly zero.
    """
    l = ctx._check_index(l)
    field = ctx.relation_field(l)
    return (np.abs(1.0 - field) * ctx.kernel[:, l][:, None]).sum(axis=0) / ctx.n


def consistency_features(ctx: SceneContext, l: int) -> np.ndarray:
    """Worst disagreement between observed and predicted relations to l.

    max over windows i (including i == l) of |rho_r(w_i, w_l) - mu_r(x_i)|,
    with the predicted means clamped to [0, 1].
    """
    l = ctx._check_index(l)
    field = ctx.relation_field(l)
    return np.abs(field - ctx.mu_clamped).max(axis=0)


def score_features(ctx: SceneContext, l: int) -> np.ndarray:
    """Candidate l's own predicted overlap mean and shared deviation."""
    l = ctx._check_index(l)
    return np.array([ctx.mu[l, 0], ctx.sigma[l]])


def feature_vector(ctx: SceneContext, l: int) -> np.ndarray:
    """Full 11-dim feature vector for candidate l, ordered per FEATURE_NAMES."""
    return np.concatenate([
        global_features(ctx, l),
        local_features(ctx, l),
        consistency_features(ctx, l),
        score_features(ctx, l),
    ])


def _global_all(ctx: SceneContext) -> np.ndarray:
    n = ctx.n
    out = np.empty((n, 3))
    if n == 1:
        out[:] = 0.0
        return out
    relations = ctx.relation_tensor()
    buf = np.empty((n, n, 3))
    for l in range(n):
        out[l] = _global_from_field(relations[:, l, :], ctx.kernel, buf)
    return out


def _local_all(ctx: SceneContext) -> np.ndarray:
    relations = ctx.relation_tensor()
    return np.einsum("ilr,il->lr", np.abs(1.0 - relations), ctx.kernel) / ctx.n


def _consistency_all(ctx: SceneContext) -> np.ndarray:
    relations = ctx.relation_tensor()
    return np.abs(relations - ctx.mu_clamped[:, None, :]).max(axis=0)


def _score_all(ctx: SceneContext) -> np.ndarray:
    return np.column_stack([ctx.mu[:, 0], ctx.sigma])


def feature_matrix(ctx: SceneContext) -> np.ndarray:
    """Feature vectors of every candidate, shape (N, 11)."""
    return np.hstack([_global_all(ctx), _local_all(ctx), _consistency_all(ctx), _score_all(ctx)])


def score(weights, ctx: SceneContext, l: int) -> float:
    """Linear score <weights, feature_vector(ctx, l)> of candidate l."""
    w = as_weights(weights)
    return float(np.dot(w, feature_vector(ctx, l)))
