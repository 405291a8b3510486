"""Zero-mean Gaussian-process regression of relation triples from appearance.

One GP with an anisotropic squared-exponential kernel is shared by the three
relation targets (overlap, part, container): the Gram matrix is factorized
once, the three solve vectors reuse the factorization, and the predictive
standard deviation is the same for all three targets (it does not depend on
the observed values).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import GPFitError, ValidationError

__all__ = [
    "KernelConfig",
    "RelationPrediction",
    "GPModel",
    "KernelSearchResult",
    "kernel",
    "kernel_matrix",
    "gp_fit",
    "gp_predict",
    "predict_batch",
    "log_marginal_likelihood",
    "learn_kernel",
]

# Diagonal jitter added to the Gram matrix, as a fraction of signal variance.
DEFAULT_JITTER = 1e-8


@dataclass(frozen=True)
class KernelConfig:
    """Anisotropic squared-exponential kernel parameters.

    k(x, x') = signal_variance * exp(-0.5 * sum_d ((x_d - x'_d) / length_scales[d])^2)
    """

    length_scales: np.ndarray
    signal_variance: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self) -> None:
        scales = np.asarray(self.length_scales, dtype=float).reshape(-1)
        object.__setattr__(self, "length_scales", scales)
        if scales.size == 0 or not np.all(np.isfinite(scales)) or np.any(scales <= 0.0):
            raise ValidationError("length scales must be finite and strictly positive")
        if not (math.isfinite(self.signal_variance) and self.signal_variance > 0.0):
            raise ValidationError("signal variance must be finite and strictly positive")
        if not (math.isfinite(self.noise_variance) and self.noise_variance >= 0.0):
            raise ValidationError("noise variance must be finite and nonnegative")

    @property
    def dim(self) -> int:
        return int(self.length_scales.size)

    @classmethod
    def isotropic(cls, dim: int, length: float, signal_variance: float = 1.0,
                  noise_variance: float = 0.0) -> "KernelConfig":
        return cls(np.full(dim, float(length)), signal_variance, noise_variance)


@dataclass(frozen=True)
class RelationPrediction:
    """Predictive relation means plus the shared predictive standard deviation."""

    mu_overlap: float
    mu_part: float
    mu_container: float
    sigma: float

    def mu(self) -> np.ndarray:
        """Raw predictive means (may fall slightly outside [0, 1])."""
        return np.array([self.mu_overlap, self.mu_part, self.mu_container], dtype=float)

    def mu_clamped(self) -> np.ndarray:
        """Predictive means clipped to the valid relation range [0, 1]."""
        return np.clip(self.mu(), 0.0, 1.0)


@dataclass(frozen=True)
class GPModel:
    """Fitted GP: kernel config, training data, and reusable solve state."""

    config: KernelConfig
    inputs: np.ndarray    # (M, D)
    targets: np.ndarray   # (M, R)
    chol: np.ndarray      # lower Cholesky factor of the regularized Gram
    solve: np.ndarray     # (M, R) Gram^{-1} targets

    @property
    def n_train(self) -> int:
        return int(self.inputs.shape[0])


def _as_inputs(inputs) -> np.ndarray:
    arr = np.asarray(inputs, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValidationError(f"inputs must be a nonempty (M, D) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("inputs must be finite")
    return arr


def kernel(cfg: KernelConfig, x, x2) -> float:
    """Kernel value between two input points.

    Returns exactly the signal variance when the points are identical.
    """
    a = np.asarray(x, dtype=float).reshape(-1)
    b = np.asarray(x2, dtype=float).reshape(-1)
    if a.size != cfg.dim or b.size != cfg.dim:
        raise ValidationError(
            f"kernel inputs must have dimension {cfg.dim}, got {a.size} and {b.size}")
    z = (a - b) / cfg.length_scales
    return float(cfg.signal_variance * math.exp(-0.5 * float(z @ z)))


def kernel_matrix(cfg: KernelConfig, X, X2=None) -> np.ndarray:
    """Kernel matrix between two input sets ((N, M); symmetric when X2 is None).

    Squared distances are computed by direct broadcasting, so the symmetric
    case is bitwise symmetric with an exactly-zero diagonal distance.
    """
    A = _as_inputs(X)
    if A.shape[1] != cfg.dim:
        raise ValidationError(f"inputs have dimension {A.shape[1]}, kernel expects {cfg.dim}")
    As = A / cfg.length_scales
    Bs = As if X2 is None else _as_inputs(X2) / cfg.length_scales
    if Bs.shape[1] != cfg.dim:
        raise ValidationError(f"inputs have dimension {Bs.shape[1]}, kernel expects {cfg.dim}")
    d2 = ((As[:, None, :] - Bs[None, :, :]) ** 2).sum(axis=2)
    return cfg.signal_variance * np.exp(-0.5 * d2)


def _regularized_gram(cfg: KernelConfig, X: np.ndarray, jitter: float) -> np.ndarray:
    gram = kernel_matrix(cfg, X)
    idx = np.arange(X.shape[0])
    gram[idx, idx] += cfg.noise_variance + jitter * cfg.signal_variance
    return gram


def _cholesky(gram: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(gram, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise GPFitError(f"Gram matrix is not positive definite: {exc}") from exc


def _as_targets(targets, n: int) -> np.ndarray:
    arr = np.asarray(targets, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != n:
        raise ValidationError(f"targets must align with the {n} inputs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("targets must be finite")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValidationError("relation targets must lie in [0, 1]")
    return arr


def gp_fit(inputs, targets, cfg: KernelConfig, jitter: float = DEFAULT_JITTER) -> GPModel:
    """Fit the shared GP on (M, D) inputs and (M, R) relation targets.

    The Gram matrix gets noise_variance + jitter * signal_variance added to
    its diagonal and is Cholesky-factorized once; the per-target solve
    vectors share the factorization.

    Raises:
      GPFitError: if the regularized Gram matrix is not positive definite.
    """
    X = _as_inputs(inputs)
    if X.shape[1] != cfg.dim:
        raise ValidationError(f"inputs have dimension {X.shape[1]}, kernel expects {cfg.dim}")
    Y = _as_targets(targets, X.shape[0])
    chol = _cholesky(_regularized_gram(cfg, X, jitter))
    solve = scipy.linalg.cho_solve((chol, True), Y)
    return GPModel(cfg, X, Y, chol, solve)


def predict_batch(model: GPModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Predictive means and shared standard deviations at (Q, D) query points.

    Returns:
      (mu, sigma): mu is (Q, R) raw means, sigma is (Q,) latent predictive
      standard deviations (no observation noise added).
    """
    Q = _as_inputs(X)
    kq = kernel_matrix(model.config, Q, model.inputs)          # (Q, M)
    mu = kq @ model.solve                                      # (Q, R)
    v = scipy.linalg.solve_triangular(model.chol, kq.T, lower=True)
    var = model.config.signal_variance - np.einsum("mq,mq->q", v, v)
    sigma = np.sqrt(np.clip(var, 0.0, None))
    return mu, sigma


def gp_predict(model: GPModel, x) -> RelationPrediction:
    """Predict the relation triple and shared sigma at a single input point."""
    if model.targets.shape[1] != 3:
        raise ValidationError(
            f"relation prediction needs a 3-target model, this one has {model.targets.shape[1]}")
    mu, sigma = predict_batch(model, np.asarray(x, dtype=float).reshape(1, -1))
    return RelationPrediction(float(mu[0, 0]), float(mu[0, 1]), float(mu[0, 2]), float(sigma[0]))


def log_marginal_likelihood(cfg: KernelConfig, inputs, targets,
                            jitter: float = DEFAULT_JITTER) -> float:
    """Summed log marginal likelihood of all target columns under cfg."""
    X = _as_inputs(inputs)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    chol = _cholesky(_regularized_gram(cfg, X, jitter))
    alpha = scipy.linalg.cho_solve((chol, True), Y)
    m = X.shape[0]
    logdet = 2.0 * float(np.log(np.diag(chol)).sum())
    quad = np.einsum("mr,mr->r", Y, alpha)
    per_col = -0.5 * quad - 0.5 * logdet - 0.5 * m * math.log(2.0 * math.pi)
    return float(per_col.sum())


@dataclass
class KernelSearchResult:
    """Outcome of the coordinate-wise hyperparameter search."""

    config: KernelConfig
    trace: list = field(default_factory=list)
    warning: bool = False


def _with_scaled_param(cfg: KernelConfig, index: int, factor: float,
                       search_noise: bool) -> KernelConfig:
    d = cfg.dim
    scales = cfg.length_scales.copy()
    signal = cfg.signal_variance
    noise = cfg.noise_variance
    if index < d:
        scales[index] *= factor
    elif index == d:
        signal *= factor
    elif search_noise and index == d + 1:
        noise *= factor
    else:
        raise IndexError(index)
    return KernelConfig(scales, signal, noise)


def learn_kernel(inputs, targets, init: KernelConfig, iterations: int,
                 step: float = 2.0, jitter: float = DEFAULT_JITTER) -> KernelSearchResult:
    """Coordinate-wise multiplicative search maximizing the summed likelihood.

    Each sweep tries scaling every parameter (length scales, signal variance,
    and noise variance when the init noise is positive) up and down by the
    current step factor, accepting only strict improvements; the step factor
    shrinks once a sweep yields no improvement.  With 0 iterations the init
    is returned unchanged.  The likelihood trace is non-decreasing by
    construction.  Failed factorizations during the search are skipped and
    flagged via `warning`.
    """
    X = _as_inputs(inputs)
    if X.shape[0] < 2:
        raise ValidationError("kernel search needs at least 2 training points")
    if iterations < 0:
        raise ValidationError("iterations must be nonnegative")
    if iterations == 0:
        return KernelSearchResult(init, [], False)

    search_noise = init.noise_variance > 0.0
    n_params = init.dim + (2 if search_noise else 1)
    current = init
    best = log_marginal_likelihood(current, X, targets, jitter)
    trace = [best]
    warning = False
    factor = float(step)
    for _ in range(iterations):
        improved = False
        for p in range(n_params):
            candidate = None
            for f in (factor, 1.0 / factor):
                cfg_c = _with_scaled_param(current, p, f, search_noise)
                try:
                    value = log_marginal_likelihood(cfg_c, X, targets, jitter)
                except GPFitError:
                    warning = True
                    continue
                if not math.isfinite(value):
                    warning = True
                    continue
                if value > best and (candidate is None or value > candidate[0]):
                    candidate = (value, cfg_c)
            if candidate is not None:
                best, current = candidate
                trace.append(best)
                improved = True
        if not improved:
            factor = math.sqrt(factor)
            if factor < 1.02:
                break
    return KernelSearchResult(current, trace, warning)
