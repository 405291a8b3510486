import numpy as np
import pytest

from relwin.errors import GPFitError, ValidationError
from relwin.gp import (
    DEFAULT_JITTER,
    KernelConfig,
    gp_fit,
    gp_predict,
    kernel,
    kernel_matrix,
    learn_kernel,
    log_marginal_likelihood,
    predict_batch,
)


def dense_oracle(cfg, X, Y, Q):
    """Textbook GP posterior via explicit matrix inversion."""
    K = kernel_matrix(cfg, X)
    K = K + (cfg.noise_variance + DEFAULT_JITTER * cfg.signal_variance) * np.eye(len(X))
    Kinv = np.linalg.inv(K)
    kq = kernel_matrix(cfg, X, Q)
    mu = kq.T @ Kinv @ Y
    var = cfg.signal_variance - np.einsum("mq,mn,nq->q", kq, Kinv, kq)
    return mu, np.sqrt(np.clip(var, 0.0, None))


def random_problem(rng, m, dim=3):
    X = rng.normal(size=(m, dim))
    Y = rng.uniform(0.0, 1.0, size=(m, 3))
    cfg = KernelConfig(
        length_scales=tuple(rng.uniform(0.5, 2.5, size=dim)),
        signal_variance=float(rng.uniform(0.5, 2.0)),
        noise_variance=float(rng.uniform(1e-4, 0.1)),
    )
    return cfg, X, Y


def test_kernel_frozen_value():
    cfg = KernelConfig.isotropic(1, 1.0)
    assert kernel(cfg, np.array([0.0]), np.array([2.0])) == pytest.approx(np.exp(-2.0))
    assert kernel(cfg, np.array([0.7]), np.array([0.7])) == 1.0


def test_kernel_ard_lengths():
    cfg = KernelConfig(length_scales=(1.0, 2.0), signal_variance=3.0)
    x = np.array([0.0, 0.0])
    x2 = np.array([1.0, 2.0])
    # squared distance 1/2 + 4/8 = 1
    assert kernel(cfg, x, x2) == pytest.approx(3.0 * np.exp(-1.0))


def test_kernel_matrix_structure(rng):
    cfg = KernelConfig.isotropic(4, 1.3, signal_variance=2.0)
    X = rng.normal(size=(30, 4))
    K = kernel_matrix(cfg, X)
    assert np.array_equal(K, K.T)
    assert np.array_equal(np.diag(K), np.full(30, 2.0))
    assert np.all(K > 0.0) and np.all(K <= 2.0)
    assert np.linalg.eigvalsh(K).min() > -1e-9


def test_fit_predict_matches_dense_oracle_frozen():
    cfg = KernelConfig(length_scales=(1.0,), signal_variance=2.0, noise_variance=0.1)
    X = np.array([[0.0], [1.0], [2.5]])
    Y = np.array([[0.1, 0.9, 0.3], [0.4, 0.6, 0.2], [0.9, 0.1, 0.8]])
    pred = gp_predict(gp_fit(X, Y, cfg), np.array([1.4]))
    assert pred.mu() == pytest.approx([0.56713908, 0.40953934, 0.32668269], abs=1e-8)
    assert pred.sigma == pytest.approx(0.43857176934675, abs=1e-10)


def test_fit_predict_matches_dense_oracle_random(rng):
    for _ in range(10):
        cfg, X, Y = random_problem(rng, int(rng.integers(2, 50)))
        Q = rng.normal(size=(7, X.shape[1]))
        mu, sigma = predict_batch(gp_fit(X, Y, cfg), Q)
        mu_o, sigma_o = dense_oracle(cfg, X, Y, Q)
        assert np.allclose(mu, mu_o, atol=1e-8)
        assert np.allclose(sigma, sigma_o, atol=1e-8)


def test_single_point_interpolates():
    cfg = KernelConfig.isotropic(2, 1.0)
    X = np.array([[0.3, -0.2]])
    Y = np.array([[0.8, 0.1, 0.5]])
    model = gp_fit(X, Y, cfg)
    pred = gp_predict(model, X[0])
    # no noise: the posterior passes through the training point
    assert pred.mu() == pytest.approx([0.8, 0.1, 0.5], abs=1e-6)
    assert pred.sigma == pytest.approx(0.0, abs=1e-3)
    far = gp_predict(model, X[0] + 50.0)
    assert far.mu() == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)
    assert far.sigma == pytest.approx(1.0, abs=1e-12)


def test_posterior_variance_never_exceeds_prior(rng):
    cfg, X, Y = random_problem(rng, 20)
    _, sigma = predict_batch(gp_fit(X, Y, cfg), rng.normal(size=(50, 3)))
    assert np.all(sigma <= np.sqrt(cfg.signal_variance) + 1e-12)
    assert np.all(sigma >= 0.0)


def test_predict_batch_matches_single(rng):
    cfg, X, Y = random_problem(rng, 12)
    model = gp_fit(X, Y, cfg)
    Q = rng.normal(size=(5, 3))
    mu, sigma = predict_batch(model, Q)
    for q in range(5):
        pred = gp_predict(model, Q[q])
        # single-query and batched paths differ only in BLAS shape, so any
        # disagreement beyond the last few ulps is a real bug
        assert pred.mu() == pytest.approx(mu[q], abs=1e-13)
        assert pred.sigma == pytest.approx(sigma[q], abs=1e-13)


def test_fit_validation(rng):
    cfg = KernelConfig.isotropic(2, 1.0)
    X = rng.normal(size=(4, 2))
    with pytest.raises(ValidationError):
        gp_fit(X, np.full((4, 3), 1.5), cfg)       # targets above 1
    with pytest.raises(ValidationError):
        gp_fit(X, np.zeros((3, 3)), cfg)           # row count mismatch
    with pytest.raises(ValidationError):
        gp_fit(rng.normal(size=(4, 3)), np.zeros((4, 3)), cfg)  # dim mismatch


def test_duplicate_points_without_jitter_fail():
    cfg = KernelConfig.isotropic(1, 1.0)
    X = np.array([[0.0], [0.0]])
    Y = np.zeros((2, 3))
    with pytest.raises(GPFitError):
        gp_fit(X, Y, cfg, jitter=0.0)
    gp_fit(X, Y, cfg)  # default jitter handles it


def test_kernel_config_validation():
    with pytest.raises(ValidationError):
        KernelConfig(length_scales=(0.0,))
    with pytest.raises(ValidationError):
        KernelConfig(length_scales=(1.0,), signal_variance=-1.0)
    with pytest.raises(ValidationError):
        KernelConfig(length_scales=(1.0,), noise_variance=-0.5)


def test_log_marginal_likelihood_matches_dense_oracle(rng):
    cfg, X, Y = random_problem(rng, 25)
    K = kernel_matrix(cfg, X)
    K = K + (cfg.noise_variance + DEFAULT_JITTER * cfg.signal_variance) * np.eye(25)
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    Kinv = np.linalg.inv(K)
    expect = sum(
        -0.5 * Y[:, r] @ Kinv @ Y[:, r] - 0.5 * logdet - 0.5 * 25 * np.log(2 * np.pi)
        for r in range(3))
    assert log_marginal_likelihood(cfg, X, Y) == pytest.approx(expect, rel=1e-10)


def test_log_marginal_likelihood_prefers_truth(rng):
    # zero-mean samples from a known kernel vs. a wildly wrong length scale
    true_cfg = KernelConfig.isotropic(2, 1.0, signal_variance=1.0, noise_variance=0.01)
    X = rng.normal(size=(40, 2))
    K = kernel_matrix(true_cfg, X) + 0.01 * np.eye(40)
    Y = rng.multivariate_normal(np.zeros(40), K, size=3).T
    good = log_marginal_likelihood(true_cfg, X, Y)
    bad = log_marginal_likelihood(KernelConfig.isotropic(2, 50.0, noise_variance=0.01), X, Y)
    assert np.isfinite(good) and np.isfinite(bad)
    assert good > bad


def test_learn_kernel_zero_iterations(rng):
    cfg, X, Y = random_problem(rng, 10)
    result = learn_kernel(X, Y, cfg, iterations=0)
    assert result.config == cfg
    assert result.trace == []
    assert not result.warning


def test_learn_kernel_trace_monotone_and_improves(rng):
    true_cfg = KernelConfig.isotropic(2, 0.8, signal_variance=1.0, noise_variance=0.01)
    X = rng.normal(size=(60, 2))
    K = kernel_matrix(true_cfg, X) + 0.01 * np.eye(60)
    Y = rng.multivariate_normal(np.zeros(60), K, size=3).T
    start = KernelConfig.isotropic(2, 3.0, signal_variance=0.5, noise_variance=0.05)
    result = learn_kernel(X, Y, start, iterations=15)
    trace = np.array(result.trace)
    assert len(trace) >= 1
    assert np.all(np.diff(trace) >= -1e-9)
    assert trace[-1] >= log_marginal_likelihood(start, X, Y)


def test_learn_kernel_stays_near_truth(rng):
    # starting at the generating hyperparameters, the search must not wander
    # beyond 20% relative error in any coordinate
    true_cfg = KernelConfig.isotropic(2, 1.2, signal_variance=0.9, noise_variance=0.02)
    X = rng.uniform(-3.0, 3.0, size=(200, 2))
    K = kernel_matrix(true_cfg, X) + 0.02 * np.eye(200)
    Y = rng.multivariate_normal(np.zeros(200), K, size=3).T
    result = learn_kernel(X, Y, true_cfg, iterations=12)
    for got, want in zip(result.config.length_scales, true_cfg.length_scales):
        assert abs(got - want) / want <= 0.2
    assert abs(result.config.signal_variance - 0.9) / 0.9 <= 0.2


def test_learn_kernel_needs_two_points():
    cfg = KernelConfig.isotropic(1, 1.0)
    with pytest.raises(ValidationError):
        learn_kernel(np.zeros((1, 1)), np.zeros((1, 3)), cfg, iterations=3)
