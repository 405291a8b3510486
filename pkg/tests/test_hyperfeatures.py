import numpy as np
import pytest

from relwin.errors import ValidationError
from relwin.geometry import Window, relation_descriptor
from relwin.hyperfeatures import (
    as_weights,
    CONSISTENCY_SLICE,
    FEATURE_NAMES,
    GLOBAL_SLICE,
    LOCAL_SLICE,
    N_FEATURES,
    SCORE_SLICE,
    SceneContext,
    consistency_features,
    feature_matrix,
    feature_vector,
    global_features,
    local_features,
    score,
    score_features,
)
from tests.conftest import random_context


def relation_rows(ctx, l):
    """rho(w_i, w_l) for every i, one scalar descriptor call at a time."""
    box = Window.from_sequence(ctx.windows[l])
    rows = []
    for i in range(ctx.n):
        rel = relation_descriptor(Window.from_sequence(ctx.windows[i]), box)
        rows.append([rel.overlap, rel.part, rel.container])
    return np.array(rows)


def global_oracle(ctx, l):
    field = relation_rows(ctx, l)
    n = ctx.n
    if n == 1:
        return np.zeros(3)
    out = np.zeros(3)
    for r in range(3):
        acc = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                acc += abs(field[i, r] - field[j, r]) * ctx.kernel[i, j]
        out[r] = 2.0 * acc / (n * n - n)
    return out


def local_oracle(ctx, l):
    field = relation_rows(ctx, l)
    out = np.zeros(3)
    for r in range(3):
        out[r] = sum(abs(1.0 - field[i, r]) * ctx.kernel[i, l]
                     for i in range(ctx.n)) / ctx.n
    return out


def consistency_oracle(ctx, l):
    field = relation_rows(ctx, l)
    clamped = np.clip(ctx.mu, 0.0, 1.0)
    out = np.zeros(3)
    for r in range(3):
        out[r] = max(abs(field[i, r] - clamped[i, r]) for i in range(ctx.n))
    return out


def test_feature_layout():
    assert N_FEATURES == 11
    assert len(FEATURE_NAMES) == 11
    assert FEATURE_NAMES[GLOBAL_SLICE] == ("global_overlap", "global_part",
                                           "global_container")
    assert FEATURE_NAMES[LOCAL_SLICE] == ("local_overlap", "local_part",
                                          "local_container")
    assert FEATURE_NAMES[CONSISTENCY_SLICE] == ("consistency_overlap",
                                                "consistency_part",
                                                "consistency_container")
    assert FEATURE_NAMES[SCORE_SLICE] == ("score_mu", "score_sigma")


def test_families_match_loop_oracles(rng):
    for n in (2, 3, 9, 24):
        ctx = random_context(rng, n)
        for l in range(0, n, max(1, n // 4)):
            assert global_features(ctx, l) == pytest.approx(global_oracle(ctx, l), abs=1e-12)
            assert local_features(ctx, l) == pytest.approx(local_oracle(ctx, l), abs=1e-12)
            assert consistency_features(ctx, l) == pytest.approx(
                consistency_oracle(ctx, l), abs=1e-12)
            assert np.array_equal(score_features(ctx, l),
                                  [ctx.mu[l, 0], ctx.sigma[l]])


def test_feature_vector_is_concatenation(rng):
    ctx = random_context(rng, 12)
    for l in (0, 5, 11):
        v = feature_vector(ctx, l)
        assert v.shape == (11,)
        assert np.array_equal(v[GLOBAL_SLICE], global_features(ctx, l))
        assert np.array_equal(v[LOCAL_SLICE], local_features(ctx, l))
        assert np.array_equal(v[CONSISTENCY_SLICE], consistency_features(ctx, l))
        assert np.array_equal(v[SCORE_SLICE], score_features(ctx, l))


def test_feature_matrix_rows_match_vectors(rng):
    ctx = random_context(rng, 17)
    mat = feature_matrix(ctx)
    assert mat.shape == (17, 11)
    for l in range(17):
        assert mat[l] == pytest.approx(feature_vector(ctx, l), abs=1e-12)


def test_single_candidate_scene(rng):
    ctx = random_context(rng, 1)
    v = feature_vector(ctx, 0)
    assert np.array_equal(v[GLOBAL_SLICE], np.zeros(3))
    # the lone window relates to itself perfectly, so local deviations vanish
    assert v[LOCAL_SLICE] == pytest.approx(np.zeros(3), abs=1e-15)
    clamped = np.clip(ctx.mu[0], 0.0, 1.0)
    assert v[CONSISTENCY_SLICE] == pytest.approx(np.abs(1.0 - clamped), abs=1e-15)
    assert np.array_equal(v[SCORE_SLICE], [ctx.mu[0, 0], ctx.sigma[0]])


def test_permutation_invariance(rng):
    ctx = random_context(rng, 10)
    perm = rng.permutation(10)
    permuted = SceneContext(ctx.windows[perm], ctx.features[perm], ctx.mu[perm],
                            ctx.sigma[perm], ctx.kernel[np.ix_(perm, perm)])
    for l in range(10):
        mapped = int(np.where(perm == l)[0][0])
        assert feature_vector(permuted, mapped) == pytest.approx(
            feature_vector(ctx, l), abs=1e-12)


def test_consistency_uses_clamped_mean_score_uses_raw(rng):
    ctx = random_context(rng, 6)
    mu = ctx.mu.copy()
    mu[2] = [-0.4, 1.7, 0.5]
    shifted = SceneContext(ctx.windows, ctx.features, mu, ctx.sigma, ctx.kernel)
    assert consistency_features(shifted, 3) == pytest.approx(
        consistency_oracle(shifted, 3), abs=1e-12)
    # raw mean flows into the score block untouched
    assert score_features(shifted, 2)[0] == -0.4


def test_feature_ranges(rng):
    ctx = random_context(rng, 20)
    mat = feature_matrix(ctx)
    assert np.all(np.isfinite(mat))
    assert np.all(mat[:, GLOBAL_SLICE] >= 0.0)
    assert np.all(mat[:, LOCAL_SLICE] >= 0.0)
    assert np.all(mat[:, CONSISTENCY_SLICE] >= 0.0)
    assert np.all(mat[:, CONSISTENCY_SLICE] <= 1.0)


def test_score_matches_manual_dot(rng):
    ctx = random_context(rng, 14)
    w = rng.normal(size=11)
    for l in (0, 7, 13):
        v = feature_vector(ctx, l)
        assert score(w, ctx, l) == pytest.approx(float(w @ v), abs=1e-12)


def test_kernel_pair_mean(rng):
    ctx = random_context(rng, 8)
    k = ctx.kernel
    expect = sum(k[i, j] for i in range(8) for j in range(8) if i != j) / (8 * 8 - 8)
    assert ctx.kernel_pair_mean() == pytest.approx(expect, abs=1e-12)
    assert random_context(rng, 1).kernel_pair_mean() == 0.0


def test_context_validation(rng):
    ctx = random_context(rng, 5)
    with pytest.raises(ValidationError):
        SceneContext(ctx.windows, ctx.features, ctx.mu[:4], ctx.sigma, ctx.kernel)
    with pytest.raises(ValidationError):
        SceneContext(ctx.windows, ctx.features, ctx.mu, -ctx.sigma, ctx.kernel)
    lopsided = ctx.kernel.copy()
    lopsided[0, 1] += 1e-6
    with pytest.raises(ValidationError):
        SceneContext(ctx.windows, ctx.features, ctx.mu, ctx.sigma, lopsided)
    with pytest.raises(ValidationError):
        feature_vector(ctx, 5)
    with pytest.raises(ValidationError):
        as_weights(np.zeros(10))
