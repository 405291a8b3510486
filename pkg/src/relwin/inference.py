"""Candidate selection: brute-force scoring and bound-driven early rejection.

The score of a candidate splits into an exact part (local, consistency, and
score families, each linear-time per candidate) and the pairwise global
family, which is quadratic per candidate and dominates the cost.  For the
global part an upper bound follows from |rho_r(w_i, w_l) - rho_r(w_j, w_l)|
<= 1: a positive global weight contributes at most weight * mean pairwise
kernel value, a nonpositive one contributes at most zero.  The bound is
candidate-independent for the global part, so candidates are sorted by their
bound and fully evaluated only while their bound can still beat the best
exact score found so far.  The pruning test uses strict inequality, so tied
bounds are still evaluated and the result matches brute force exactly,
including the lowest-index tie break.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .hyperfeatures import (
    CONSISTENCY_SLICE,
    GLOBAL_SLICE,
    LOCAL_SLICE,
    SCORE_SLICE,
    SceneContext,
    _consistency_all,
    _global_from_field,
    _local_all,
    _score_all,
    as_weights,
    consistency_features,
    local_features,
    score_features,
)

__all__ = ["InferenceResult", "score_upper_bound", "infer_brute", "infer_fast"]


@dataclass(frozen=True)
class InferenceResult:
    """Outcome of maximizing the score over a scene's candidates."""

    best_index: int
    best_score: float
    full_evaluations: int
    elapsed_seconds: float


def _base_scores(w: np.ndarray, ctx: SceneContext) -> np.ndarray:
    """Exact non-global score part for every candidate, shape (N,)."""
    return (_local_all(ctx) @ w[LOCAL_SLICE]
            + _consistency_all(ctx) @ w[CONSISTENCY_SLICE]
            + _score_all(ctx) @ w[SCORE_SLICE])


def _global_bound(w: np.ndarray, ctx: SceneContext) -> float:
    """Candidate-independent upper bound on the weighted global family."""
    return float(np.clip(w[GLOBAL_SLICE], 0.0, None).sum() * ctx.kernel_pair_mean())


def score_upper_bound(weights, ctx: SceneContext, l: int) -> float:
    """Upper bound on score(weights, ctx, l): exact part plus global bound."""
    w = as_weights(weights)
    base = (float(local_features(ctx, l) @ w[LOCAL_SLICE])
            + float(consistency_features(ctx, l) @ w[CONSISTENCY_SLICE])
            + float(score_features(ctx, l) @ w[SCORE_SLICE]))
    return base + _global_bound(w, ctx)


def infer_brute(weights, ctx: SceneContext) -> InferenceResult:
    """Score every candidate and return the first maximizer.

    Ties resolve to the lowest index.  full_evaluations equals N.
    """
    w = as_weights(weights)
    relations = ctx.relation_tensor()
    n = ctx.n
    started = time.perf_counter()
    base = _base_scores(w, ctx)
    gw = w[GLOBAL_SLICE]
    buf = np.empty((n, n, 3)) if n > 1 else None
    best_index = 0
    best = -np.inf
    for l in range(n):
        g = _global_from_field(relations[:, l, :], ctx.kernel, buf)
        value = base[l] + float(gw @ g)
        if value > best:
            best = value
            best_index = l
    return InferenceResult(best_index, best, n, time.perf_counter() - started)


def infer_fast(weights, ctx: SceneContext) -> InferenceResult:
    """Bound-sorted early-rejection search; exact match of infer_brute.

    Candidates are visited in order of decreasing upper bound (ties by
    ascending index).  The first candidate is always fully evaluated; a
    candidate is pruned only when its bound falls strictly below the best
    exact score seen, at which point the rest of the queue is pruned too.
    """
    w = as_weights(weights)
    relations = ctx.relation_tensor()
    n = ctx.n
    started = time.perf_counter()
    base = _base_scores(w, ctx)
    gw = w[GLOBAL_SLICE]
    bounds = base + _global_bound(w, ctx)
    order = np.lexsort((np.arange(n), -bounds))
    buf = np.empty((n, n, 3)) if n > 1 else None
    best_index = -1
    best = -np.inf
    evaluations = 0
    for l in order:
        if bounds[l] < best:
            break
        g = _global_from_field(relations[:, l, :], ctx.kernel, buf)
        value = base[l] + float(gw @ g)
        evaluations += 1
        if value > best:
            best = value
            best_index = int(l)
        elif value == best and int(l) < best_index:
            best_index = int(l)
    return InferenceResult(best_index, best, evaluations, time.perf_counter() - started)
