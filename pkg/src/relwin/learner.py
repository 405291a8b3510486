"""Structured max-margin training of the scoring weights.

The weights are trained with an n-slack cutting-plane scheme: each round runs
loss-augmented inference per image to find its most violated margin
constraint, adds every constraint violated by more than the current slack
plus epsilon to the working set, and re-solves the restricted quadratic
program

    min 0.5 ||w||^2 + gamma * sum_I xi_I
    s.t. xi_I >= 0 and, for every working constraint (I, l),
         <w, phi(l*_I) - phi(l)> >= loss(l, l*_I) - xi_I.

The restricted QP is solved in its dual, a concave quadratic over one capped
simplex per image (lambda >= 0, sum over the image's constraints <= gamma).
Coordinate ascent with pairwise transfers inside each image's simplex keeps
every iterate feasible; termination is certified by the primal-dual gap, so
the returned (w, xi) is the exact restricted minimizer up to the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import as_window_array, overlaps_with
from .hyperfeatures import N_FEATURES, SceneContext, as_weights, feature_matrix

__all__ = [
    "TrainingImage",
    "MarginConstraint",
    "QPSolution",
    "TrainState",
    "best_candidate",
    "build_training_image",
    "most_violated_constraint",
    "solve_qp",
    "train_structured",
]


@dataclass(frozen=True)
class TrainingImage:
    """Cached per-image training data: features, losses, and the target index."""

    image_id: str
    features: np.ndarray   # (N, N_FEATURES)
    loss: np.ndarray       # (N,) localization loss of each candidate vs the target
    best_index: int

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=float)
        loss = np.asarray(self.loss, dtype=float).reshape(-1)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "loss", loss)
        n = feats.shape[0]
        if feats.ndim != 2 or feats.shape[1] != N_FEATURES or n == 0:
            raise ValidationError(f"features must be (N, {N_FEATURES}), got {feats.shape}")
        if loss.shape != (n,) or not np.all(np.isfinite(loss)):
            raise ValidationError("loss vector must be finite and aligned with features")
        if np.any(loss < 0.0) or np.any(loss > 1.0):
            raise ValidationError("losses must lie in [0, 1]")
        if not 0 <= self.best_index < n:
            raise ValidationError(f"best_index {self.best_index} out of range [0, {n})")
        if abs(loss[self.best_index]) > 1e-12:
            raise ValidationError("the target candidate must have zero loss")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("features must be finite")

    @property
    def n(self) -> int:
        return int(self.features.shape[0])


def best_candidate(windows, ground_truth) -> int:
    """Index of the candidate with maximal overlap to the ground-truth box.

    Ties resolve to the lowest index.
    """
    arr = as_window_array(windows)
    return int(np.argmax(overlaps_with(arr, ground_truth)))


def build_training_image(ctx: SceneContext, ground_truth, image_id: str = "") -> TrainingImage:
    """Assemble a TrainingImage from a scene context and its ground-truth box."""
    target = best_candidate(ctx.windows, ground_truth)
    loss = 1.0 - overlaps_with(ctx.windows, ctx.windows[target])
    return TrainingImage(image_id, feature_matrix(ctx), loss, target)


def most_violated_constraint(weights, image: TrainingImage) -> tuple[int, float]:
    """Loss-augmented inference: the constraint most violated for this image.

    Returns (l, violation) where l != best_index maximizes score(l) +
    loss(l), and violation is that value minus score(best_index).  For
    single-candidate images there is no constraint and (-1, -inf) is
    returned.
    """
    if image.n == 1:
        return -1, -np.inf
    w = as_weights(weights)
    scores = image.features @ w
    augmented = scores + image.loss
    augmented[image.best_index] = -np.inf
    l = int(np.argmax(augmented))
    return l, float(augmented[l] - scores[image.best_index])


@dataclass(frozen=True)
class MarginConstraint:
    """One working-set constraint: <w, diff> >= loss - xi_I for image I."""

    image_index: int
    window_index: int
    diff: np.ndarray   # phi(best) - phi(window), shape (N_FEATURES,)
    loss: float


@dataclass(frozen=True)
class QPSolution:
    """Restricted-QP solution with its primal/dual certificates."""

    weights: np.ndarray
    xi: np.ndarray
    objective: float
    dual_objective: float
    converged: bool


def _primal_state(diffs: np.ndarray, losses: np.ndarray, image_of: np.ndarray,
                  weights: np.ndarray, n_images: int, gamma: float) -> tuple[np.ndarray, float]:
    margins = losses - diffs @ weights
    xi = np.zeros(n_images)
    np.maximum.at(xi, image_of, margins)
    xi = np.clip(xi, 0.0, None)
    objective = 0.5 * float(weights @ weights) + gamma * float(xi.sum())
    return xi, objective


def solve_qp(constraints, n_images: int, gamma: float,
             tol: float = 1e-10, max_sweeps: int = 5000) -> QPSolution:
    """Solve the restricted n-slack QP over the given working set.

    Dual coordinate ascent with pairwise transfers inside each image's capped
    simplex; stops when the primal-dual gap drops below tol * max(1, |p|).
    Hitting max_sweeps returns the best (still feasible) iterate with
    converged=False.
    """
    if gamma < 0.0 or not np.isfinite(gamma):
        raise ValidationError("gamma must be finite and nonnegative")
    if n_images <= 0:
        raise ValidationError("n_images must be positive")
    constraints = list(constraints)
    if not constraints:
        return QPSolution(np.zeros(N_FEATURES), np.zeros(n_images), 0.0, 0.0, True)

    diffs = np.stack([np.asarray(c.diff, dtype=float) for c in constraints])
    losses = np.array([float(c.loss) for c in constraints])
    image_of = np.array([int(c.image_index) for c in constraints])
    if np.any(image_of < 0) or np.any(image_of >= n_images):
        raise ValidationError("constraint image indices out of range")
    by_image = [np.flatnonzero(image_of == i) for i in range(n_images)]
    sq_norms = np.einsum("cf,cf->c", diffs, diffs)

    lam = np.zeros(len(constraints))
    weights = np.zeros(N_FEATURES)
    xi, objective = _primal_state(diffs, losses, image_of, weights, n_images, gamma)
    dual = 0.0
    converged = False
    for _ in range(max_sweeps):
        for members in by_image:
            if members.size == 0:
                continue
            # Moves against the image's free slack mass.
            for c in members:
                g = losses[c] - float(diffs[c] @ weights)
                if sq_norms[c] > 0.0:
                    step = g / sq_norms[c]
                else:
                    step = np.copysign(np.inf, g) if g != 0.0 else 0.0
                room = max(0.0, gamma - float(lam[members].sum()))
                step = float(np.clip(step, -lam[c], room))
                if step != 0.0:
                    lam[c] += step
                    weights += step * diffs[c]
            # Mass transfers between constraint pairs of the same image.
            for a_pos in range(members.size):
                for b_pos in range(a_pos + 1, members.size):
                    ca, cb = members[a_pos], members[b_pos]
                    direction = diffs[ca] - diffs[cb]
                    curvature = float(direction @ direction)
                    g = (losses[ca] - losses[cb]) - float(direction @ weights)
                    if curvature > 0.0:
                        step = g / curvature
                    else:
                        step = np.copysign(np.inf, g) if g != 0.0 else 0.0
                    step = float(np.clip(step, -lam[ca], lam[cb]))
                    if step != 0.0:
                        lam[ca] += step
                        lam[cb] -= step
                        weights += step * direction
        np.clip(lam, 0.0, None, out=lam)
        weights = lam @ diffs  # refresh against incremental drift
        xi, objective = _primal_state(diffs, losses, image_of, weights, n_images, gamma)
        dual = float(losses @ lam) - 0.5 * float(weights @ weights)
        if objective - dual <= tol * max(1.0, abs(objective)):
            converged = True
            break
    return QPSolution(weights, xi, objective, dual, converged)


@dataclass
class TrainState:
    """Cutting-plane training state and outcome."""

    weights: np.ndarray
    xi: np.ndarray
    constraints: list
    gamma: float
    epsilon: float
    objective_trace: list = field(default_factory=list)
    rounds: int = 0
    converged: bool = False
    log: list = field(default_factory=list)


def train_structured(images, gamma: float = 1.0, epsilon: float = 1e-3,
                     max_rounds: int = 100, qp_tol: float = 1e-10,
                     qp_max_sweeps: int = 5000) -> TrainState:
    """Cutting-plane training over a list of TrainingImages.

    Each round adds, per image, the most violated constraint when its
    violation exceeds the image's slack by more than epsilon, then re-solves
    the restricted QP.  Terminates when a round adds nothing (converged) or
    after max_rounds (converged=False).  The restricted objective trace is
    non-decreasing because each round's feasible set only shrinks.
    """
    images = list(images)
    if not images:
        raise ValidationError("training needs at least one image")
    if epsilon <= 0.0 or not np.isfinite(epsilon):
        raise ValidationError("epsilon must be finite and positive")
    if max_rounds < 1:
        raise ValidationError("max_rounds must be at least 1")

    n = len(images)
    state = TrainState(np.zeros(N_FEATURES), np.zeros(n), [], float(gamma), float(epsilon))
    seen: set[tuple[int, int]] = set()
    for round_index in range(1, max_rounds + 1):
        added = 0
        for i, image in enumerate(images):
            l, violation = most_violated_constraint(state.weights, image)
            if l < 0 or (i, l) in seen:
                continue
            if violation > state.xi[i] + epsilon:
                diff = image.features[image.best_index] - image.features[l]
                state.constraints.append(MarginConstraint(i, l, diff, float(image.loss[l])))
                seen.add((i, l))
                added += 1
        if added == 0:
            state.converged = True
            break
        solution = solve_qp(state.constraints, n, gamma, qp_tol, qp_max_sweeps)
        state.weights = solution.weights
        state.xi = solution.xi
        state.rounds = round_index
        state.objective_trace.append(solution.objective)
        state.log.append({
            "round": round_index,
            "constraints_added": added,
            "working_set_size": len(state.constraints),
            "objective": solution.objective,
            "qp_converged": solution.converged,
        })
    return state
