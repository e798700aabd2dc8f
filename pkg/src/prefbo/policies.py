"""Pair-selection policies over a fixed candidate grid.

The headline policy draws two independent anchored posterior samples and
plays the two argmaxes; the challenger selection is anchor independent
because every posterior sample of the difference function separates into a
difference of a single utility sample.  The remaining selectors are reference
reimplementations of published baselines from their one-line descriptions;
exact parity with the original authors' code is a non-goal.

Ties break toward the lowest candidate index everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .inference import PrefPosterior, sample_posterior
from .scalar_gp import ScalarPosterior
from .numeric import sample_mvn


@dataclass(frozen=True)
class CandidateSet:
    """Finite action grid, fixed for the whole run."""

    points: np.ndarray  # (n, d)
    bounds: np.ndarray  # (d, 2) of [lo, hi]

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.ndim == 1:
            bounds = bounds[None, :]
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "bounds", bounds)
        if points.shape[0] == 0:
            raise ValueError("candidate set must be nonempty")
        if bounds.shape != (points.shape[1], 2):
            raise ValueError(f"bounds shape {bounds.shape} mismatches dim {points.shape[1]}")
        if np.any(points < bounds[:, 0]) or np.any(points > bounds[:, 1]):
            raise ValueError("candidate points fall outside the declared bounds")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def evenly_spaced(cls, lo: float, hi: float, n: int) -> "CandidateSet":
        """One-dimensional grid of n evenly spaced points on [lo, hi]."""
        return cls(np.linspace(lo, hi, n)[:, None], np.array([[lo, hi]]))

    @classmethod
    def from_points(cls, points: np.ndarray) -> "CandidateSet":
        """Candidate set over arbitrary rows; bounds are the per-dim extents."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        bounds = np.stack([points.min(axis=0), points.max(axis=0)], axis=1)
        return cls(points, bounds)


@dataclass(frozen=True)
class PairDecision:
    """A queried pair plus selection diagnostics."""

    first: int
    second: int
    diagnostics: dict = field(default_factory=dict)


def pfts_select(
    posterior: PrefPosterior,
    candidates: CandidateSet,
    v: float,
    rng: np.random.Generator,
) -> PairDecision:
    """Double Thompson pair: two independent anchored samples, two argmaxes.

    Both draws share the anchor (first candidate); by separability of the
    posterior samples the decision distribution does not depend on that
    choice.
    """
    anchor = candidates.points[0]
    sample_one = sample_posterior(posterior, candidates, anchor, v, rng)
    sample_two = sample_posterior(posterior, candidates, anchor, v, rng)
    first = int(np.argmax(sample_one))
    second = int(np.argmax(sample_two))
    return PairDecision(
        first=first,
        second=second,
        diagnostics={
            "anchor_index": 0,
            "v": v,
            "sampled_first": float(sample_one[first]),
            "sampled_second": float(sample_two[second]),
        },
    )


def gpts_select(
    posterior: ScalarPosterior,
    candidates: CandidateSet,
    v: float,
    rng: np.random.Generator,
) -> int:
    """Scalar-feedback Thompson draw over the grid; returns one index.

    Callers account regret by repeating the action, so the implied pair is
    (x_t, x_t).
    """
    mean, cov = posterior.mean_cov(candidates.points)
    draw = sample_mvn(mean, (v * v) * cov, rng)
    return int(np.argmax(draw))


def pair_tables(
    posterior: PrefPosterior, candidates: CandidateSet
) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs predictor and scale tables H[i, j], S[i, j] over the grid.

    Built from the anchored posterior kernel: the posterior covariance keeps
    the difference structure of the pair kernel, so means subtract and the
    pair variance is kt[i,i] + kt[j,j] - 2 kt[i,j] with
    kt(x, u) = kd_t((x, a), (u, a)) for any fixed anchor a.
    """
    anchor = candidates.points[0]
    mean = posterior.mean_anchored(candidates.points, anchor)
    kt = posterior.cov_anchored(candidates.points, anchor)
    h = mean[:, None] - mean[None, :]
    diag = np.diag(kt)
    var = np.clip(diag[:, None] + diag[None, :] - 2.0 * kt, 0.0, None)
    return h, np.sqrt(var)


def maxminlcb_select(
    posterior: PrefPosterior, candidates: CandidateSet, beta: float
) -> PairDecision:
    """Stackelberg pair: maximize over x the worst-case lower bound over x'.

    x_t = argmax_x min_x' [h(x, x') - beta * sigma(x, x')], x'_t the inner
    minimizer at x_t.  The inner range includes x' = x (value exactly 0 on
    the diagonal).
    """
    h, s = pair_tables(posterior, candidates)
    objective = h - beta * s
    inner_values = objective.min(axis=1)
    first = int(np.argmax(inner_values))
    second = int(np.argmin(objective[first]))
    return PairDecision(
        first=first,
        second=second,
        diagnostics={"beta": beta, "inner_value": float(inner_values[first])},
    )


def popbo_select(
    posterior: PrefPosterior,
    candidates: CandidateSet,
    previous_first: int | None,
    beta: float,
) -> PairDecision:
    """Optimistic challenger against the carried previous arm.

    The second arm repeats the previous round's first arm (first candidate on
    round one); the first arm maximizes the anchored upper bound
    h(x, x') + beta * sigma(x, x').
    """
    second = 0 if previous_first is None else int(previous_first)
    anchor = candidates.points[second]
    mean = posterior.mean_anchored(candidates.points, anchor)
    kt = posterior.cov_anchored(candidates.points, anchor)
    scale = np.sqrt(np.clip(np.diag(kt), 0.0, None))
    first = int(np.argmax(mean + beta * scale))
    return PairDecision(
        first=first,
        second=second,
        diagnostics={"beta": beta, "anchor_index": second},
    )


def duel_ucb_select(
    posterior: PrefPosterior,
    candidates: CandidateSet,
    anchor: np.ndarray,
    beta: float,
) -> int:
    """Anchored UCB index argmax_x [h(x, anchor) + beta * sigma(x, anchor)].

    Unlike Thompson selection this depends on the anchor; it exists to
    demonstrate that dependence and is not a benchmark policy.
    """
    mean = posterior.mean_anchored(candidates.points, anchor)
    kt = posterior.cov_anchored(candidates.points, anchor)
    scale = np.sqrt(np.clip(np.diag(kt), 0.0, None))
    return int(np.argmax(mean + beta * scale))


def random_select(candidates: CandidateSet, rng: np.random.Generator) -> PairDecision:
    """Uniform independent pair; the no-learning control."""
    first = int(rng.integers(candidates.size))
    second = int(rng.integers(candidates.size))
    return PairDecision(first=first, second=second, diagnostics={})
