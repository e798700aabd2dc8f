"""Preference inference: logistic-loss predictor, uncertainty, and sampling.

Given a history of pairwise outcomes, the predictor of the latent difference
function is the minimizer over coefficients theta of

    sum_i [ -y_i log mu(u_i) - (1 - y_i) log(1 - mu(u_i)) ] + (lam / 2) |theta|^2,

with u = K theta for the pair-kernel Gram matrix K of the queried pairs.  The
uncertainty proxy replaces the scalar-feedback posterior kernel with

    kd_t(z, z') = kd(z, z') - kd_t(z)' (K + lam * kappa * I)^{-1} kd_t(z'),

where kappa bounds the inverse link slope over reachable utility differences.
Both the realized information gain and the confidence width derive from the
same regularized Gram factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .kernels import DuelingKernel, dueling_gram_cross, kernel_profile, pairs_from
from .numeric import PsdFactor, factor_psd, sample_mvn, solve_psd

GRADIENT_TOLERANCE = 1e-6
MAX_NEWTON_ITERATIONS = 100


class NoConvergence(Exception):
    """Newton failed to reach a small gradient; the loss is strictly convex,
    so this signals numerical trouble rather than a hard problem."""


@dataclass(frozen=True)
class LogisticLink:
    """Logistic link from utility differences to win probabilities.

    mu(0) = 1/2, mu is strictly increasing, and mu(u) + mu(-u) = 1.  The
    derivative mu'(u) = mu(u)(1 - mu(u)) peaks at 1/4, which is the Lipschitz
    constant used when converting utility gaps to probability gaps.
    """

    lipschitz: float = 0.25

    @staticmethod
    def mu(u):
        return expit(u)

    @staticmethod
    def mu_dot(u):
        return expit(u) * expit(-u)


LOGISTIC = LogisticLink()


def kappa_from_norm(norm_bound: float) -> float:
    """Inverse link slope bound 1 / mu'(2B).

    Utility differences under a unit-normalized kernel are bounded by 2B, so
    the slope of the link never falls below mu'(2B) on reachable pairs.
    """
    return float(1.0 / LOGISTIC.mu_dot(2.0 * norm_bound))


class PreferenceHistory:
    """Append-only record of preference queries (x_i, x'_i, y_i)."""

    def __init__(self, dim: int):
        self.dim = dim
        self._firsts: list[np.ndarray] = []
        self._seconds: list[np.ndarray] = []
        self._labels: list[int] = []

    def append(self, x: np.ndarray, x_prime: np.ndarray, y: int) -> None:
        x = np.asarray(x, dtype=float).reshape(-1)
        x_prime = np.asarray(x_prime, dtype=float).reshape(-1)
        if x.shape != (self.dim,) or x_prime.shape != (self.dim,):
            raise ValueError(f"points must have dim {self.dim}")
        if y not in (0, 1):
            raise ValueError("label must be 0 or 1")
        self._firsts.append(x)
        self._seconds.append(x_prime)
        self._labels.append(int(y))

    def __len__(self) -> int:
        return len(self._labels)

    @property
    def pairs(self) -> np.ndarray:
        if not self._labels:
            return np.zeros((0, 2, self.dim))
        return pairs_from(np.vstack(self._firsts), np.vstack(self._seconds))

    @property
    def labels(self) -> np.ndarray:
        return np.asarray(self._labels, dtype=float)


@dataclass(frozen=True)
class PrefPosterior:
    """Fitted preferential posterior on a pair kernel.

    Immutable once fitted; safe to read from concurrent evaluations.  The
    ``cov_factor`` is the Cholesky factor of (K + lam * kappa * I) and backs
    every covariance query; ``realized_gain`` is half the log-determinant of
    (I + K / (lam * kappa)) for the pairs actually played.
    """

    theta: np.ndarray
    pairs: np.ndarray
    labels: np.ndarray
    dueling: DuelingKernel
    lam: float
    kappa: float
    gram: np.ndarray
    cov_factor: PsdFactor
    realized_gain: float
    norm_bound: float

    @property
    def rounds(self) -> int:
        return self.pairs.shape[0]

    def cross(self, pairs: np.ndarray) -> np.ndarray:
        """Pair-kernel vector stack kd(z, z_i) against the history, (m, t)."""
        if self.rounds == 0:
            return np.zeros((np.asarray(pairs).shape[0], 0))
        return dueling_gram_cross(self.dueling, pairs, self.pairs)

    def mean_many(self, pairs: np.ndarray) -> np.ndarray:
        """Predictor values h_t(z) = sum_i theta_i kd(z, z_i)."""
        if self.rounds == 0:
            return np.zeros(np.asarray(pairs).shape[0])
        return self.cross(pairs) @ self.theta

    def cov_many(self, pairs_a: np.ndarray, pairs_b: np.ndarray | None = None) -> np.ndarray:
        """Posterior covariance kd_t between two stacks of pairs."""
        symmetric = pairs_b is None
        pairs_b = pairs_a if symmetric else pairs_b
        prior = dueling_gram_cross(self.dueling, pairs_a, pairs_b)
        if self.rounds == 0:
            return prior
        ca = self.cross(pairs_a)
        cb = ca if symmetric else self.cross(pairs_b)
        return prior - ca @ solve_psd(self.cov_factor, cb.T)

    def variance_many(self, pairs: np.ndarray) -> np.ndarray:
        """Diagonal kd_t(z, z) for a stack of pairs, clamped at zero."""
        pairs = np.asarray(pairs, dtype=float)
        prior = prior_variance(self.dueling, pairs)
        if self.rounds == 0:
            return np.clip(prior, 0.0, None)
        c = self.cross(pairs)
        reduction = np.einsum("ij,ij->i", c, solve_psd(self.cov_factor, c.T).T)
        return np.clip(prior - reduction, 0.0, None)

    def mean_anchored(self, points: np.ndarray, anchor: np.ndarray) -> np.ndarray:
        """h_t(x, anchor) over a point set; the utility surrogate up to a shift."""
        return self.mean_many(_anchored_pairs(points, anchor))

    def cov_anchored(self, points: np.ndarray, anchor: np.ndarray) -> np.ndarray:
        """kd_t((x, anchor), (u, anchor)) over a point set."""
        return self.cov_many(_anchored_pairs(points, anchor))


def _anchored_pairs(points: np.ndarray, anchor: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    anchor = np.asarray(anchor, dtype=float).reshape(1, -1)
    return pairs_from(points, np.repeat(anchor, points.shape[0], axis=0))


def prior_variance(dueling: DuelingKernel, pairs: np.ndarray) -> np.ndarray:
    """Prior diagonal kd(z, z) = k(x,x) + k(x',x') - 2 k(x,x'), vectorized."""
    pairs = np.asarray(pairs, dtype=float)
    if pairs.shape[0] == 0:
        return np.zeros(0)
    firsts, seconds = pairs[:, 0, :], pairs[:, 1, :]
    distances = np.linalg.norm(firsts - seconds, axis=1)
    cross = kernel_profile(dueling.base, distances)
    return 2.0 * dueling.base.signal_variance - 2.0 * cross


def _logistic_loss(u: np.ndarray, labels: np.ndarray, theta: np.ndarray, lam: float) -> float:
    # -y log mu(u) - (1-y) log(1 - mu(u)) written via logaddexp for stability.
    nll = labels * np.logaddexp(0.0, -u) + (1.0 - labels) * np.logaddexp(0.0, u)
    return float(np.sum(nll) + 0.5 * lam * theta @ theta)


def _minimize_logistic(
    gram_matrix: np.ndarray,
    labels: np.ndarray,
    lam: float,
    theta0: np.ndarray,
    max_iterations: int = MAX_NEWTON_ITERATIONS,
):
    """Damped Newton on the regularized logistic loss in coefficient space.

    Returns (theta, gradient_norm, accepted_losses).  Step halving enforces an
    Armijo decrease, so the accepted losses are strictly nonincreasing.
    """
    t = labels.shape[0]
    theta = theta0.copy()
    losses = []
    u = gram_matrix @ theta
    loss = _logistic_loss(u, labels, theta, lam)
    losses.append(loss)
    gradient_norm = np.inf
    for _ in range(max_iterations):
        p = expit(u)
        gradient = gram_matrix @ (p - labels) + lam * theta
        gradient_norm = float(np.linalg.norm(gradient))
        if gradient_norm <= GRADIENT_TOLERANCE:
            break
        weights = p * (1.0 - p)
        hessian = (gram_matrix * weights) @ gram_matrix + lam * np.eye(t)
        direction = -solve_psd(factor_psd(hessian), gradient)
        descent = float(gradient @ direction)
        step = 1.0
        while step > 2.0**-45:
            candidate = theta + step * direction
            cu = gram_matrix @ candidate
            closs = _logistic_loss(cu, labels, candidate, lam)
            if closs <= loss + 1e-4 * step * descent:
                theta, u, loss = candidate, cu, closs
                losses.append(loss)
                break
            step /= 2.0
        else:
            break  # no float step decreases the loss; let the caller judge
    else:
        p = expit(u)
        gradient = gram_matrix @ (p - labels) + lam * theta
        gradient_norm = float(np.linalg.norm(gradient))
    return theta, gradient_norm, losses


def fit(
    history: PreferenceHistory,
    dueling: DuelingKernel,
    lam: float,
    norm_bound: float,
    warm_start: np.ndarray | None = None,
    gram_matrix: np.ndarray | None = None,
    max_iterations: int = MAX_NEWTON_ITERATIONS,
) -> PrefPosterior:
    """Fit the preferential posterior on a history of pair outcomes.

    An empty history gives the prior (zero predictor, prior covariance).
    ``warm_start`` may carry the previous round's coefficients padded with
    zeros; it changes nothing but the iteration count.  ``gram_matrix`` lets
    run loops reuse an incrementally grown pair Gram matrix.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    pairs = history.pairs
    labels = history.labels
    t = pairs.shape[0]
    kappa = kappa_from_norm(norm_bound)
    if gram_matrix is None:
        gram_matrix = (
            dueling_gram_cross(dueling, pairs, pairs) if t else np.zeros((0, 0))
        )
    if t == 0:
        theta = np.zeros(0)
        gain = 0.0
    else:
        theta0 = np.zeros(t)
        if warm_start is not None:
            theta0[: min(t, warm_start.shape[0])] = warm_start[: min(t, warm_start.shape[0])]
        theta, gradient_norm, _ = _minimize_logistic(
            gram_matrix, labels, lam, theta0, max_iterations
        )
        if gradient_norm > 1e-3:
            raise NoConvergence(
                f"gradient norm {gradient_norm:.3e} after {max_iterations} iterations"
            )
        scaled = np.linalg.cholesky(np.eye(t) + gram_matrix / (lam * kappa))
        gain = float(np.sum(np.log(np.diag(scaled))))
    cov_factor = factor_psd(gram_matrix + lam * kappa * np.eye(t))
    return PrefPosterior(
        theta=theta,
        pairs=pairs,
        labels=labels,
        dueling=dueling,
        lam=lam,
        kappa=kappa,
        gram=gram_matrix,
        cov_factor=cov_factor,
        realized_gain=gain,
        norm_bound=norm_bound,
    )


def predict_mean(posterior: PrefPosterior, z) -> float:
    """Predictor value h_t(z) for one pair z = (x, x')."""
    return float(posterior.mean_many(np.asarray(z, dtype=float)[None, ...])[0])


def predict_var(posterior: PrefPosterior, z1, z2) -> float:
    """Posterior covariance kd_t(z1, z2) for two single pairs."""
    z1 = np.asarray(z1, dtype=float)[None, ...]
    z2 = np.asarray(z2, dtype=float)[None, ...]
    return float(posterior.cov_many(z1, z2)[0, 0])


def sigma(posterior: PrefPosterior, z) -> float:
    """Posterior scale sqrt(max(0, kd_t(z, z)))."""
    return float(np.sqrt(max(0.0, predict_var(posterior, z, z))))


def beta(posterior: PrefPosterior, delta: float) -> float:
    """Confidence-width multiplier 4B + 2 sqrt((2 kappa / lam)(gain + log(1/delta))).

    Uses the realized information gain of the played pairs; see the module
    docs for why that is the quantity the width consumes in practice.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    inner = (2.0 * posterior.kappa / posterior.lam) * (
        posterior.realized_gain + np.log(1.0 / delta)
    )
    return float(4.0 * posterior.norm_bound + 2.0 * np.sqrt(inner))


def information_gain(posterior: PrefPosterior) -> float:
    """Realized gain (1/2) log det(I + K / (lam * kappa)) of the played pairs."""
    return posterior.realized_gain


def sample_posterior(
    posterior: PrefPosterior,
    candidates,
    anchor: np.ndarray,
    v: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw the anchored utility sample f(x) = h(x, anchor) over candidates.

    The joint Gaussian has mean h_t(x, anchor) and covariance
    v^2 kd_t((x, anchor), (u, anchor)); the implied pair sample is the
    difference f(x) - f(x').  With v = 0 this returns the anchored mean
    exactly, and the anchor coordinate itself is exactly zero whenever the
    anchor is one of the candidates.
    """
    if v < 0:
        raise ValueError("exploration scale must be nonnegative")
    points = np.asarray(getattr(candidates, "points", candidates), dtype=float)
    mean = posterior.mean_anchored(points, anchor)
    cov = posterior.cov_anchored(points, anchor) * (v * v)
    return sample_mvn(mean, cov, rng)
