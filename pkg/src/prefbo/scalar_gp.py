"""Kernel ridge regression posterior for the scalar-feedback baseline.

Mean and covariance follow the standard forms

    mean(x) = k_t(x)' (K_t + lam I)^{-1} o_t
    cov(x, x') = k(x, x') - k_t(x)' (K_t + lam I)^{-1} k_t(x')

with lam playing the role of the observation noise variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import BaseKernel, base_gram_cross
from .numeric import PsdFactor, factor_psd, solve_psd


@dataclass(frozen=True)
class ScalarPosterior:
    """Immutable KRR posterior over scalar observations."""

    points: np.ndarray
    observations: np.ndarray
    base: BaseKernel
    lam: float
    factor: PsdFactor
    alpha: np.ndarray  # (K + lam I)^{-1} o, precomputed

    @property
    def rounds(self) -> int:
        return self.points.shape[0]

    def mean_cov(self, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean vector and full covariance over a query point set."""
        query = np.asarray(query, dtype=float)
        if query.ndim == 1:
            query = query[:, None]
        prior = base_gram_cross(self.base, query, query)
        if self.rounds == 0:
            return np.zeros(query.shape[0]), prior
        cross = base_gram_cross(self.base, query, self.points)
        mean = cross @ self.alpha
        cov = prior - cross @ solve_psd(self.factor, cross.T)
        return mean, cov

    def mean_var(self, x: np.ndarray) -> tuple[float, float]:
        """Posterior mean and variance at one point, variance clamped at zero."""
        mean, cov = self.mean_cov(np.asarray(x, dtype=float).reshape(1, -1))
        return float(mean[0]), float(max(0.0, cov[0, 0]))


def fit_scalar(
    points: np.ndarray,
    observations: np.ndarray,
    base: BaseKernel,
    lam: float,
) -> ScalarPosterior:
    """Fit the KRR posterior; empty data gives zero mean and prior variance."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    observations = np.asarray(observations, dtype=float).reshape(-1)
    if points.shape[0] != observations.shape[0]:
        raise ValueError(
            f"{points.shape[0]} points vs {observations.shape[0]} observations"
        )
    t = points.shape[0]
    gram_matrix = base_gram_cross(base, points, points) if t else np.zeros((0, 0))
    factor = factor_psd(gram_matrix + lam * np.eye(t))
    alpha = solve_psd(factor, observations) if t else np.zeros(0)
    return ScalarPosterior(
        points=points,
        observations=observations,
        base=base,
        lam=lam,
        factor=factor,
        alpha=alpha,
    )
