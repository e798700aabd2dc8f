"""Dense PSD linear algebra and Gaussian sampling shared by every module.

Gram matrices built from preference pairs are exactly rank deficient whenever
a pair repeats, so factorization goes through an escalating jitter ladder
instead of failing on the first semidefinite input.  All stochastic routines
take an explicit ``numpy.random.Generator``; there is no global RNG anywhere
in the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

# Escalates 1e-12 -> 1e-4 in x10 steps; beyond 1e-4 the input is treated as
# genuinely indefinite.
JITTER_LADDER = tuple(10.0**-e for e in range(12, 3, -1))

# Smallest eigenvalue tolerated before sampling refuses the covariance.
EIGENVALUE_FLOOR = -1e-8


class NotPsd(Exception):
    """Matrix stayed indefinite after the full jitter ladder."""


class DimensionMismatch(ValueError):
    """Operands have incompatible shapes."""


@dataclass(frozen=True)
class PsdFactor:
    """Lower-triangular Cholesky factor of a symmetric PSD matrix.

    ``lower_factor @ lower_factor.T`` reconstructs the (symmetrized) input
    plus ``jitter_used * I``.  ``jitter_used`` is 0 when the plain
    factorization succeeded, otherwise one rung of :data:`JITTER_LADDER`.
    """

    matrix_dim: int
    lower_factor: np.ndarray
    jitter_used: float


def factor_psd(m: np.ndarray) -> PsdFactor:
    """Cholesky-factor a symmetric matrix, escalating diagonal jitter on failure.

    The input must be symmetric within 1e-10; it is symmetrized by averaging
    before factoring.  Raises :class:`NotPsd` if even 1e-4 jitter does not
    produce a positive definite matrix.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) > 1e-10:
        raise ValueError("matrix is not symmetric within 1e-10")
    sym = (m + m.T) / 2.0
    eye = np.eye(m.shape[0])
    for jitter in (0.0,) + JITTER_LADDER:
        try:
            lower = np.linalg.cholesky(sym + jitter * eye if jitter else sym)
        except np.linalg.LinAlgError:
            continue
        return PsdFactor(m.shape[0], lower, jitter)
    raise NotPsd(f"matrix of dim {m.shape[0]} not PSD even with jitter 1e-4")


def solve_psd(factor: PsdFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve (M + jitter*I) x = rhs given the factor of M.

    ``rhs`` may be a vector or a matrix of stacked right-hand sides.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != factor.matrix_dim:
        raise DimensionMismatch(
            f"rhs has leading dim {rhs.shape[0]}, factor dim {factor.matrix_dim}"
        )
    if factor.matrix_dim == 0:
        return rhs.copy()
    return cho_solve((factor.lower_factor, True), rhs)


def sample_mvn(
    mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw one sample from N(mean, cov), tolerating semidefinite covariances.

    Eigenvalues down to -1e-8 are clamped to zero (posterior covariances
    restricted to a grid are PSD in exact arithmetic only); anything lower
    raises :class:`NotPsd`.  Coordinates whose diagonal entry is exactly
    nonpositive carry zero noise, so zero covariance returns the mean exactly.
    Deterministic for a given generator state.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = mean.shape[0]
    if cov.shape != (n, n):
        raise DimensionMismatch(f"mean dim {n} vs cov shape {cov.shape}")
    sym = (cov + cov.T) / 2.0
    eigenvalues, eigenvectors = np.linalg.eigh(sym)
    if eigenvalues.size and eigenvalues[0] < EIGENVALUE_FLOOR:
        raise NotPsd(f"covariance has eigenvalue {eigenvalues[0]:.3e} < -1e-8")
    transform = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
    # A PSD matrix with a zero diagonal entry has a zero row; make that exact.
    transform[np.diag(sym) <= 0.0, :] = 0.0
    return mean + transform @ rng.standard_normal(n)


def rng_from_seed(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed plus an integer stream key.

    The documented split used throughout the package: environment (oracle)
    noise draws from stream ``(0,)``, policy randomness from stream ``(1,)``,
    and interactive sessions key their per-round draws by round index.  The
    same ``(seed, stream)`` always yields a bit-identical stream.
    """
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=stream))
    )
