"""Utility functions, candidate grids, and feedback oracles for simulation.

Preference labels follow the Bradley-Terry-Luce model: a duel between x and
x' returns 1 with probability mu(f(x) - f(x')) where mu is the logistic link.
Instantaneous dueling regret compares both played actions against the grid
optimum on the probability scale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .inference import LOGISTIC, LogisticLink
from .kernels import RkhsSample
from .policies import CandidateSet

ACKLEY_A = 20.0
ACKLEY_B = 0.2
ACKLEY_C = 2.0 * np.pi


class ParseError(ValueError):
    """Tabular input could not be parsed; the message names the culprit."""


class EmptyData(ParseError):
    """Tabular input contained no data rows."""


class NonNumeric(ParseError):
    """A feature or utility cell failed numeric conversion."""


@dataclass(frozen=True)
class Utility:
    """Latent utility over the action space.

    ``ackley_flipped`` and ``rkhs_sample`` kinds evaluate anywhere; the
    ``tabular`` kind is defined only on its listed points and raises KeyError
    elsewhere.
    """

    kind: str
    _evaluator: object = None
    _table: dict | None = None

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if self._table is not None:
            key = x.tobytes()
            if key not in self._table:
                raise KeyError(f"tabular utility is undefined at {x}")
            return self._table[key]
        return float(self._evaluator(x))

    def values(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        return np.array([self.value(p) for p in points])

    def grid_argmax(self, candidates: CandidateSet) -> int:
        """Index of the best candidate; ties break to the lowest index."""
        return int(np.argmax(self.values(candidates.points)))


def ackley_flipped(x: np.ndarray) -> float:
    """Negated Ackley value with a = 20, b = 0.2, c = 2 pi; maximum 0 at 0."""
    x = np.asarray(x, dtype=float).reshape(-1)
    quad = np.sqrt(np.mean(x**2))
    cosine = np.mean(np.cos(ACKLEY_C * x))
    ackley = (
        -ACKLEY_A * np.exp(-ACKLEY_B * quad) - np.exp(cosine) + ACKLEY_A + np.e
    )
    return float(-ackley)


def ackley_utility() -> Utility:
    return Utility(kind="ackley_flipped", _evaluator=ackley_flipped)


def rkhs_utility(sample: RkhsSample) -> Utility:
    return Utility(kind="rkhs_sample", _evaluator=sample)


def tabular_utility(points: np.ndarray, values: np.ndarray) -> Utility:
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    table = {points[i].tobytes(): float(values[i]) for i in range(points.shape[0])}
    return Utility(kind="tabular", _table=table)


def load_tabular(
    path,
    feature_columns: list[str],
    utility_column: str,
    rescale: tuple[float, float] | None = None,
    divide_by: float | None = None,
) -> tuple[CandidateSet, Utility]:
    """Load a candidate table from a CSV file with a header row.

    ``rescale=[lo, hi]`` affinely maps the utility column so its minimum hits
    lo and its maximum hi; ``divide_by`` divides instead.  The two options are
    mutually exclusive.
    """
    if rescale is not None and divide_by is not None:
        raise ValueError("rescale and divide_by are mutually exclusive")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for column in list(feature_columns) + [utility_column]:
            if column not in header:
                raise ParseError(f"column {column!r} missing from {path.name}")
        rows: list[list[float]] = []
        utilities: list[float] = []
        for row_number, row in enumerate(reader, start=2):
            features = []
            for column in feature_columns:
                cell = row.get(column)
                try:
                    features.append(float(cell))
                except (TypeError, ValueError):
                    raise NonNumeric(
                        f"row {row_number}, column {column!r}: not numeric: {cell!r}"
                    ) from None
            cell = row.get(utility_column)
            try:
                utilities.append(float(cell))
            except (TypeError, ValueError):
                raise NonNumeric(
                    f"row {row_number}, column {utility_column!r}: not numeric: {cell!r}"
                ) from None
            rows.append(features)
    if not rows:
        raise EmptyData(f"{path.name} has no data rows")
    points = np.asarray(rows, dtype=float)
    values = np.asarray(utilities, dtype=float)
    if rescale is not None:
        lo, hi = float(rescale[0]), float(rescale[1])
        span = values.max() - values.min()
        if span == 0.0:
            values = np.full_like(values, lo)
        else:
            values = lo + (values - values.min()) * (hi - lo) / span
    elif divide_by is not None:
        values = values / float(divide_by)
    return CandidateSet.from_points(points), tabular_utility(points, values)


@dataclass
class BtlOracle:
    """Bernoulli preference oracle over a latent utility."""

    utility: Utility
    link: LogisticLink
    rng: np.random.Generator

    def win_probability(self, x: np.ndarray, x_prime: np.ndarray) -> float:
        return float(self.link.mu(self.utility.value(x) - self.utility.value(x_prime)))

    def preference(self, x: np.ndarray, x_prime: np.ndarray) -> int:
        return int(self.rng.random() < self.win_probability(x, x_prime))


def preference_feedback(oracle: BtlOracle, x: np.ndarray, x_prime: np.ndarray) -> int:
    """One Bernoulli(mu(f(x) - f(x'))) draw from the oracle's generator."""
    return oracle.preference(x, x_prime)


def scalar_feedback(
    utility: Utility,
    x: np.ndarray,
    rng: np.random.Generator,
    noise_sd: float = 1.0,
) -> float:
    """Noisy scalar observation f(x) + noise_sd * N(0, 1)."""
    noise = noise_sd * rng.standard_normal() if noise_sd > 0 else 0.0
    return float(utility.value(x) + noise)


def instantaneous_regret(
    utility: Utility,
    x_star: np.ndarray,
    x_t: np.ndarray,
    x_prime_t: np.ndarray,
    link: LogisticLink = LOGISTIC,
) -> float:
    """Dueling regret (mu(f* - f_t) + mu(f* - f'_t) - 1) / 2 against the optimum."""
    best = utility.value(x_star)
    return float(
        (
            link.mu(best - utility.value(x_t))
            + link.mu(best - utility.value(x_prime_t))
            - 1.0
        )
        / 2.0
    )
