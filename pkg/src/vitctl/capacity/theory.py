"""Analytic training/test MSE as functions of the determination ratio.

Training error: ``sigma^2 (1 - 1/Q)`` for Q >= 1 and zero below (the fit interpolates).
Test error: ``sigma^2 (c/Q + 1)`` with a lumped, instance-dependent constant ``c``.
Both approach the noise floor ``sigma^2`` as Q grows.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from vitctl.exceptions import CapacityError
from vitctl.models import CurvePoint, TheoryParams


def train_mse_theory(q: float, noise_variance: float) -> float:
    if q <= 0:
        raise CapacityError(f"Q must be positive, got {q}")
    if noise_variance <= 0:
        raise CapacityError(f"noise variance must be positive, got {noise_variance}")
    if q <= 1:
        return 0.0
    return noise_variance * (1.0 - 1.0 / q)


def test_mse_theory(q: float, params: TheoryParams) -> float:
    if q <= 0:
        raise CapacityError(f"Q must be positive, got {q}")
    return params.noise_variance * (params.c / q + 1.0)


def curve_sweep(q_grid: Sequence[float], params: TheoryParams) -> list[CurvePoint]:
    """Paired train/test laws over an ascending grid of Q values."""
    qs = [float(q) for q in q_grid]
    if any(q <= 0 for q in qs):
        raise CapacityError("Q grid must be positive")
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise CapacityError("Q grid must be strictly ascending")
    return [
        CurvePoint(
            q=q,
            train_mse=train_mse_theory(q, params.noise_variance),
            test_mse=test_mse_theory(q, params),
        )
        for q in qs
    ]


def doubling_grid(q_min: float = 1.0, q_max: float = 1024.0) -> list[float]:
    """q_min, 2 q_min, 4 q_min, ... up to q_max."""
    if q_min <= 0 or q_max < q_min:
        raise CapacityError(f"invalid grid bounds [{q_min}, {q_max}]")
    steps = int(np.floor(np.log2(q_max / q_min) + 1e-12))
    return [q_min * 2.0**i for i in range(steps + 1)]


def log_grid(q_min: float, q_max: float, points: int) -> list[float]:
    """Logarithmically spaced grid for semilog curves."""
    if q_min <= 0 or q_max <= q_min or points < 2:
        raise CapacityError(f"invalid grid: [{q_min}, {q_max}] with {points} points")
    return [float(q) for q in np.geomspace(q_min, q_max, points)]
