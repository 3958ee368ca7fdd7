"""Least-squares Monte Carlo oracle for the overdetermination laws.

Each trial draws a Gaussian design X (K x n, n = P/M features), true weights
W* (n x M) and Gaussian output noise, fits W by SVD-based least squares (the
minimum-norm solution when the system is underdetermined or rank-deficient) and
measures the MSE on the training set and on a fresh test set.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from vitctl.capacity.ratio import q_ratio
from vitctl.capacity.theory import train_mse_theory
from vitctl.exceptions import CapacityError
from vitctl.models import (
    LinearExperimentConfig,
    LinearExperimentResult,
    OracleRow,
    TrialOutcome,
)
from vitctl.sweep.datafile import format_table

logger = logging.getLogger(__name__)

ORACLE_COLUMNS = (
    "determination",
    "loss",
    "val_loss",
    "predicted_loss",
    "noise_floor",
    "expected_val_loss",
)


def trial_seed(seed: int, trial: int) -> np.random.SeedSequence:
    """Independent, reproducible stream for one trial."""
    return np.random.SeedSequence([seed, trial])


def run_trial(
    config: LinearExperimentConfig, seed: int | np.random.SeedSequence
) -> TrialOutcome:
    rng = np.random.default_rng(seed)
    n, m, k = config.features, config.m, config.k_train

    x = rng.standard_normal((k, n))
    w_true = rng.standard_normal((n, m))
    y = x @ w_true + config.sigma * rng.standard_normal((k, m))

    w_fit, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    train_mse = float(np.mean((x @ w_fit - y) ** 2))

    x_test = rng.standard_normal((config.k_test, n))
    y_test = x_test @ w_true + config.sigma * rng.standard_normal((config.k_test, m))
    test_mse = float(np.mean((x_test @ w_fit - y_test) ** 2))

    rank_deficient = int(rank) < min(k, n)
    if rank_deficient:
        logger.warning("Design matrix has rank %d < %d; using minimum-norm fit", rank, min(k, n))
    return TrialOutcome(train_mse=train_mse, test_mse=test_mse, rank_deficient=rank_deficient)


def expected_test_mse_gaussian(features: int, k: int, noise_variance: float) -> float | None:
    """Exact expected test MSE of OLS under a standard Gaussian design (K > n + 1)."""
    if k <= features + 1:
        return None
    return noise_variance * (1.0 + features / (k - features - 1))


def _stats(values: list[float]) -> tuple[float, float, float]:
    arr = np.asarray(values)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, std, std / math.sqrt(arr.size)


def run_experiment(config: LinearExperimentConfig, workers: int = 1) -> LinearExperimentResult:
    """Run ``config.trials`` independent trials and aggregate them in trial order."""
    seeds = [trial_seed(config.seed, i) for i in range(config.trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda s: run_trial(config, s), seeds))
    else:
        outcomes = [run_trial(config, s) for s in seeds]

    train = [o.train_mse for o in outcomes]
    test = [o.test_mse for o in outcomes]
    train_mean, train_std, train_se = _stats(train)
    test_mean, test_std, test_se = _stats(test)

    noise = config.sigma**2
    q = float(q_ratio(config.m, config.k_train, config.p))
    predicted = train_mse_theory(q, noise) if noise > 0 else 0.0
    logger.info(
        "P=%d M=%d K=%d: train %.4f (pred %.4f), test %.4f over %d trials",
        config.p,
        config.m,
        config.k_train,
        train_mean,
        predicted,
        test_mean,
        config.trials,
    )
    return LinearExperimentResult(
        config=config,
        train_mses=train,
        test_mses=test,
        train_mean=train_mean,
        train_std=train_std,
        train_stderr=train_se,
        test_mean=test_mean,
        test_std=test_std,
        test_stderr=test_se,
        rank_deficient_trials=sum(o.rank_deficient for o in outcomes),
        predicted_train_mse=predicted,
        noise_floor=noise,
        expected_test_mse=expected_test_mse_gaussian(config.features, config.k_train, noise),
    )


def sweep_over_k(
    config: LinearExperimentConfig, k_list: Sequence[int], workers: int = 1
) -> list[OracleRow]:
    """One experiment per training-set size, holding P and M fixed."""
    ks = list(k_list)
    if not ks or any(b <= a for a, b in zip(ks, ks[1:])):
        raise CapacityError(f"K list must be non-empty and strictly ascending, got {ks}")
    rows = []
    for k in ks:
        result = run_experiment(config.model_copy(update={"k_train": k}), workers=workers)
        rows.append(
            OracleRow(
                k=k,
                q=float(q_ratio(config.m, k, config.p)),
                train_mse=result.train_mean,
                test_mse=result.test_mean,
                train_stderr=result.train_stderr,
                test_stderr=result.test_stderr,
                predicted_train_mse=result.predicted_train_mse,
                noise_floor=result.noise_floor,
                expected_test_mse=result.expected_test_mse,
            )
        )
    return rows


def fit_lumped_c(rows: Sequence[OracleRow]) -> float:
    """Least-squares c in test_mse = sigma^2 (c/Q + 1) over the overdetermined rows."""
    usable = [r for r in rows if r.q > 1 and r.noise_floor > 0]
    if not usable:
        raise CapacityError("no overdetermined rows with noise to fit c against")
    x = np.array([1.0 / r.q for r in usable])
    y = np.array([r.test_mse / r.noise_floor - 1.0 for r in usable])
    return float(x @ y / (x @ x))


def oracle_table(rows: Sequence[OracleRow]) -> str:
    return format_table(
        ORACLE_COLUMNS,
        [
            (
                r.q,
                r.train_mse,
                r.test_mse,
                r.predicted_train_mse,
                r.noise_floor,
                r.expected_test_mse,
            )
            for r in rows
        ],
    )
