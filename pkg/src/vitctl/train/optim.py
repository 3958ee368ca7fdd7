"""AdamW: Adam moments with weight decay decoupled from the gradient path."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from vitctl.autodiff.tensor import Parameter
from vitctl.exceptions import TrainingError

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass
class OptimizerState:
    """First/second-moment accumulators keyed by parameter name."""

    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPSILON
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def moments(self, param: Parameter) -> tuple[np.ndarray, np.ndarray]:
        m = self.first_moment.get(param.name)
        if m is None:
            m = self.first_moment[param.name] = np.zeros_like(param.value.data)
            self.second_moment[param.name] = np.zeros_like(param.value.data)
        elif m.shape != param.shape:
            raise TrainingError(
                f"optimizer state for {param.name} has shape {m.shape}, parameter is {param.shape}"
            )
        return m, self.second_moment[param.name]


def _excluded(name: str, exclude: Sequence[str]) -> bool:
    return any(part in name for part in exclude)


def adamw_step(
    params: Iterable[Parameter],
    state: OptimizerState,
    lr: float,
    wd: float,
    exclude: Sequence[str] = (),
) -> None:
    """One in-place update ``theta -= lr * m_hat / (sqrt(v_hat) + eps) + lr * wd * theta``.

    Parameters whose name contains any entry of ``exclude`` skip the decay term.
    Every gradient and every updated value is checked before any parameter or moment
    moves, so a failed step leaves the model and ``state`` as they were.
    """
    params = list(params)
    for p in params:
        if not np.isfinite(p.grad.data).all():
            raise TrainingError(f"non-finite gradient in parameter {p.name}")

    step = state.step + 1
    bias1 = 1.0 - state.beta1**step
    bias2 = 1.0 - state.beta2**step
    staged = []
    with np.errstate(over="ignore", invalid="ignore"):
        for p in params:
            m, v = state.moments(p)
            g = p.grad.data
            m_new = state.beta1 * m + (1.0 - state.beta1) * g
            v_new = state.beta2 * v + (1.0 - state.beta2) * g * g

            theta = p.value.data
            update = lr * (m_new / bias1) / (np.sqrt(v_new / bias2) + state.eps)
            decay = 0.0 if _excluded(p.name, exclude) else lr * wd
            theta_new = (theta - update - decay * theta).astype(theta.dtype, copy=False)
            if not np.isfinite(theta_new).all():
                raise TrainingError(f"non-finite update for parameter {p.name}")
            staged.append((p, m, v, m_new, v_new, theta_new))

    for p, m, v, m_new, v_new, theta_new in staged:
        m[...] = m_new
        v[...] = v_new
        p.assign(theta_new)
    state.step = step
    logger.debug("AdamW step %d over %d parameters", state.step, len(params))
