"""Central finite-difference check of recorded adjoints."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

import numpy as np
from pydantic import BaseModel

from vitctl.autodiff.tensor import Parameter, Tape, Tensor, backward, zero_grad
from vitctl.exceptions import TensorError

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
# Denominator floor for the relative error; absolute error of central differences
# at step 1e-5 in float64 sits around 1e-10.
DEFAULT_FLOOR = 1e-4


class GradCheckReport(BaseModel):
    """Worst-case disagreement between adjoints and finite differences."""

    coordinates: int
    max_rel_error: float
    worst_parameter: str = ""
    worst_index: int = -1


def relative_error(analytic: float, numeric: float, floor: float = DEFAULT_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    *,
    samples: int | None = None,
    step: float = DEFAULT_STEP,
    floor: float = DEFAULT_FLOOR,
    seed: int = 0,
) -> GradCheckReport:
    """Compare backward() against central differences of ``loss_fn``.

    ``loss_fn`` must rebuild the forward pass from the current parameter values.
    With ``samples`` set, that many coordinates are drawn uniformly over all
    parameters; otherwise every coordinate is checked.
    """
    if any(p.precision.value != "float64" for p in params):
        raise TensorError("gradient checks need float64 parameters")
    zero_grad(params)
    with Tape():
        loss = loss_fn()
    backward(loss)
    analytic = {p.name: p.grad.numpy().ravel() for p in params}

    coords = [(i, j) for i, p in enumerate(params) for j in range(p.size)]
    if samples is not None and samples < len(coords):
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(coords), size=samples, replace=False)
        coords = [coords[k] for k in sorted(picked)]

    report = GradCheckReport(coordinates=len(coords), max_rel_error=0.0)
    for i, j in coords:
        p = params[i]
        base = p.value.numpy()
        flat = base.ravel()
        orig = flat[j]
        flat[j] = orig + step
        p.assign(base)
        plus = loss_fn().item()
        flat[j] = orig - step
        p.assign(base)
        minus = loss_fn().item()
        flat[j] = orig
        p.assign(base)

        numeric = (plus - minus) / (2 * step)
        err = relative_error(float(analytic[p.name][j]), numeric, floor)
        if err > report.max_rel_error:
            report = report.model_copy(
                update={"max_rel_error": err, "worst_parameter": p.name, "worst_index": j}
            )
    logger.debug(
        "Gradient check over %d coordinates: max rel. error %.3e (%s[%d])",
        report.coordinates,
        report.max_rel_error,
        report.worst_parameter,
        report.worst_index,
    )
    return report
