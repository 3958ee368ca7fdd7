"""Determination ratio Q = MK/P and the fraction of noise a fit absorbs."""

from __future__ import annotations

from fractions import Fraction

from vitctl.exceptions import CapacityError
from vitctl.models import DeterminationInputs, Regime

# Q above this leaves test loss close to training loss.
WELL_DETERMINED_Q = 4


def determination_ratio(inp: DeterminationInputs) -> Fraction:
    """Exact Q = M*K/P; ``float(...)`` gives the plotted value."""
    if inp.p <= 0:
        raise CapacityError("parameter count P must be positive")
    return Fraction(inp.m * inp.k, inp.p)


def q_ratio(m: int, k: int, p: int) -> Fraction:
    return determination_ratio(DeterminationInputs(m=m, k=k, p=p))


def noise_fit_fraction(q: Fraction | float) -> Fraction | float:
    """Share 1/Q of the training noise the least-squares fit reproduces."""
    if q < 1:
        raise CapacityError(
            f"Q = {float(q):g} is underdetermined; the fit absorbs all noise below Q = 1"
        )
    return 1 / q


def classify(q: Fraction | float) -> Regime:
    if q < 1:
        return Regime.UNDERDETERMINED
    if q <= WELL_DETERMINED_Q:
        return Regime.MARGINAL
    return Regime.OVERDETERMINED
