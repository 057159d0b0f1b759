"""Exponential running-average filtering of force magnitudes."""

from __future__ import annotations

import math
from typing import Sequence


class EmaFilter:
    """First-order running average: y(n+1) = alpha*x(n+1) + (1-alpha)*y(n).

    The first accepted sample seeds the state, so there is no zero-bias
    startup transient. alpha must lie strictly inside (0, 1); alpha=1
    would reproduce the raw signal and alpha=0 would never move.
    """

    __slots__ = ("alpha", "state")

    def __init__(self, alpha: float):
        if not (isinstance(alpha, (int, float)) and math.isfinite(alpha)):
            raise ValueError(f"alpha must be a finite number, got {alpha!r}")
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
        self.alpha = float(alpha)
        self.state: float | None = None

    def update(self, sample: float) -> float:
        """Fold one sample into the average and return the new state.

        Non-finite samples are rejected and leave the state unchanged.
        """
        value = float(sample)
        if not math.isfinite(value):
            raise ValueError(f"rejected non-finite sample {sample!r}")
        if self.state is None:
            self.state = value
        else:
            self.state = self.alpha * value + (1.0 - self.alpha) * self.state
        return self.state

    @property
    def initialized(self) -> bool:
        return self.state is not None

    def reset(self) -> None:
        self.state = None


def mean_contact_force(values: Sequence[float]) -> float:
    """Arithmetic mean over the fingertips configured as contacts."""
    if len(values) == 0:
        raise ValueError("cannot aggregate over an empty contact set")
    return sum(float(v) for v in values) / len(values)
