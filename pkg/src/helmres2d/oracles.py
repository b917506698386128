"""Closed-form reference solutions used by the tests and the validate command.

Nothing here is used by the solver itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BipolarPair:
    """Two circles of radius ``R`` centred at ``(0, +-(R + eps/2))``.

    The potential ``u`` equals -1 on the upper circle and +1 on the lower one and
    is harmonic and bounded in the exterior of both.
    """

    R: float
    epsilon: float

    @property
    def center_offset(self) -> float:
        return self.R + self.epsilon / 2.0

    @property
    def focus(self) -> float:
        c = self.center_offset
        return math.sqrt(c * c - self.R * self.R)

    @property
    def tau0(self) -> float:
        return math.acosh(self.center_offset / self.R)

    @property
    def mutual_capacitance(self) -> float:
        """``alpha_12 - alpha_11`` for the pair: ``2 pi / arccosh(1 + eps/(2R))``."""
        return 2.0 * math.pi / self.tau0

    def potential(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a = self.focus
        up = np.hypot(x[:, 0], x[:, 1] - a)
        dn = np.hypot(x[:, 0], x[:, 1] + a)
        return np.log(up / dn) / self.tau0

    def gradient(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a = self.focus
        dp = x - np.array([0.0, a])
        dm = x - np.array([0.0, -a])
        g = dp / np.sum(dp**2, axis=1)[:, None] - dm / np.sum(dm**2, axis=1)[:, None]
        return g / self.tau0

    @property
    def center_gradient(self) -> float:
        """``|grad u|`` at the origin, ``2 / (a tau0)``."""
        return 2.0 / (self.focus * self.tau0)


def circle_single_layer_eigenvalue(R: float, n: int) -> float:
    """Eigenvalue of the static single layer on ``e^{in theta}``."""
    if n == 0:
        return R * math.log(R)
    return -R / (2.0 * abs(n))


def circle_kstar_eigenvalue(n: int) -> float:
    """Eigenvalue of the static adjoint double layer on ``e^{in theta}``."""
    return 0.5 if n == 0 else 0.0


def gap_width_circle(R: float, epsilon: float, x1):
    """Exact vertical gap between the two circles at abscissa ``x1``."""
    x1 = np.asarray(x1, dtype=float)
    return epsilon + 2.0 * (R - np.sqrt(R * R - x1 * x1))
