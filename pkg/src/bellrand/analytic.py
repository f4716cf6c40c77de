"""Closed-form pure-state randomness, used as an oracle for the SDP path.

For the pure two-qubit family parametrized by theta, the best tomographic
measurement direction alpha and the resulting guessing probability have
closed forms; both endpoints (separable and maximally entangled) give a
quarter, i.e. two bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PureStateResult:
    theta: float
    alpha: float
    guessing_probability: float
    hmin: float


def pure_state_alpha(theta: float) -> float:
    """Optimal measurement direction for the pure state at theta.

    sin(alpha) = (-cos 2t + sqrt(cos^2 2t + 4 sin 2t (1 + sin 2t)))
                 / (2 (1 + sin 2t)),  alpha in [0, pi/2].
    """
    if not 0.0 <= theta <= math.pi / 4 + 1e-12:
        raise ValueError("theta must lie in [0, pi/4]")
    c = math.cos(2.0 * theta)
    s = math.sin(2.0 * theta)
    sin_alpha = (-c + math.sqrt(c * c + 4.0 * s * (1.0 + s))) / (2.0 * (1.0 + s))
    if not -1e-12 <= sin_alpha <= 1.0 + 1e-12:
        raise ValueError(f"formula value {sin_alpha} outside [0, 1]")
    return math.asin(min(max(sin_alpha, 0.0), 1.0))


def pure_state_guessing(theta: float) -> PureStateResult:
    """G = 1/4 (1 + sin 2t) cos^2(alpha) at the optimal alpha."""
    alpha = pure_state_alpha(theta)
    g = 0.25 * (1.0 + math.sin(2.0 * theta)) * math.cos(alpha) ** 2
    return PureStateResult(
        theta=theta, alpha=alpha, guessing_probability=g, hmin=-math.log2(g)
    )
