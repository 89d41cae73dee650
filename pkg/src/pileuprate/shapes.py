"""Truncated gamma pulse shapes and their grid normalization.

A pulse shape is ``c * t**a * exp(-b*t)`` restricted to the half-open
support ``(0, tau*dt]``.  The constant ``c`` is chosen so that the mean
square of the shape over a full sampling grid of ``n`` points equals one;
only the ``tau`` in-support samples contribute to that sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateShapeError, ParameterError


@dataclass(frozen=True)
class ShapeGrid:
    """A bank of gamma parameter pairs sharing one truncated support.

    ``pairs`` is a (p, 2) array of positive ``(theta1, theta2)`` values;
    ``tau`` is the common support length in samples.
    """

    pairs: np.ndarray
    tau: int

    def __post_init__(self):
        pairs = np.atleast_2d(np.asarray(self.pairs, dtype=float))
        if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] < 1:
            raise ParameterError("pairs must be a nonempty (p, 2) array")
        if np.any(pairs <= 0):
            raise ParameterError("all shape parameters must be positive")
        object.__setattr__(self, "pairs", pairs)
        if not isinstance(self.tau, (int, np.integer)) or self.tau < 1:
            raise ParameterError(f"tau must be a positive integer, got {self.tau}")
        object.__setattr__(self, "tau", int(self.tau))

    @property
    def n_shapes(self) -> int:
        return int(self.pairs.shape[0])

    @classmethod
    def uniform(cls, t1_from, t1_to, t1_step, t2_from, t2_to, t2_step, tau):
        """Cartesian product of two uniform parameter subdivisions."""
        t1 = np.arange(t1_from, t1_to + 0.5 * t1_step, t1_step)
        t2 = np.arange(t2_from, t2_to + 0.5 * t2_step, t2_step)
        pairs = np.array([(a, b) for a in t1 for b in t2])
        return cls(pairs=pairs, tau=tau)


def _log_raw_samples(theta1: float, theta2: float, tau: int, dt: float) -> np.ndarray:
    t = dt * np.arange(1, tau + 1, dtype=float)
    return theta1 * np.log(t) - theta2 * t


def _normalizer_parts(theta1, theta2, tau, dt, n) -> tuple[float, float]:
    """Log peak of the raw grid samples and the shifted square sum."""
    logs = _log_raw_samples(theta1, theta2, tau, dt)
    peak = float(np.max(logs))
    if not np.isfinite(peak):
        raise DegenerateShapeError(
            f"shape (theta1={theta1}, theta2={theta2}) has no finite sample"
        )
    scaled_sq = float(np.sum(np.exp(2.0 * (logs - peak))))
    if scaled_sq <= 0.0:
        raise DegenerateShapeError(
            f"shape (theta1={theta1}, theta2={theta2}) underflowed everywhere"
        )
    return peak, scaled_sq


def grid_normalizer(theta1: float, theta2: float, tau: int, dt: float, n: int) -> float:
    """Constant ``c`` making the grid mean square of the shape equal one.

    ``c = sqrt(n / sum_j raw(j*dt)**2)`` over the tau in-support samples.
    Raises :class:`DegenerateShapeError` when every sample underflows.
    """
    peak, scaled_sq = _normalizer_parts(theta1, theta2, tau, dt, n)
    return float(np.exp(-peak) * np.sqrt(n / scaled_sq))


def scaled_pulse(
    theta1: float, theta2: float, tau: int, dt: float, n: int, t
) -> np.ndarray:
    """Grid-normalized shape values at arbitrary time offsets ``t`` (seconds).

    Zero outside the support (0, tau*dt].  Evaluated in log-space with the
    same shift as the on-grid samples, so an offset landing exactly on the
    grid reproduces the corresponding dictionary value bit for bit.
    """
    peak, scaled_sq = _normalizer_parts(theta1, theta2, tau, dt, n)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    mask = (t > 0.0) & (t <= tau * dt)
    if np.any(mask):
        tm = t[mask]
        logs = theta1 * np.log(tm) - theta2 * tm
        out[mask] = np.exp(logs - peak) * np.sqrt(n / scaled_sq)
    return out


def normalized_samples(
    theta1: float, theta2: float, tau: int, dt: float, n: int
) -> tuple[np.ndarray, float]:
    """Normalized shape sampled at dt, 2*dt, ..., tau*dt, plus its normalizer."""
    peak, scaled_sq = _normalizer_parts(theta1, theta2, tau, dt, n)
    logs = _log_raw_samples(theta1, theta2, tau, dt)
    values = np.exp(logs - peak) * np.sqrt(n / scaled_sq)
    c = float(np.exp(-peak) * np.sqrt(n / scaled_sq))
    return values, c
