"""Post-processing of the sparse regressor and counting-rate estimators.

The solver output is turned into events in two steps: blocks with a
small l1 norm are zeroed, then arrival times are read off the rising
edges of the remaining active-block pattern.  The rate estimate divides
the event count by the last estimated arrival.  Reference rates from
ground truth and the idle-time baseline live here as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, UndefinedRateError
from .simulate import GroundTruth, SampledSignal
from .solver import SparseRegressor


@dataclass(frozen=True)
class EventEstimate:
    """Detected events: count, arrival times, and the surviving blocks."""

    m_hat: int
    t_hat: np.ndarray
    active_blocks: np.ndarray
    eta: float | None
    r: float | None

    def __post_init__(self):
        if self.m_hat != len(self.t_hat):
            raise ParameterError("m_hat must equal len(t_hat)")


@dataclass
class RateReport:
    """Rate estimates for one signal; ground-truth fields stay None when unknown."""

    lambda_hat: float | None
    events: EventEstimate
    lambda_c: float | None = None
    lambda_opt: float | None = None
    lambda_std: float | None = None

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "m_hat": self.events.m_hat,
            "t_hat": [float(t) for t in self.events.t_hat],
            "lambda_std": self.lambda_std,
            "lambda_opt": self.lambda_opt,
            "lambda_c": self.lambda_c,
        }


def threshold_blocks(beta: SparseRegressor, eta: float) -> SparseRegressor:
    """Zero every block whose l1 norm falls below ``eta``; keep the rest as is."""
    if not eta > 0:
        raise ParameterError("eta must be positive")
    blocks, norms = beta.block_l1_norms()
    keep_blocks = set(int(b) for b, v in zip(blocks, norms) if v >= eta)
    mask = np.fromiter(
        (int(i) // beta.n_shapes in keep_blocks for i in beta.indices),
        dtype=bool,
        count=beta.indices.size,
    )
    return SparseRegressor(
        n_blocks=beta.n_blocks,
        n_shapes=beta.n_shapes,
        indices=beta.indices[mask],
        values=beta.values[mask],
        r=beta.r,
        objective=None,
        kkt_violation=None,
        eta=float(eta),
    )


def extract_events(beta_thresholded: SparseRegressor, dt: float) -> EventEstimate:
    """Arrival times at the rising edges of the active-block indicator.

    A block opens an event when it is active and its left neighbor is not;
    index -1 counts as inactive, so an active block 0 opens an event.
    """
    if not dt > 0:
        raise ParameterError("dt must be positive")
    active = beta_thresholded.block_pattern()
    if active.size == 0:
        return EventEstimate(
            m_hat=0,
            t_hat=np.zeros(0),
            active_blocks=active,
            eta=beta_thresholded.eta,
            r=beta_thresholded.r,
        )
    rising = np.concatenate([[True], np.diff(active) > 1])
    starts = active[rising]
    return EventEstimate(
        m_hat=int(starts.size),
        t_hat=starts.astype(float) * dt,
        active_blocks=active,
        eta=beta_thresholded.eta,
        r=beta_thresholded.r,
    )


def estimate_rate(events: EventEstimate) -> float:
    """Event count divided by the last estimated arrival time."""
    if events.m_hat < 1:
        raise UndefinedRateError("no events detected")
    last = float(events.t_hat[-1])
    if last <= 0:
        raise UndefinedRateError("last estimated arrival is at time zero")
    return events.m_hat / last


def ideal_rate(truth: GroundTruth) -> float:
    """Continuous-time reference: event count over the last true arrival."""
    if truth.n_events < 1:
        raise UndefinedRateError("ground truth holds no events")
    last = float(truth.arrivals[-1])
    if last <= 0:
        raise UndefinedRateError("last arrival is at time zero")
    return truth.n_events / last


def optimal_rate(p0, dt: float) -> float:
    """Best rate attainable from sampled data: |P0| / (dt * max P0)."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    p0 = set(int(k) for k in p0)
    if not p0:
        raise UndefinedRateError("empty optimal index set")
    top = max(p0)
    if top < 1:
        raise UndefinedRateError("max index of P0 is zero")
    return len(p0) / (dt * top)


def idle_time_rate(signal: SampledSignal, threshold: float | None = None) -> float:
    """Baseline estimator from the detector idle times.

    Samples above the threshold are busy; an idle run counts only when
    bounded by busy runs on both sides, keeping its duration exponential.
    The estimate is the number of complete idle runs over their total
    duration.  Default threshold: three noise sigmas.
    """
    if threshold is None:
        threshold = 3.0 * signal.noise_sigma
    if not threshold > 0:
        raise ParameterError("threshold must be positive")
    busy_idx = np.flatnonzero(signal.samples > threshold)
    if busy_idx.size == 0:
        raise UndefinedRateError("signal never crosses the threshold")
    # idle runs strictly inside [first busy, last busy]
    gaps = np.diff(busy_idx) - 1
    n_runs = int(np.count_nonzero(gaps))
    total = float(np.sum(gaps)) * signal.grid.dt
    if n_runs == 0 or total <= 0:
        raise UndefinedRateError("no complete idle run between busy periods")
    return n_runs / total
