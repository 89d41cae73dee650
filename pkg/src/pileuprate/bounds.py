"""Evaluators for the theoretical guarantees of the pipeline.

Everything here is a computable closed form or a finite scan: the
Gaussian tail surrogate, the recommended block threshold and penalty
admissibility window, support-recovery probabilities, the two
correlation levels with their index radii, upper/lower gap bounds on
the rate estimate against the best sampled-data rate, the minimal
separation probability of a Poisson train, a certified upper estimate
of the model discrepancy, and the irrepresentability check.

Probabilities are reported raw and clipped to [0, 1]; pass/fail logic
always uses the raw values.  A bound whose hypotheses fail is flagged
inapplicable instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls as _nnls

from .dictionary import CorrelationProfile, GammaDictionary
from .errors import ParameterError
from .estimation import EventEstimate
from .simulate import GroundTruth, synthesize_signal
from .solver import SparseRegressor


@dataclass(frozen=True)
class BoundInputs:
    """Scalar quantities every bound evaluator draws from.

    ``alpha`` is the model discrepancy (upper estimate), ``g_min`` the
    smallest entry of the one-block Gram matrix, ``g_mass`` the summed
    per-offset maximal correlations.
    """

    e_min: float
    e_max: float
    sigma: float
    alpha: float
    g_min: float
    g_mass: float
    tau: int
    p: int
    n: int
    r: float
    eta: float
    dt: float = 1.0

    def __post_init__(self):
        if not (0 < self.e_min <= self.e_max):
            raise ParameterError("need 0 < e_min <= e_max")
        if self.alpha < 0:
            raise ParameterError("alpha must be nonnegative")


@dataclass(frozen=True)
class BoundValue:
    value: float | None
    applicable: bool = True
    note: str = ""


@dataclass(frozen=True)
class Admissibility:
    ok: bool
    slack: float
    bound: float
    applicable: bool = True
    note: str = ""


@dataclass(frozen=True)
class RecoveryProbabilities:
    forward_raw: float | None
    forward: float | None
    converse_raw: float | None
    converse: float | None
    applicable: bool = True
    note: str = ""


@dataclass(frozen=True)
class CorrelationLevel:
    level: float | None
    radius: int | None
    applicable: bool = True
    note: str = ""


@dataclass(frozen=True)
class GapBound:
    gap: float | None
    probability_raw: float | None
    probability: float | None
    applicable: bool = True
    note: str = ""


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


def gaussian_tail(x: float) -> float:
    """Tail surrogate exp(-x^2/2) / (x * sqrt(2*pi)); underflow to 0 allowed."""
    if not x > 0:
        raise ParameterError(f"gaussian_tail requires x > 0, got {x}")
    return math.exp(-0.5 * x * x) / (x * math.sqrt(2.0 * math.pi)) if math.isfinite(x) else 0.0


def theoretical_threshold(inputs: BoundInputs) -> BoundValue:
    """Block threshold for which the recovery guarantees are stated:
    E_min^2 * sqrt(min G) / (4 * (2*tau + 1) * E_max)."""
    if inputs.g_min <= 0:
        return BoundValue(None, applicable=False, note="min Gram entry is not positive")
    value = (
        inputs.e_min**2
        * math.sqrt(inputs.g_min)
        / (4.0 * (2 * inputs.tau + 1) * inputs.e_max)
    )
    return BoundValue(value)


def penalty_admissible(inputs: BoundInputs) -> Admissibility:
    """Strict window r + alpha < E_min^2 * sqrt(min G) / (2 * E_max)."""
    if inputs.g_min <= 0:
        return Admissibility(False, math.nan, math.nan, applicable=False,
                             note="min Gram entry is not positive")
    bound = inputs.e_min**2 * math.sqrt(inputs.g_min) / (2.0 * inputs.e_max)
    slack = bound - (inputs.r + inputs.alpha)
    return Admissibility(ok=slack > 0.0, slack=slack, bound=bound)


def recovery_probabilities(inputs: BoundInputs, beta_l0: int) -> RecoveryProbabilities:
    """Forward and converse support-recovery probability lower bounds.

    Forward: every optimal index has a surviving neighbor block.
    Converse: every surviving block has an optimal index nearby.
    Inapplicable when r <= alpha (the tail argument must be positive).
    """
    if inputs.g_min <= 0:
        return RecoveryProbabilities(None, None, None, None, applicable=False,
                                     note="min Gram entry is not positive")
    if inputs.r <= inputs.alpha:
        return RecoveryProbabilities(None, None, None, None, applicable=False,
                                     note="r must exceed alpha")
    root_n = math.sqrt(inputs.n)
    arg1 = root_n * inputs.e_min**2 * math.sqrt(inputs.g_min) / (
        4.0 * inputs.e_max * inputs.sigma
    )
    arg2 = root_n * (inputs.r - inputs.alpha) / inputs.sigma
    forward_raw = (
        1.0
        - inputs.p * gaussian_tail(arg1)
        - inputs.p * (2 * inputs.tau + 1) * gaussian_tail(arg2)
    )
    converse_raw = 1.0 - beta_l0 * gaussian_tail(arg2)
    return RecoveryProbabilities(
        forward_raw=forward_raw,
        forward=_clip01(forward_raw),
        converse_raw=converse_raw,
        converse=_clip01(converse_raw),
    )


# ---------------------------------------------------------------------------
# correlation levels
# ---------------------------------------------------------------------------

def _scan_candidates(profile: CorrelationProfile) -> np.ndarray:
    """0, 1, the distinct correlation maxima, and midpoints between them."""
    distinct = np.unique(np.clip(profile.max_corr, 0.0, 1.0))
    mids = 0.5 * (distinct[1:] + distinct[:-1])
    return np.unique(np.concatenate([[0.0, 1.0], distinct, mids]))


def forward_correlation_level(
    profile: CorrelationProfile, inputs: BoundInputs
) -> CorrelationLevel:
    """Largest correlation level at which a thresholded neighbor is guaranteed.

    Scans the finite candidate set for the supremum of levels rho with
    ``eta <= C(r, rho) / ((1 - rho) * |neighborhood|)`` where
    ``C(r, rho) = E_min^2 sqrt(g)/E_max - alpha - r - (2 tau + 1) G p E_max / sqrt(g) * rho``.
    At rho = 1 the window is empty and the condition holds iff C > 0.
    """
    if inputs.g_min <= 0:
        return CorrelationLevel(None, None, applicable=False,
                                note="min Gram entry is not positive")
    if not inputs.eta > 0:
        raise ParameterError("eta must be positive")
    root_g = math.sqrt(inputs.g_min)
    c0 = inputs.e_min**2 * root_g / inputs.e_max - inputs.alpha - inputs.r
    slope = (2 * inputs.tau + 1) * inputs.g_mass * inputs.p * inputs.e_max / root_g
    best = None
    for rho in _scan_candidates(profile):
        c = c0 - slope * rho
        if rho >= 1.0:
            ok = c > 0.0
        else:
            size = 2 * profile.radius(float(rho)) + 1
            ok = inputs.eta <= c / ((1.0 - rho) * size)
        if ok and (best is None or rho > best):
            best = float(rho)
    if best is None:
        return CorrelationLevel(None, None, applicable=False,
                                note="no candidate level satisfies the condition")
    return CorrelationLevel(level=best, radius=profile.radius(best))


def converse_correlation_level(
    profile: CorrelationProfile, inputs: BoundInputs
) -> CorrelationLevel:
    """Largest level mu with ``mu * |outside-window overlap| <= eta * g^(3/2) / E_max``.

    The overlap count is (2*tau + 1) - (2*a_mu + 1); level 0 always
    satisfies, so the result is always defined.
    """
    if inputs.g_min <= 0:
        return CorrelationLevel(None, None, applicable=False,
                                note="min Gram entry is not positive")
    rhs = inputs.eta * inputs.g_min**1.5 / inputs.e_max
    best = 0.0
    for rho in _scan_candidates(profile):
        outside = (2 * inputs.tau + 1) - (2 * profile.radius(float(rho)) + 1)
        if rho * outside <= rhs and rho > best:
            best = float(rho)
    return CorrelationLevel(level=best, radius=profile.radius(best))


def interval_count(intervals) -> int:
    """Connected components of a union of integer intervals.

    Intervals are inclusive (lo, hi) pairs; adjacent integers connect,
    so [2, 4] and [5, 7] merge into one component.
    """
    spans = sorted((int(lo), int(hi)) for lo, hi in intervals)
    for lo, hi in spans:
        if hi < lo:
            raise ParameterError(f"empty interval ({lo}, {hi})")
    count = 0
    cur_hi = None
    for lo, hi in spans:
        if cur_hi is None or lo > cur_hi + 1:
            count += 1
            cur_hi = hi
        else:
            cur_hi = max(cur_hi, hi)
    return count


# ---------------------------------------------------------------------------
# gap bounds on the rate estimate
# ---------------------------------------------------------------------------

def _tail_terms(inputs: BoundInputs):
    root_n = math.sqrt(inputs.n)
    arg1 = root_n * inputs.e_min**2 * math.sqrt(inputs.g_min) / (
        4.0 * inputs.e_max * inputs.sigma
    )
    arg2 = root_n * (inputs.r - inputs.alpha) / inputs.sigma
    return gaussian_tail(arg1), gaussian_tail(arg2)


def rate_gap_upper_bound(
    events: EventEstimate,
    beta_post: SparseRegressor,
    a_rho: int,
    a_mu: int,
    inputs: BoundInputs,
    beta_l0: int,
) -> GapBound:
    """Upper bound on (estimated rate - best sampled-data rate).

    The bound is the estimated rate times a bracket in [0, 1] built from
    the post-threshold block pattern; it holds with a probability driven
    by the Gaussian tail terms.  Events or pattern touching the first or
    last ``tau`` indices make the bound inapplicable (interval truncature).
    """
    if events.m_hat < 1:
        return GapBound(None, None, None, applicable=False, note="no events detected")
    if inputs.g_min <= 0:
        return GapBound(None, None, None, applicable=False,
                        note="min Gram entry is not positive")
    if inputs.r <= inputs.alpha:
        return GapBound(None, None, None, applicable=False, note="r must exceed alpha")
    idx = np.rint(events.t_hat / inputs.dt).astype(int)
    max_j = int(np.max(beta_post.block_pattern()))
    lo, hi = inputs.tau, inputs.n - 1 - inputs.tau
    if idx.min() < lo or max(idx.max(), max_j) > hi:
        return GapBound(None, None, None, applicable=False,
                        note="indices outside the truncature-free range")
    spans = [(max(0, k - a_mu), min(inputs.n - 1, k + a_mu)) for k in idx]
    n_components = interval_count(spans)
    t_last = float(events.t_hat[-1])
    lam_hat = events.m_hat / t_last
    bracket = 1.0 - (t_last / inputs.dt) / (a_rho + max_j) * (
        n_components / events.m_hat
    )
    tail1, tail2 = _tail_terms(inputs)
    prob_raw = (
        1.0
        - inputs.p * tail1
        - inputs.p * (2 * inputs.tau + 1) * tail2
        - beta_l0 * tail2
    )
    return GapBound(
        gap=lam_hat * bracket,
        probability_raw=prob_raw,
        probability=_clip01(prob_raw),
    )


def rate_gap_lower_bound(
    events: EventEstimate,
    beta_post: SparseRegressor,
    a_rho: int,
    a_mu: int,
    inputs: BoundInputs,
    lambda_nominal: float,
    beta_l0: int,
    p0_size: int,
) -> GapBound:
    """Lower bound on (estimated rate - best sampled-data rate).

    Requires the separation hypothesis ``(lambda*dt)^2 * N * a_rho < 1``
    and a post-threshold pattern reaching past ``a_mu``.
    """
    if events.m_hat < 1:
        return GapBound(None, None, None, applicable=False, note="no events detected")
    if inputs.g_min <= 0:
        return GapBound(None, None, None, applicable=False,
                        note="min Gram entry is not positive")
    if inputs.r <= inputs.alpha:
        return GapBound(None, None, None, applicable=False, note="r must exceed alpha")
    hyp = (lambda_nominal * inputs.dt) ** 2 * inputs.n * a_rho
    if not hyp < 1.0:
        return GapBound(None, None, None, applicable=False,
                        note=f"separation hypothesis fails ({hyp:.3g} >= 1)")
    pattern = beta_post.block_pattern()
    max_j = int(np.max(pattern))
    if max_j - a_mu <= 0:
        return GapBound(None, None, None, applicable=False,
                        note="pattern does not reach past a_mu")
    t_last = float(events.t_hat[-1])
    lam_hat = events.m_hat / t_last
    bracket = 1.0 - (pattern.size / events.m_hat) * (
        (t_last / inputs.dt) / (max_j - a_mu)
    )
    tail1, tail2 = _tail_terms(inputs)
    # conservative reading of the probability display: both tail terms
    # subtract inside the bracket
    prob_raw = 1.0 - hyp - p0_size * (
        inputs.p * tail1 + (inputs.p * (2 * inputs.tau + 1) + beta_l0) * tail2
    )
    return GapBound(
        gap=lam_hat * bracket,
        probability_raw=prob_raw,
        probability=_clip01(prob_raw),
    )


def separation_probability(lam: float, t_total: float, delta: float) -> BoundValue:
    """Lower bound 1 - lambda^2 * T * delta on all gaps exceeding delta."""
    if lam <= 0 or t_total <= 0 or delta <= 0:
        raise ParameterError("lam, t_total and delta must be positive")
    mass = lam * lam * t_total * delta
    if not mass < 1.0:
        return BoundValue(None, applicable=False,
                          note=f"requires lambda^2*T*delta < 1, got {mass:.3g}")
    return BoundValue(1.0 - mass)


# ---------------------------------------------------------------------------
# model discrepancy
# ---------------------------------------------------------------------------

def model_discrepancy(
    truth: GroundTruth,
    dictionary: GammaDictionary,
    e_min: float | None = None,
    e_max: float | None = None,
) -> float:
    """Certified upper estimate of the model discrepancy ||ybar - A beta|| / sqrt(N).

    Builds a feasible coefficient vector event by event: each isolated
    noise-free pulse is regressed (nonnegatively) onto its nearest time
    block, then rescaled into the energy norm window when violated.  The
    resulting discrepancy upper-bounds the best one attainable on the
    optimal support, which keeps every probability bound conservative.
    """
    if truth.energies is None or truth.shape_ids is None:
        raise ParameterError("truth must carry energies and shape descriptors")
    grid = dictionary.grid
    n, dt, tau = grid.n_samples, grid.dt, dictionary.tau
    if e_min is None:
        e_min = float(np.min(truth.energies)) if truth.n_events else 1.0
    if e_max is None:
        e_max = float(np.max(truth.energies)) if truth.n_events else 1.0
    clean = synthesize_signal(truth, grid, dictionary.shape_grid, 0.0, seed=0).samples
    beta = np.zeros((n, dictionary.n_shapes))
    for t_n, e_n, shape_id in zip(truth.arrivals, truth.energies, truth.shape_ids):
        single = GroundTruth(
            arrivals=np.array([t_n]), energies=np.array([e_n]), shape_ids=[shape_id]
        )
        pulse = synthesize_signal(single, grid, dictionary.shape_grid, 0.0, seed=0).samples
        k = int(math.floor(t_n / dt + 0.5))
        lk = dictionary.support_length(k)
        if lk <= 0:
            continue
        w0 = max(0, min(k + 1, int(math.floor(t_n / dt)) + 1))
        w1 = min(n - 1, max(k + lk, int(math.ceil((t_n + tau * dt) / dt))))
        block = dictionary.block(k)[w0 : w1 + 1]
        x, _ = _nnls(block, pulse[w0 : w1 + 1])
        norm = float(np.linalg.norm(block @ x)) / math.sqrt(n)
        if norm > 0.0:
            if norm > e_max:
                x *= e_max / norm
            elif norm < e_min:
                x *= e_min / norm
        beta[k] += x
    resid = clean - dictionary.matvec(beta)
    return float(np.linalg.norm(resid)) / math.sqrt(n)


# ---------------------------------------------------------------------------
# irrepresentability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IrrepresentabilityReport:
    eta0: float
    passes: bool | None
    min_entry: float | None
    max_row_sum: float | None
    singular: bool
    r_threshold: float | None
    note: str = ""


def irrepresentability_check(
    dictionary: GammaDictionary,
    p0,
    eta0: float,
    alpha: float | None = None,
    sigma: float | None = None,
    tol: float = 1e-10,
) -> IrrepresentabilityReport:
    """Check the exact-support-selection condition on the optimal blocks.

    With the cross-Gram ``M = G_{off,P0} inv(G_{P0,P0})`` and the one-sided
    coefficient set, the condition holds iff every entry of ``M`` is
    nonnegative (up to ``tol``) and every row sum stays below ``1 - eta0``.
    Also reports the matching penalty threshold when ``alpha`` and
    ``sigma`` are supplied.
    """
    if not 0.0 < eta0 < 1.0:
        raise ParameterError("eta0 must lie in (0, 1)")
    p0 = sorted(set(int(k) for k in p0))
    if not p0:
        raise ParameterError("p0 must be nonempty")
    n, p = dictionary.n_blocks, dictionary.n_shapes
    others = [k for k in range(n) if k not in set(p0)]
    entries = (p * len(others)) * (p * len(p0))
    if entries > 4_000_000:
        raise ParameterError(
            f"cross-Gram would hold {entries} entries (guard is 4e6)"
        )
    a_p0 = dictionary.materialize(p0)
    g00 = a_p0.T @ a_p0 / n
    r_threshold = None
    if alpha is not None and sigma is not None:
        r_threshold = max(
            2.0 * alpha / eta0,
            (2.0 * math.sqrt(2.0) * sigma / eta0)
            * math.sqrt(math.log((n - len(p0)) * p) / n),
        )
    try:
        cross = np.vstack([
            np.hstack([dictionary.gram_block(b, k) for k in p0]) for b in others
        ])
        m = np.linalg.solve(g00, cross.T).T
    except np.linalg.LinAlgError:
        return IrrepresentabilityReport(
            eta0=eta0, passes=None, min_entry=None, max_row_sum=None,
            singular=True, r_threshold=r_threshold,
            note="Gram matrix on the optimal blocks is singular",
        )
    cond = np.linalg.cond(g00)
    if not np.isfinite(cond) or cond > 1e12:
        return IrrepresentabilityReport(
            eta0=eta0, passes=None, min_entry=None, max_row_sum=None,
            singular=True, r_threshold=r_threshold,
            note=f"Gram matrix is numerically singular (cond={cond:.3g})",
        )
    min_entry = float(np.min(m)) if m.size else 0.0
    max_row_sum = float(np.max(np.sum(m, axis=1))) if m.size else 0.0
    passes = bool(min_entry >= -tol and max_row_sum < 1.0 - eta0)
    return IrrepresentabilityReport(
        eta0=eta0, passes=passes, min_entry=min_entry,
        max_row_sum=max_row_sum, singular=False, r_threshold=r_threshold,
    )


# ---------------------------------------------------------------------------
# aggregate report
# ---------------------------------------------------------------------------

@dataclass
class BoundReport:
    """Every bound evaluation for one estimated signal."""

    inputs: BoundInputs
    eta_theoretical: BoundValue
    admissibility: Admissibility
    probabilities: RecoveryProbabilities
    rho: CorrelationLevel
    mu: CorrelationLevel
    upper_gap: GapBound
    lower_gap: GapBound
    separation: BoundValue
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def plain(obj):
            if obj is None or isinstance(obj, (bool, int, float, str)):
                return obj
            if isinstance(obj, dict):
                return {k: plain(v) for k, v in obj.items()}
            if isinstance(obj, (list, tuple, np.ndarray)):
                return [plain(v) for v in obj]
            if isinstance(obj, (np.integer,)):
                return int(obj)
            if isinstance(obj, (np.floating,)):
                return float(obj)
            return {k: plain(v) for k, v in vars(obj).items()}

        return plain(vars(self))


def evaluate_bounds(
    dictionary: GammaDictionary,
    profile: CorrelationProfile,
    inputs: BoundInputs,
    events: EventEstimate,
    beta: SparseRegressor,
    beta_post: SparseRegressor,
    lambda_nominal: float | None = None,
    p0_size: int | None = None,
) -> BoundReport:
    """Run every evaluator that applies and collect the results."""
    rho = forward_correlation_level(profile, inputs)
    mu = converse_correlation_level(profile, inputs)
    beta_l0 = beta.l0
    if rho.applicable and mu.applicable:
        upper = rate_gap_upper_bound(events, beta_post, rho.radius, mu.radius,
                                     inputs, beta_l0)
    else:
        upper = GapBound(None, None, None, applicable=False,
                         note="correlation levels unavailable")
    if (
        rho.applicable
        and mu.applicable
        and lambda_nominal is not None
        and p0_size is not None
    ):
        lower = rate_gap_lower_bound(events, beta_post, rho.radius, mu.radius,
                                     inputs, lambda_nominal, beta_l0, p0_size)
    else:
        lower = GapBound(None, None, None, applicable=False,
                         note="needs correlation levels, a nominal rate and |P0|")
    if lambda_nominal is not None and rho.applicable and rho.radius is not None:
        delta = rho.radius * inputs.dt
        t_total = inputs.n * inputs.dt
        separation = (
            separation_probability(lambda_nominal, t_total, delta)
            if delta > 0
            else BoundValue(1.0)
        )
    else:
        separation = BoundValue(None, applicable=False, note="needs a nominal rate")
    return BoundReport(
        inputs=inputs,
        eta_theoretical=theoretical_threshold(inputs),
        admissibility=penalty_admissible(inputs),
        probabilities=recovery_probabilities(inputs, beta_l0),
        rho=rho,
        mu=mu,
        upper_gap=upper,
        lower_gap=lower,
        separation=separation,
    )
