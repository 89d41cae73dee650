"""Non-negative LASSO over the shift-structured dictionary.

Solves ``min (1/2N) ||y - A beta||^2 + r * sum(beta)`` subject to
``beta >= 0`` by cyclic coordinate descent with a closed-form
nonnegative soft-threshold update, alternating active-set sweeps with
full sweeps.  Every returned solution carries a stationarity
certificate (its KKT violation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _cd
from .dictionary import GammaDictionary
from .errors import NonConvergenceError, OracleFailureError, ParameterError, PathExhaustedError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 10_000
DEFAULT_PATH_FACTOR = 0.9
PATH_MAX_STEPS = 40


@dataclass(frozen=True)
class SparseRegressor:
    """A block-structured nonnegative coefficient vector.

    Only strictly positive entries are stored: ``indices`` holds sorted
    flat column indices (block ``k``, shape ``s`` maps to ``k * p + s``)
    and ``values`` the matching coefficients.

    Attributes
    ----------
    n_blocks, n_shapes : int
        Grid length N and shape count p.
    r : float
        Sparsity parameter used by the solve.
    objective : float or None
        Final objective value (None after post-processing).
    kkt_violation : float or None
        Stationarity certificate of the solve (None after post-processing).
    eta : float or None
        Block threshold, set once post-processing has been applied.
    """

    n_blocks: int
    n_shapes: int
    indices: np.ndarray
    values: np.ndarray
    r: float
    objective: float | None = None
    kkt_violation: float | None = None
    eta: float | None = None

    @property
    def l0(self) -> int:
        """Number of strictly positive coefficients."""
        return int(self.indices.size)

    def block_pattern(self) -> np.ndarray:
        """Sorted indices of time blocks holding at least one coefficient."""
        return np.unique(self.indices // self.n_shapes)

    def block_l1_norms(self) -> tuple[np.ndarray, np.ndarray]:
        """Active block indices and the l1 norm of each block sub-vector."""
        blocks = self.indices // self.n_shapes
        uniq, inverse = np.unique(blocks, return_inverse=True)
        norms = np.zeros(uniq.size)
        np.add.at(norms, inverse, self.values)
        return uniq, norms

    def block_view(self) -> dict[int, np.ndarray]:
        """Map from active block index to its dense p-vector."""
        out: dict[int, np.ndarray] = {}
        for idx, val in zip(self.indices, self.values):
            k, s = divmod(int(idx), self.n_shapes)
            vec = out.setdefault(k, np.zeros(self.n_shapes))
            vec[s] = val
        return out

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.n_blocks * self.n_shapes)
        dense[self.indices] = self.values
        return dense

    def triples(self) -> list[tuple[int, int, float]]:
        """Active coefficients as (block, shape index, value) triples."""
        return [
            (int(i) // self.n_shapes, int(i) % self.n_shapes, float(v))
            for i, v in zip(self.indices, self.values)
        ]


def _as_samples(y) -> np.ndarray:
    samples = getattr(y, "samples", y)
    return np.asarray(samples, dtype=float)


def _pack(dictionary, beta, r, objective, kkt) -> SparseRegressor:
    idx = np.flatnonzero(beta > 0.0)
    return SparseRegressor(
        n_blocks=dictionary.n_blocks,
        n_shapes=dictionary.n_shapes,
        indices=idx.astype(np.int64),
        values=beta[idx].copy(),
        r=float(r),
        objective=float(objective),
        kkt_violation=float(kkt),
    )


def _kkt_from_resid(dictionary, resid, r, beta) -> float:
    corr = dictionary.correlations(resid).ravel()
    active = beta > 0.0
    viol = 0.0
    if np.any(active):
        viol = float(np.max(np.abs(corr[active] - r)))
    inactive = ~active
    if np.any(inactive):
        viol = max(viol, float(np.max(corr[inactive] - r)))
    return max(viol, 0.0)


def _objective(resid, beta, r, n) -> float:
    return 0.5 * float(resid @ resid) / n + r * float(np.sum(beta))


def _cd_solve(dictionary, y, r, tol, max_sweeps, beta0=None):
    """Run the sweep schedule; returns (beta, resid, kkt, sweeps, converged)."""
    n = dictionary.grid.n_samples
    bank = np.ascontiguousarray(dictionary.bank)
    sq_prefix = np.ascontiguousarray(dictionary.sq_prefix)
    if beta0 is None:
        beta = np.zeros(n * dictionary.n_shapes)
        resid = y.copy()
    else:
        beta = beta0.copy()
        resid = y - dictionary.matvec(beta)
    sweeps = 0
    kkt = np.inf
    while sweeps < max_sweeps:
        moved = _cd.full_sweep(bank, sq_prefix, beta, resid, r, n)
        sweeps += 1
        if moved <= tol:
            kkt = _kkt_from_resid(dictionary, resid, r, beta)
            if kkt <= tol:
                return beta, resid, kkt, sweeps, True
        while sweeps < max_sweeps:
            active = np.flatnonzero(beta > 0.0)
            if active.size == 0:
                break
            moved = _cd.active_sweep(bank, sq_prefix, beta, resid, r, n, active)
            sweeps += 1
            if moved <= tol:
                break
    kkt = _kkt_from_resid(dictionary, resid, r, beta)
    return beta, resid, kkt, sweeps, kkt <= tol


def nnlasso(
    dictionary: GammaDictionary,
    y,
    r: float,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    beta0: np.ndarray | None = None,
) -> SparseRegressor:
    """Nonnegative LASSO solution certified by its KKT conditions.

    Parameters
    ----------
    dictionary : GammaDictionary
        The implicit dictionary.
    y : SampledSignal or ndarray
        Observed samples, length matching the dictionary grid.
    r : float
        Positive sparsity parameter.
    tol : float
        Convergence tolerance on coefficient moves and KKT violation.
    max_sweeps : int
        Sweep budget (full and active-set sweeps both count).
    beta0 : ndarray, optional
        Dense warm-start coefficients.

    Raises
    ------
    NonConvergenceError
        When the sweep budget runs out; carries the best iterate.
    """
    if not r > 0:
        raise ParameterError(f"r must be positive, got {r}")
    y = _as_samples(y)
    if y.shape != (dictionary.grid.n_samples,):
        raise ParameterError("signal length does not match the dictionary grid")
    beta, resid, kkt, sweeps, ok = _cd_solve(dictionary, y, r, tol, max_sweeps, beta0)
    result = _pack(dictionary, beta, r, _objective(resid, beta, r, y.size), kkt)
    if not ok:
        raise NonConvergenceError(
            f"coordinate descent used {sweeps} sweeps without reaching "
            f"tol={tol} (KKT violation {kkt:.3e})",
            regressor=result,
            kkt_violation=kkt,
        )
    return result


def kkt_residual(dictionary: GammaDictionary, y, r: float, beta: SparseRegressor) -> float:
    """Stationarity violation of ``beta`` for the given problem.

    Zero (up to tolerance) exactly at the optimum: active columns must
    correlate with the residual at level ``r``, inactive ones at most ``r``.
    """
    y = _as_samples(y)
    dense = beta.to_dense()
    resid = y - dictionary.matvec(dense)
    return _kkt_from_resid(dictionary, resid, r, dense)


def r_max(dictionary: GammaDictionary, y) -> float:
    """Smallest sparsity parameter at which the solution is exactly zero."""
    y = _as_samples(y)
    return max(0.0, float(np.max(dictionary.correlations(y))))


def select_r(
    dictionary: GammaDictionary,
    y,
    sigma: float,
    path_factor: float = DEFAULT_PATH_FACTOR,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> tuple[float, SparseRegressor]:
    """Residual-matched sparsity parameter and its solution.

    Walks the geometric path ``r_max * path_factor**k`` with warm starts
    and returns the first (largest) visited ``r`` whose residual norm is
    at most ``sigma * sqrt(N)``.
    """
    if not sigma > 0:
        raise ParameterError("sigma must be positive")
    if not 0.0 < path_factor < 1.0:
        raise ParameterError("path_factor must be in (0, 1)")
    y = _as_samples(y)
    n = dictionary.grid.n_samples
    target = sigma * np.sqrt(n)
    r_top = r_max(dictionary, y)
    if r_top <= 0.0:
        # nonpositive correlations everywhere: the solution is zero for all r
        r = np.finfo(float).eps
        reg = nnlasso(dictionary, y, r, tol, max_sweeps)
        if float(np.linalg.norm(y)) <= target:
            return r, reg
        raise PathExhaustedError(
            "signal has no positive correlation with the dictionary and "
            "exceeds the residual target",
            r_last=r,
            residual_norm=float(np.linalg.norm(y)),
            target=target,
        )
    beta = None
    r = r_top
    resid_norm = np.inf
    for step in range(1, PATH_MAX_STEPS + 1):
        r = r_top * path_factor**step
        beta, resid, kkt, sweeps, ok = _cd_solve(dictionary, y, r, tol, max_sweeps, beta)
        if not ok:
            raise NonConvergenceError(
                f"path step {step} (r={r:.6g}) did not converge",
                regressor=_pack(dictionary, beta, r, _objective(resid, beta, r, n), kkt),
                kkt_violation=kkt,
            )
        resid_norm = float(np.linalg.norm(resid))
        if resid_norm <= target:
            return r, _pack(dictionary, beta, r, _objective(resid, beta, r, n), kkt)
    raise PathExhaustedError(
        f"residual {resid_norm:.6g} still above target {target:.6g} after "
        f"{PATH_MAX_STEPS} path steps (last r={r:.6g}, r_max={r_top:.6g})",
        r_last=r,
        residual_norm=resid_norm,
        target=target,
    )


def brute_force_oracle(
    dense_columns: np.ndarray,
    y: np.ndarray,
    r: float,
    max_iter: int = 1_000_000,
) -> np.ndarray:
    """Reference solution of the same objective on an explicit matrix.

    Projected gradient with the exact Lipschitz step, run to objective
    stationarity 1e-12 (and stationarity of the projected gradient).
    Test infrastructure only; refuses more than 256 columns.
    """
    columns = np.asarray(dense_columns, dtype=float)
    if columns.ndim != 2:
        raise ParameterError("dense_columns must be a 2-D matrix")
    n, m = columns.shape
    if m > 256:
        raise ParameterError(f"oracle accepts at most 256 columns, got {m}")
    y = np.asarray(y, dtype=float)
    gram = columns.T @ columns / n
    lip = float(np.max(np.linalg.eigvalsh(gram))) if m else 0.0
    if lip <= 0.0:
        return np.zeros(m)
    beta = np.zeros(m)
    resid = y.copy()
    f_prev = _objective(resid, beta, r, n)
    for _ in range(max_iter):
        corr = columns.T @ resid / n
        grad = r - corr
        beta_new = np.maximum(0.0, beta - grad / lip)
        if np.array_equal(beta_new, beta):
            viol = max(0.0, float(np.max(corr - r)))
            if viol <= 1e-9:
                return beta
        resid = y - columns @ beta_new
        beta = beta_new
        f_new = _objective(resid, beta, r, n)
        if f_prev - f_new <= 1e-12:
            active = beta > 0.0
            viol = 0.0
            if np.any(active):
                viol = float(np.max(np.abs(corr[active] - r)))
            if np.any(~active):
                viol = max(viol, float(np.max(corr[~active] - r)))
            if max(viol, 0.0) <= 1e-9:
                return beta
        f_prev = f_new
    raise OracleFailureError(
        f"projected gradient did not reach stationarity within {max_iter} iterations"
    )
