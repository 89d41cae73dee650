"""Shift-structured dictionary of truncated gamma pulse shapes.

The dictionary conceptually concatenates ``N`` time blocks, one per grid
point ``k``; block ``k`` holds the ``p`` normalized shapes translated to
start at sample ``k + 1`` and truncated at the last grid row.  The full
``N x N*p`` matrix is never stored: every product against it is computed
from the ``(p, tau)`` shape bank, which is what makes large shape grids
tractable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import shapes
from .errors import ParameterError
from .shapes import ShapeGrid
from .simulate import SamplingGrid

# largest number of cached Gram entries before falling back to on-demand
# computation (keeps huge shape grids from exploding memory at build time)
_GRAM_CACHE_LIMIT = 4_000_000


def gamma_shape(
    theta1: float, theta2: float, tau: int, grid: SamplingGrid
) -> tuple[np.ndarray, float]:
    """One normalized truncated gamma shape sampled at dt, ..., tau*dt.

    Returns the tau in-support samples and the normalizing constant that
    makes the grid mean square equal one.
    """
    if not (theta1 > 0 and theta2 > 0):
        raise ParameterError("theta1 and theta2 must be positive")
    if not 1 <= tau < grid.n_samples:
        raise ParameterError(f"need 1 <= tau < N, got tau={tau}, N={grid.n_samples}")
    return shapes.normalized_samples(theta1, theta2, tau, grid.dt, grid.n_samples)


class GammaDictionary:
    """Bank of normalized gamma shapes with implicit block translations.

    Attributes
    ----------
    shape_grid : ShapeGrid
        Parameter pairs and common support length.
    grid : SamplingGrid
        Sampling grid the dictionary lives on.
    bank : ndarray, shape (p, tau)
        Normalized shape samples; row ``s`` holds shape ``s`` at offsets
        dt, 2*dt, ..., tau*dt.
    normalizers : ndarray, shape (p,)
        The per-shape normalizing constants.
    """

    def __init__(self, shape_grid: ShapeGrid, grid: SamplingGrid):
        if not shape_grid.tau < grid.n_samples:
            raise ParameterError("tau must be smaller than the grid length")
        self.shape_grid = shape_grid
        self.grid = grid
        p, tau = shape_grid.n_shapes, shape_grid.tau
        bank = np.empty((p, tau))
        normalizers = np.empty(p)
        for s, (t1, t2) in enumerate(shape_grid.pairs):
            bank[s], normalizers[s] = shapes.normalized_samples(
                t1, t2, tau, grid.dt, grid.n_samples
            )
        self.bank = bank
        self.normalizers = normalizers
        # prefix[s, m] = sum of the first m squared samples of shape s;
        # gives the truncated column norms near the right boundary
        self.sq_prefix = np.concatenate(
            [np.zeros((p, 1)), np.cumsum(bank**2, axis=1)], axis=1
        )
        self._gram_cache = None
        if p * p * (tau + 1) <= _GRAM_CACHE_LIMIT:
            self._gram_cache = [self._interior_gram(d) for d in range(tau + 1)]

    # ------------------------------------------------------------------
    # basic geometry
    # ------------------------------------------------------------------
    @property
    def n_shapes(self) -> int:
        return self.shape_grid.n_shapes

    @property
    def tau(self) -> int:
        return self.shape_grid.tau

    @property
    def n_blocks(self) -> int:
        return self.grid.n_samples

    @property
    def n_columns(self) -> int:
        return self.n_blocks * self.n_shapes

    def support_length(self, k: int) -> int:
        """In-grid sample count of block ``k``'s columns (0 when fully past)."""
        return max(0, min(self.tau, self.grid.n_samples - 1 - k))

    def is_boundary(self, k: int) -> bool:
        """Blocks whose support is clipped by the end of the grid."""
        return k > self.grid.n_samples - 1 - self.tau

    def column_norms_sq(self) -> np.ndarray:
        """(N, p) array of (1/N) * squared column norms (zero = degenerate)."""
        n = self.grid.n_samples
        lengths = np.clip(n - 1 - np.arange(n), 0, self.tau)
        return self.sq_prefix[:, lengths].T / n

    # ------------------------------------------------------------------
    # explicit materialization (small problems, oracles, reporting)
    # ------------------------------------------------------------------
    def column(self, k: int, s: int) -> np.ndarray:
        out = np.zeros(self.grid.n_samples)
        lk = self.support_length(k)
        out[k + 1 : k + 1 + lk] = self.bank[s, :lk]
        return out

    def block(self, k: int) -> np.ndarray:
        """Materialize time block ``k`` as an (N, p) matrix."""
        out = np.zeros((self.grid.n_samples, self.n_shapes))
        lk = self.support_length(k)
        out[k + 1 : k + 1 + lk, :] = self.bank[:, :lk].T
        return out

    def materialize(self, blocks) -> np.ndarray:
        """Concatenate the given blocks into a dense (N, p*len) matrix."""
        cols = [self.block(k) for k in blocks]
        if not cols:
            return np.zeros((self.grid.n_samples, 0))
        return np.concatenate(cols, axis=1)

    # ------------------------------------------------------------------
    # Gram data
    # ------------------------------------------------------------------
    def _interior_gram(self, d: int) -> np.ndarray:
        tau = self.tau
        if d > tau:
            return np.zeros((self.n_shapes, self.n_shapes))
        width = tau - d
        return self.bank[:, d : d + width] @ self.bank[:, :width].T / self.grid.n_samples

    def gram_block(self, k: int, l: int) -> np.ndarray:
        """(1/N) * A_k^T A_l as a dense (p, p) matrix, truncation included."""
        n = self.grid.n_samples
        if not (0 <= k < n and 0 <= l < n):
            raise ParameterError("block indices must lie in [0, N-1]")
        if l < k:
            return self.gram_block(l, k).T
        d = l - k
        if d > self.tau:
            return np.zeros((self.n_shapes, self.n_shapes))
        if not self.is_boundary(l) and self._gram_cache is not None:
            return self._gram_cache[d]
        n_ov = min(self.support_length(l), self.support_length(k) - d)
        if n_ov <= 0:
            return np.zeros((self.n_shapes, self.n_shapes))
        return self.bank[:, d : d + n_ov] @ self.bank[:, :n_ov].T / n

    def single_block_gram(self) -> np.ndarray:
        """The interior one-block Gram matrix (independent of the block index)."""
        return self._interior_gram(0)

    def min_gram_entry(self) -> float:
        return float(np.min(self.single_block_gram()))

    # ------------------------------------------------------------------
    # implicit products
    # ------------------------------------------------------------------
    def correlations(self, u: np.ndarray) -> np.ndarray:
        """(1/N) * A^T u for all N*p columns, returned as an (N, p) array.

        Row ``k`` holds the correlations of ``u`` with the columns of time
        block ``k``; right-boundary truncation falls out of zero padding.
        """
        n, tau = self.grid.n_samples, self.tau
        padded = np.concatenate([u[1:], np.zeros(tau)])
        windows = sliding_window_view(padded, tau)[:n]
        return windows @ self.bank.T / n

    def matvec(self, beta: np.ndarray) -> np.ndarray:
        """A @ beta for a flat (N*p,) or block-shaped (N, p) coefficient vector."""
        n = self.grid.n_samples
        beta = np.asarray(beta, dtype=float).reshape(n, self.n_shapes)
        out = np.zeros(n)
        for s in range(self.n_shapes):
            col = beta[:, s]
            if not np.any(col):
                continue
            conv = np.convolve(col, self.bank[s])
            out[1:] += conv[: n - 1]
        return out


def build_dictionary(shape_grid: ShapeGrid, grid: SamplingGrid) -> GammaDictionary:
    """Build the dictionary for a shape grid on a sampling grid."""
    return GammaDictionary(shape_grid, grid)


# ---------------------------------------------------------------------------
# correlation profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationProfile:
    """Per-offset maximal block correlations of a dictionary.

    ``max_corr[i]`` is the largest absolute Gram entry between a block and
    the block offset by ``offsets[i]``; ``g_mass`` is the sum over all
    offsets within the support range of the (signed) per-offset maxima.
    """

    offsets: np.ndarray
    max_corr: np.ndarray
    g_mass: float
    tau: int

    def radius(self, level: float) -> int:
        """Largest |offset| whose maximal correlation reaches ``level``."""
        if not 0.0 <= level <= 1.0:
            raise ParameterError(f"correlation level must be in [0, 1], got {level}")
        qualifying = np.abs(self.offsets[self.max_corr >= level])
        return int(qualifying.max()) if qualifying.size else 0


def correlation_profile(dictionary: GammaDictionary, chunk: int = 1024) -> CorrelationProfile:
    """Maximal correlation per block offset, and their signed-total mass.

    Uses the interior (untruncated) Gram blocks, which are independent of
    the reference block; large shape banks are processed in row chunks so
    no p-by-p matrix is ever fully held for big grids.
    """
    tau, n = dictionary.tau, dictionary.grid.n_samples
    if tau > n - 1 - tau:
        raise ParameterError(
            f"grid too short for an interior reference block (N={n}, tau={tau})"
        )
    p = dictionary.n_shapes
    bank = dictionary.bank
    abs_max = np.zeros(tau + 1)
    signed_max = np.full(tau + 1, -np.inf)
    for d in range(tau + 1):
        width = tau - d
        if width <= 0:
            abs_max[d] = 0.0
            signed_max[d] = 0.0
            continue
        left = bank[:, d : d + width]
        right = bank[:, :width]
        for start in range(0, p, chunk):
            part = left[start : start + chunk] @ right.T / n
            abs_max[d] = max(abs_max[d], float(np.max(np.abs(part))))
            signed_max[d] = max(signed_max[d], float(np.max(part)))
    offsets = np.arange(-tau, tau + 1)
    max_corr = np.concatenate([abs_max[:0:-1], abs_max])
    g_mass = float(signed_max[0] + 2.0 * np.sum(signed_max[1:]))
    return CorrelationProfile(offsets=offsets, max_corr=max_corr, g_mass=g_mass, tau=tau)


def correlation_radius(profile: CorrelationProfile, level: float) -> int:
    """Functional alias for :meth:`CorrelationProfile.radius`."""
    return profile.radius(level)
