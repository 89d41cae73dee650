"""Ground-truth pulse trains and their sampled, noisy signals.

Events arrive as a homogeneous Poisson process; each event deposits an
energy drawn from a truncated Gaussian and a pulse shape, either one of
the dictionary shapes (case I) or an arbitrary gamma pair (case II).
The recorded signal is the superposition of the energy-scaled pulses
sampled on a uniform grid plus white Gaussian noise.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import shapes
from .errors import InfeasibleBoundsError, ParameterError, SignalFormatError
from .shapes import ShapeGrid


@dataclass(frozen=True)
class SamplingGrid:
    """Uniform sampling grid: ``n_samples`` points spaced ``dt`` seconds."""

    n_samples: int
    dt: float

    def __post_init__(self):
        if self.n_samples < 2 or self.n_samples % 2 != 0:
            raise ParameterError(f"n_samples must be even and >= 2, got {self.n_samples}")
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")

    @property
    def span(self) -> float:
        """Time of the last grid point, (n_samples - 1) * dt."""
        return (self.n_samples - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_samples)


@dataclass
class GroundTruth:
    """Arrival times, energies and pulse descriptors of a simulated train.

    ``shape_ids`` holds one descriptor per event: an integer index into the
    dictionary shape bank (case I) or a ``(theta1, theta2)`` pair (case II).
    ``energies`` and ``shape_ids`` stay ``None`` until assigned.  ``p0``
    and ``alpha`` are filled in by the pipeline once computed.
    """

    arrivals: np.ndarray
    energies: np.ndarray | None = None
    shape_ids: list | None = None
    lambda_true: float | None = None
    p0: set | None = None
    alpha: float | None = None

    def __post_init__(self):
        self.arrivals = np.asarray(self.arrivals, dtype=float)
        if self.arrivals.ndim != 1:
            raise ParameterError("arrivals must be one-dimensional")
        if self.arrivals.size and np.any(np.diff(self.arrivals) <= 0):
            raise ParameterError("arrivals must be strictly increasing")
        if self.energies is not None:
            self.energies = np.asarray(self.energies, dtype=float)
            if self.energies.shape != self.arrivals.shape:
                raise ParameterError("energies must match arrivals in length")
            if self.energies.size and np.any(self.energies <= 0):
                raise ParameterError("energies must be positive")
        if self.shape_ids is not None and len(self.shape_ids) != self.arrivals.size:
            raise ParameterError("shape_ids must match arrivals in length")

    @property
    def n_events(self) -> int:
        return int(self.arrivals.size)


@dataclass
class SampledSignal:
    """A sampled noisy trace plus its grid and noise level."""

    samples: np.ndarray
    grid: SamplingGrid
    noise_sigma: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != (self.grid.n_samples,):
            raise ParameterError(
                f"samples length {self.samples.size} does not match grid "
                f"n_samples {self.grid.n_samples}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ParameterError("samples must all be finite")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be nonnegative")


def sample_poisson_process(
    lam: float,
    *,
    n_events: int | None = None,
    t_max: float | None = None,
    seed: int,
) -> GroundTruth:
    """Draw a homogeneous Poisson sample path.

    Exactly one of ``n_events`` (event-count mode) and ``t_max``
    (time-limit mode) must be given.  Arrivals are cumulative sums of
    iid exponential gaps with rate ``lam``; the draw is deterministic
    for a fixed seed.
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if (n_events is None) == (t_max is None):
        raise ParameterError("give exactly one of n_events or t_max")
    rng = np.random.default_rng(seed)
    if n_events is not None:
        if n_events < 0:
            raise ParameterError("n_events must be nonnegative")
        gaps = rng.exponential(1.0 / lam, size=n_events)
        arrivals = np.cumsum(gaps)
    else:
        if not t_max > 0:
            raise ParameterError(f"t_max must be positive, got {t_max}")
        chunk = max(64, int(1.5 * lam * t_max))
        total = 0.0
        parts = []
        while total <= t_max:
            gaps = rng.exponential(1.0 / lam, size=chunk)
            cum = total + np.cumsum(gaps)
            parts.append(cum)
            total = cum[-1]
        arrivals = np.concatenate(parts)
        arrivals = arrivals[arrivals <= t_max]
    return GroundTruth(arrivals=arrivals, lambda_true=lam)


def _truncated_gaussian_mass(mean: float, std: float, lo: float, hi: float) -> float:
    z = lambda x: 0.5 * (1.0 + math.erf((x - mean) / (std * math.sqrt(2.0))))
    return z(hi) - z(lo)


def default_energy_bounds(mean: float, std: float) -> tuple[float, float]:
    """Positive lower bound and symmetric upper bound at six sigmas."""
    return max(1e-3, mean - 6.0 * std), mean + 6.0 * std


def sample_energies(
    count: int,
    mean: float,
    std: float,
    bounds: tuple[float, float] | None = None,
    *,
    seed: int,
) -> np.ndarray:
    """Iid energies from a Gaussian restricted to ``bounds`` by rejection."""
    if count < 0:
        raise ParameterError("count must be nonnegative")
    if not std > 0:
        raise ParameterError("std must be positive")
    if bounds is None:
        bounds = default_energy_bounds(mean, std)
    e_min, e_max = float(bounds[0]), float(bounds[1])
    e_min = max(0.0, e_min)
    if e_min >= e_max:
        raise ParameterError(f"need E_min < E_max, got ({e_min}, {e_max})")
    if _truncated_gaussian_mass(mean, std, e_min, e_max) < 1e-6:
        raise InfeasibleBoundsError(
            f"acceptance probability below 1e-6 for bounds ({e_min}, {e_max})"
        )
    if count == 0:
        return np.zeros(0)
    rng = np.random.default_rng(seed)
    out = np.empty(count)
    filled = 0
    while filled < count:
        draw = rng.normal(mean, std, size=max(count - filled, 64))
        keep = draw[(draw >= e_min) & (draw <= e_max)]
        take = min(keep.size, count - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
    return out


def resolve_shape(shape_id, shape_grid: ShapeGrid) -> tuple[float, float]:
    """Gamma parameters of an event descriptor (bank index or explicit pair)."""
    if isinstance(shape_id, (int, np.integer)):
        if not 0 <= shape_id < shape_grid.n_shapes:
            raise ParameterError(f"shape index {shape_id} out of range")
        return (
            float(shape_grid.pairs[shape_id][0]),
            float(shape_grid.pairs[shape_id][1]),
        )
    t1, t2 = shape_id
    return float(t1), float(t2)


def synthesize_signal(
    truth: GroundTruth,
    grid: SamplingGrid,
    shape_grid: ShapeGrid,
    sigma: float,
    *,
    seed: int,
) -> SampledSignal:
    """Superpose the energy-scaled event pulses on the grid and add noise.

    Every pulse uses the same truncated support ``(0, tau*dt]`` and the
    same grid normalization as the dictionary shapes, so an event energy
    keeps its meaning in both simulation cases.  ``sigma = 0`` yields the
    noise-free signal.
    """
    if truth.energies is None or truth.shape_ids is None:
        raise ParameterError("truth must carry energies and shape descriptors")
    if sigma < 0:
        raise ParameterError("sigma must be nonnegative")
    n, dt, tau = grid.n_samples, grid.dt, shape_grid.tau
    if truth.arrivals.size and (
        truth.arrivals[0] < 0 or truth.arrivals[-1] >= grid.span
    ):
        raise ParameterError("arrivals must lie within [0, (N-1)*dt)")
    clean = np.zeros(n)
    for t_n, e_n, shape_id in zip(truth.arrivals, truth.energies, truth.shape_ids):
        t1, t2 = resolve_shape(shape_id, shape_grid)
        first = int(math.floor(t_n / dt)) + 1
        last = min(n - 1, int(math.ceil((t_n + tau * dt) / dt)))
        if first > last:
            continue
        idx = np.arange(first, last + 1)
        clean[idx] += e_n * shapes.scaled_pulse(t1, t2, tau, dt, n, idx * dt - t_n)
    if sigma > 0:
        rng = np.random.default_rng(seed)
        samples = clean + rng.normal(0.0, sigma, size=n)
    else:
        samples = clean
    return SampledSignal(samples=samples, grid=grid, noise_sigma=sigma)


def optimal_index_set(truth: GroundTruth, grid: SamplingGrid) -> set[int]:
    """Nearest grid indices of the arrival times (ties at .5 round up)."""
    if truth.arrivals.size == 0:
        return set()
    if truth.arrivals[0] < 0 or truth.arrivals[-1] > grid.span:
        raise ParameterError("arrivals must lie within the grid span")
    rounded = np.floor(truth.arrivals / grid.dt + 0.5).astype(int)
    return set(int(k) for k in rounded)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def write_signal(signal: SampledSignal, path) -> None:
    """Two-column ``index,value`` CSV plus a ``{dt, sigma}`` JSON sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(signal.samples):
            writer.writerow([i, f"{v:.17g}"])
    sidecar = path.with_suffix(".json")
    with open(sidecar, "w") as fh:
        json.dump({"dt": signal.grid.dt, "sigma": signal.noise_sigma}, fh)


def read_signal_values(path) -> np.ndarray:
    """Parse a two-column signal CSV; raises on malformed rows."""
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["index", "value"]:
            raise SignalFormatError(f"{path}: expected header 'index,value'")
        expected = 0
        for lineno, row in enumerate(reader, start=2):
            if len(row) < 2:
                raise SignalFormatError(f"{path}:{lineno}: malformed row {row!r}")
            try:
                idx = int(row[0])
                val = float(row[1])
            except ValueError as exc:
                raise SignalFormatError(f"{path}:{lineno}: {exc}") from exc
            if idx != expected:
                raise SignalFormatError(
                    f"{path}:{lineno}: non-monotone index {idx}, expected {expected}"
                )
            values.append(val)
            expected += 1
    return np.asarray(values, dtype=float)


def read_signal_sidecar(path) -> dict:
    sidecar = Path(path).with_suffix(".json")
    if sidecar.exists():
        with open(sidecar) as fh:
            return json.load(fh)
    return {}


def write_truth(truth: GroundTruth, path) -> None:
    """Ground-truth CSV: ``t,energy,column`` (case I) or ``t,energy,theta1,theta2``."""
    case_one = truth.shape_ids is not None and all(
        isinstance(s, (int, np.integer)) for s in truth.shape_ids
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if case_one:
            writer.writerow(["t", "energy", "column"])
            for t, e, s in zip(truth.arrivals, truth.energies, truth.shape_ids):
                writer.writerow([f"{t:.17g}", f"{e:.17g}", int(s)])
        else:
            writer.writerow(["t", "energy", "theta1", "theta2"])
            for t, e, s in zip(truth.arrivals, truth.energies, truth.shape_ids):
                writer.writerow([f"{t:.17g}", f"{e:.17g}", f"{s[0]:.17g}", f"{s[1]:.17g}"])


def read_truth(path) -> GroundTruth:
    arrivals, energies, shape_ids = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SignalFormatError(f"{path}: empty ground-truth file")
        header = [h.strip() for h in header]
        if header == ["t", "energy", "column"]:
            case_one = True
        elif header == ["t", "energy", "theta1", "theta2"]:
            case_one = False
        else:
            raise SignalFormatError(f"{path}: unrecognized header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            try:
                arrivals.append(float(row[0]))
                energies.append(float(row[1]))
                if case_one:
                    shape_ids.append(int(row[2]))
                else:
                    shape_ids.append((float(row[2]), float(row[3])))
            except (ValueError, IndexError) as exc:
                raise SignalFormatError(f"{path}:{lineno}: {exc}") from exc
    return GroundTruth(
        arrivals=np.asarray(arrivals),
        energies=np.asarray(energies),
        shape_ids=shape_ids,
    )
