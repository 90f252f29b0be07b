"""Exact Ornstein-Uhlenbeck simulation of the Markov field and Monte Carlo estimators.

Every canonical mode is an independent OU process: representatives carry an (R, I)
pair with stationary variance ``hbar^2/(4 E_k)`` and Wiener increments of variance
``2 nu dt``; the zero mode carries R only, with variance ``hbar^2/(2 E_0)`` and
increments of variance ``4 nu dt``.

Error bars always come from the spread between independent trajectories.  Averaging
over time origins inside a trajectory only sharpens each trajectory's batch value.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .analytic import SpacetimePoint, _as_point
from .lattice import Conjugacy, ModeSet, PhysicalParams, classify, mode_energy, mode_rate
from .rng import COMPONENT_I, COMPONENT_R, RngPolicy

__all__ = [
    "CorrelatorEstimate",
    "EnsembleConfig",
    "FieldTrajectory",
    "ModeState",
    "estimate_field_npoint",
    "estimate_mode_autocorr",
    "field_series",
    "field_value",
    "ou_step",
    "run_ensemble",
    "simulate_trajectory",
    "stationary_sample",
    "write_trajectory_dump",
]

MIN_TRAJECTORIES = 8
MAX_NPOINT = 12
SCHEMES = ("exact", "euler")

#: Prefactors of the field reconstruction.  "schwinger" makes the two-point function
#: equal to the sum over k of exp(-lambda_k|dt|)/(2 omega_k L^3); "literal" is the bare
#: (hbar L^3)^(-1/2), which gives exactly twice that.
FIELD_NORMALIZATIONS = ("schwinger", "literal")


class EnsembleError(ValueError):
    """Invalid ensemble or estimator configuration."""


@dataclass(frozen=True)
class EnsembleConfig:
    n_trajectories: int = 64
    grid_dt: float = 0.05
    grid_len: int = 512
    scheme: str = "exact"

    def __post_init__(self):
        if self.n_trajectories < MIN_TRAJECTORIES:
            raise EnsembleError(
                f"n_trajectories={self.n_trajectories}: at least {MIN_TRAJECTORIES} independent "
                "trajectories are needed for batch error estimates"
            )
        if not (self.grid_dt > 0 and math.isfinite(self.grid_dt)):
            raise EnsembleError("grid_dt must be positive")
        if self.grid_len < 1:
            raise EnsembleError("grid_len must be at least 1 step")
        if self.scheme not in SCHEMES:
            raise EnsembleError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    @property
    def grid(self) -> np.ndarray:
        """Uniform sample times; ``grid_len`` steps, ``grid_len + 1`` samples."""
        return self.grid_dt * np.arange(self.grid_len + 1)


@dataclass
class ModeState:
    """Amplitudes of one mode; ``i`` is None for the zero mode.  Arrays are allowed."""

    r: float | np.ndarray
    i: float | np.ndarray | None = None


@dataclass(frozen=True)
class CorrelatorEstimate:
    mean: float
    std_err: float
    n_samples: int
    snap_error: float = 0.0

    @classmethod
    def from_batches(cls, batches: Sequence[float], snap_error: float = 0.0) -> "CorrelatorEstimate":
        n = len(batches)
        mean = math.fsum(batches) / n
        var = math.fsum((b - mean) ** 2 for b in batches) / (n - 1) if n > 1 else 0.0
        return cls(mean, math.sqrt(var / n), n, snap_error)

    def z_score(self, expected: float) -> float:
        diff = self.mean - expected
        if self.std_err == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.std_err


# ---------------------------------------------------------------------------
# single-mode kernels


def _mode_constants(n, params: PhysicalParams) -> tuple[float, float, float]:
    """(rate, stationary variance, diffusion coefficient) of one mode component."""
    energy = mode_energy(n, params)
    rate = mode_rate(n, params)
    if classify(n) is Conjugacy.SELF_CONJUGATE:
        return rate, params.hbar**2 / (2.0 * energy), 4.0 * params.nu
    return rate, params.hbar**2 / (4.0 * energy), 2.0 * params.nu


def stationary_sample(n, params: PhysicalParams, rng: np.random.Generator, size=None) -> ModeState:
    """Draw from the ground-state Gaussian of mode ``n``."""
    _, var, _ = _mode_constants(n, params)
    sd = math.sqrt(var)
    r = sd * rng.standard_normal(size)
    if classify(n) is Conjugacy.SELF_CONJUGATE:
        return ModeState(r, None)
    return ModeState(r, sd * rng.standard_normal(size))


def _step_coefficients(rate, var, diffusion, dt, scheme: str):
    if scheme == "exact":
        decay = np.exp(-rate * dt)
        return decay, np.sqrt(var * -np.expm1(-2.0 * rate * dt))
    return 1.0 - rate * dt, np.sqrt(diffusion * dt)


def ou_step(s: ModeState, n, dt: float, params: PhysicalParams, rng: np.random.Generator,
            scheme: str = "exact") -> ModeState:
    """Advance one mode by ``dt`` with the exact Gaussian transition (or Euler-Maruyama)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    rate, var, diffusion = _mode_constants(n, params)
    a, b = _step_coefficients(rate, var, diffusion, dt, scheme)
    shape = np.shape(s.r)
    r = a * s.r + b * rng.standard_normal(shape or None)
    if s.i is None:
        return ModeState(r, None)
    return ModeState(r, a * s.i + b * rng.standard_normal(shape or None))


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class FieldTrajectory:
    """Canonical-mode amplitudes on a time grid.

    ``r`` and ``i`` have shape (modes, times) with rows in ``modes.canonical`` order
    (or the subset that was simulated); the zero mode's ``i`` row is identically zero.
    """

    grid: np.ndarray
    r: np.ndarray
    i: np.ndarray
    seed: int
    traj_id: int
    mode_rows: tuple[tuple[int, int, int], ...] = field(default=())


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-D sequence of times")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def _simulate_batch(modes: ModeSet, subset: Sequence[tuple[int, int, int]], grid: np.ndarray,
                    policy: RngPolicy, traj_ids: Sequence[int], scheme: str) -> tuple[np.ndarray, np.ndarray]:
    """R and I amplitudes, shape (trajectories, modes, times).

    Only elementwise arithmetic runs across the batch axis, so every trajectory comes
    out bit-identical whatever batch it is simulated in.
    """
    params = modes.params
    nt, nm, nb = len(grid), len(subset), len(traj_ids)
    consts = np.array([_mode_constants(n, params) for n in subset]).reshape(-1, 3)
    rate, var, diffusion = consts[:, 0], consts[:, 1], consts[:, 2]
    has_i = np.array([classify(n) is not Conjugacy.SELF_CONJUGATE for n in subset], dtype=bool)

    z_r = np.zeros((nb, nm, nt))
    z_i = np.zeros((nb, nm, nt))
    for b, tid in enumerate(traj_ids):
        for row, n in enumerate(subset):
            z_r[b, row] = policy.normals(tid, n, COMPONENT_R, nt)
            if has_i[row]:
                z_i[b, row] = policy.normals(tid, n, COMPONENT_I, nt)

    r = np.empty((nb, nm, nt))
    i = np.empty((nb, nm, nt))
    sd = np.sqrt(var)
    r[:, :, 0] = sd * z_r[:, :, 0]
    i[:, :, 0] = sd * z_i[:, :, 0]
    dts = np.diff(grid)
    for j in range(1, nt):
        a, b = _step_coefficients(rate, var, diffusion, dts[j - 1], scheme)
        r[:, :, j] = a * r[:, :, j - 1] + b * z_r[:, :, j]
        i[:, :, j] = a * i[:, :, j - 1] + b * z_i[:, :, j]
    return r, i


def _simulate(modes: ModeSet, subset, grid, policy: RngPolicy, traj_id: int, scheme: str) -> FieldTrajectory:
    r, i = _simulate_batch(modes, subset, grid, policy, [traj_id], scheme)
    return FieldTrajectory(grid, r[0], i[0], policy.master_seed, traj_id, tuple(subset))


def simulate_trajectory(modes: ModeSet, grid, policy: RngPolicy, traj_id: int,
                        scheme: str = "exact") -> FieldTrajectory:
    """Stationary start, then exact OU transitions across the grid gaps, for every canonical mode."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    return _simulate(modes, modes.canonical, _check_grid(grid), policy, traj_id, scheme)


def _field_prefactor(params: PhysicalParams, normalization: str) -> float:
    if normalization == "schwinger":
        return 1.0 / math.sqrt(2.0 * params.hbar * params.L**3)
    if normalization == "literal":
        return 1.0 / math.sqrt(params.hbar * params.L**3)
    raise ValueError(f"normalization must be one of {FIELD_NORMALIZATIONS}")


def field_series(traj: FieldTrajectory, modes: ModeSet, x, normalization: str = "schwinger") -> np.ndarray:
    """Real field at spatial point ``x`` for every grid time.

    ``phi = c [R_0 + sum_reps 2 (R_k cos(k.x) - I_k sin(k.x))]``, the pairing of each
    representative with its mirror written out so no imaginary part ever appears.
    """
    rows = traj.mode_rows or modes.canonical
    n = np.array(rows, dtype=np.int64).reshape(-1, 3)
    phase = modes.params.k_unit * (n @ np.asarray(x, dtype=float))
    nonzero = np.any(n != 0, axis=1)
    cos_w = np.where(nonzero, 2.0 * np.cos(phase), 1.0)
    sin_w = np.where(nonzero, 2.0 * np.sin(phase), 0.0)
    # elementwise + column sums keep the result independent of BLAS threading
    total = np.sum(cos_w[:, None] * traj.r - sin_w[:, None] * traj.i, axis=0)
    return _field_prefactor(modes.params, normalization) * total


def field_value(traj: FieldTrajectory, modes: ModeSet, x, t_index: int,
                normalization: str = "schwinger") -> float:
    if not -len(traj.grid) <= t_index < len(traj.grid):
        raise IndexError(f"t_index {t_index} outside grid of length {len(traj.grid)}")
    return float(field_series(traj, modes, x, normalization)[t_index])


def write_trajectory_dump(path, trajectories: Iterable[FieldTrajectory], modes: ModeSet) -> None:
    """One CSV row per (trajectory, time index, mode) with the R and I amplitudes."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trajectory", "time_index", "n1", "n2", "n3", "r", "i"])
        for traj in trajectories:
            rows = traj.mode_rows or modes.canonical
            for j in range(len(traj.grid)):
                for row, n in enumerate(rows):
                    w.writerow([traj.traj_id, j, *n, f"{traj.r[row, j]:.17g}", f"{traj.i[row, j]:.17g}"])


# ---------------------------------------------------------------------------
# observables and ensemble runs


def _lagged_mean(a: np.ndarray, b: np.ndarray, lag: int) -> float:
    n = len(a) - lag
    return float(np.mean(a[:n] * b[lag:lag + n]))


@dataclass(frozen=True)
class AutocorrObservable:
    """Time-origin averaged ``x(t) x(t + lag)`` of one canonical mode component."""

    mode: tuple[int, int, int]
    lag_steps: tuple[int, ...]
    component: str = "r"

    def modes_needed(self):
        return (self.mode,)

    def __call__(self, traj: FieldTrajectory, modes: ModeSet) -> list[float]:
        row = traj.mode_rows.index(self.mode)
        out = []
        for lag in self.lag_steps:
            vr = _lagged_mean(traj.r[row], traj.r[row], lag)
            vi = _lagged_mean(traj.i[row], traj.i[row], lag)
            out.append({"r": vr, "i": vi, "both": 0.5 * (vr + vi)}[self.component])
        return out


@dataclass(frozen=True)
class NPointObservable:
    """Time-origin averaged products of field values; one value per point set.

    Each point set is a tuple of (x, time offset in grid steps).
    """

    point_sets: tuple[tuple[tuple[tuple[float, float, float], int], ...], ...]
    normalization: str = "schwinger"

    def modes_needed(self):
        return None

    def __call__(self, traj: FieldTrajectory, modes: ModeSet) -> list[float]:
        cache: dict = {}
        nt = len(traj.grid)
        out = []
        for pts in self.point_sets:
            span = max(off for _, off in pts)
            n_origins = nt - span
            prod = np.ones(n_origins)
            for x, off in pts:
                if x not in cache:
                    cache[x] = field_series(traj, modes, x, self.normalization)
                prod = prod * cache[x][off:off + n_origins]
            out.append(float(np.mean(prod)))
        return out


def _subset_for(observables, modes: ModeSet):
    needed = []
    for obs in observables:
        req = obs.modes_needed()
        if req is None:
            return modes.canonical
        needed.extend(req)
    order = {n: j for j, n in enumerate(modes.canonical)}
    for n in needed:
        if n not in order:
            raise EnsembleError(f"mode {n} is not a canonical mode of this lattice")
    return tuple(sorted(set(needed), key=order.__getitem__))


_BATCH = 64


def _batch_worker(task):
    modes, subset, grid, policy, traj_ids, scheme, observables = task
    rows = []
    for s in range(0, len(traj_ids), _BATCH):
        ids = traj_ids[s:s + _BATCH]
        r, i = _simulate_batch(modes, subset, grid, policy, ids, scheme)
        for b, tid in enumerate(ids):
            traj = FieldTrajectory(grid, np.ascontiguousarray(r[b]), np.ascontiguousarray(i[b]),
                                   policy.master_seed, tid, tuple(subset))
            values = []
            for obs in observables:
                values.extend(obs(traj, modes))
            rows.append(values)
    return rows


def run_ensemble(modes: ModeSet, ensemble: EnsembleConfig, policy: RngPolicy,
                 observables: Sequence, jobs: int = 1) -> np.ndarray:
    """Per-trajectory observable values, shape (n_trajectories, n_values).

    Trajectories are independent, so they are farmed out in contiguous chunks and
    reassembled in trajectory order; the output does not depend on ``jobs``.
    """
    subset = _subset_for(observables, modes)
    grid = ensemble.grid
    ids = list(range(ensemble.n_trajectories))
    jobs = max(1, int(jobs))
    if jobs == 1:
        rows = _batch_worker((modes, subset, grid, policy, ids, ensemble.scheme, tuple(observables)))
    else:
        chunk = -(-len(ids) // jobs)
        tasks = [(modes, subset, grid, policy, ids[s:s + chunk], ensemble.scheme, tuple(observables))
                 for s in range(0, len(ids), chunk)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = [row for part in pool.map(_batch_worker, tasks) for row in part]
    return np.array(rows, dtype=float)


def snap_to_grid(value: float, dt: float) -> tuple[int, float]:
    """Nearest grid step count and the absolute snap error."""
    steps = int(round(value / dt))
    return steps, abs(value - steps * dt)


def estimate_mode_autocorr(modes: ModeSet, n, lags: Sequence[float], ensemble: EnsembleConfig,
                           policy: RngPolicy, component: str = "r", jobs: int = 1) -> list[CorrelatorEstimate]:
    """Monte Carlo ``E(x_k(t) x_k(t + tau))`` for each lag, x = R, I or their average ("both").

    Only the requested mode is simulated; its random streams are the ones it would
    use inside a full-lattice trajectory.
    """
    if component not in ("r", "i", "both"):
        raise ValueError("component must be 'r', 'i' or 'both'")
    mode = tuple(int(c) for c in n)
    if classify(mode) is Conjugacy.MIRROR:
        mode = tuple(-c for c in mode)
    if mode not in modes.canonical:
        raise EnsembleError(f"mode {mode} is outside the cutoff ball")
    snaps = [snap_to_grid(abs(tau), ensemble.grid_dt) for tau in lags]
    for (steps, _), tau in zip(snaps, lags):
        if steps > ensemble.grid_len:
            raise EnsembleError(f"lag {tau} exceeds the simulated time span")
    obs = AutocorrObservable(mode, tuple(s for s, _ in snaps), component)
    values = run_ensemble(modes, ensemble, policy, [obs], jobs)
    return [CorrelatorEstimate.from_batches(values[:, j].tolist(), snaps[j][1]) for j in range(len(lags))]


def npoint_observable(point_sets: Sequence[Sequence], ensemble: EnsembleConfig,
                      normalization: str = "schwinger") -> tuple[NPointObservable, list[float]]:
    """Snap every point set onto the grid; returns the observable and per-set snap errors."""
    sets, errors = [], []
    for pts in point_sets:
        pts = [_as_point(p) for p in pts]
        if not pts:
            raise EnsembleError("empty point set")
        if len(pts) > MAX_NPOINT:
            raise EnsembleError(f"{len(pts)} points exceed the limit of {MAX_NPOINT}")
        t0 = min(p.t for p in pts)
        snapped, worst = [], 0.0
        for p in pts:
            steps, err = snap_to_grid(p.t - t0, ensemble.grid_dt)
            if steps > ensemble.grid_len:
                raise EnsembleError(f"time span of point set exceeds the simulated grid")
            snapped.append((p.x, steps))
            worst = max(worst, err)
        sets.append(tuple(snapped))
        errors.append(worst)
    return NPointObservable(tuple(sets), normalization), errors


def estimate_field_npoint(modes: ModeSet, points: Sequence, ensemble: EnsembleConfig, policy: RngPolicy,
                          normalization: str = "schwinger", jobs: int = 1) -> CorrelatorEstimate:
    """Monte Carlo ``E(phi(p_1) ... phi(p_N))`` from reconstructed field values."""
    obs, errors = npoint_observable([points], ensemble, normalization)
    values = run_ensemble(modes, ensemble, policy, [obs], jobs)
    return CorrelatorEstimate.from_batches(values[:, 0].tolist(), errors[0])
