"""Physical parameters and the periodic momentum lattice.

Modes live on ``k = 2*pi*n/L`` inside the ball ``|k|^2 <= lambda_cut``.  Reality of
the field ties ``n`` to ``-n``, so only the zero mode and one representative of each
``{n, -n}`` pair carry independent degrees of freedom.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Conjugacy",
    "ModeSet",
    "PhysicalParams",
    "ResourceLimitError",
    "build_mode_set",
    "classify",
    "mode_energy",
    "mode_rate",
]

#: Upper bound on lattice points in a cutoff ball (about 100 MB of int64 triples).
DEFAULT_MAX_POINTS = 4_000_000

# Relative slack on the cutoff so points exactly on the sphere survive rounding.
_CUTOFF_RTOL = 1e-12


class ResourceLimitError(ValueError):
    """A request would exceed a configured size guard."""


@dataclass(frozen=True)
class PhysicalParams:
    """Mass ``m``, Planck constant ``hbar``, diffusion ``nu``, box side ``L`` and cutoff."""

    m: float
    L: float
    lambda_cut: float
    nu: float = 0.5
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("m", "hbar", "L", "lambda_cut"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a finite positive number, got {value!r}")
        if not (isinstance(self.nu, (int, float)) and math.isfinite(self.nu) and self.nu >= 0):
            raise ValueError(f"nu must be a finite real number >= 0, got {self.nu!r}")

    @property
    def mu(self) -> float:
        """Inverse Compton length ``m/hbar``."""
        return self.m / self.hbar

    @property
    def time_scale(self) -> float:
        """Factor ``2*nu/hbar`` by which Markov times map onto Euclidean times."""
        return 2.0 * self.nu / self.hbar

    @property
    def k_unit(self) -> float:
        return 2.0 * math.pi / self.L


class Conjugacy(enum.Enum):
    SELF_CONJUGATE = "self-conjugate"
    REPRESENTATIVE = "representative"
    MIRROR = "mirror"


def _as_index(n) -> tuple[int, int, int]:
    t = tuple(int(c) for c in n)
    if len(t) != 3:
        raise ValueError(f"mode index must have 3 components, got {n!r}")
    return t


def classify(n) -> Conjugacy:
    """Representative iff the first nonzero component of ``n`` is positive."""
    n = _as_index(n)
    for c in n:
        if c > 0:
            return Conjugacy.REPRESENTATIVE
        if c < 0:
            return Conjugacy.MIRROR
    return Conjugacy.SELF_CONJUGATE


def mirror(n) -> tuple[int, int, int]:
    a, b, c = _as_index(n)
    return (-a, -b, -c)


def _ksq(n, params: PhysicalParams):
    n = np.asarray(n, dtype=float)
    return params.k_unit**2 * np.sum(n * n, axis=-1)


def mode_energy(n, params: PhysicalParams):
    """``E_k = (hbar/2) sqrt(|k|^2 + m^2/hbar^2)``; ``n`` may be one triple or an (..., 3) array."""
    e = 0.5 * params.hbar * np.sqrt(_ksq(n, params) + params.mu**2)
    return float(e) if np.ndim(e) == 0 else e


def mode_rate(n, params: PhysicalParams):
    """OU relaxation rate ``4 nu E_k / hbar^2``."""
    rate = 4.0 * params.nu * np.asarray(mode_energy(n, params)) / params.hbar**2
    return float(rate) if np.ndim(rate) == 0 else rate


def _in_ball_bound(params: PhysicalParams) -> float:
    # |n|^2 bound equivalent to |k|^2 <= lambda_cut
    return params.lambda_cut / params.k_unit**2 * (1.0 + _CUTOFF_RTOL)


@dataclass(frozen=True)
class ModeSet:
    """Canonical half-lattice inside the cutoff ball.

    ``reps`` holds one representative per ``{n, -n}`` pair in lexicographic order.
    The zero mode is always present for a positive cutoff.
    """

    params: PhysicalParams
    reps: tuple[tuple[int, int, int], ...]
    has_zero: bool = True
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {n: j for j, n in enumerate(self.canonical)})

    @property
    def canonical(self) -> tuple[tuple[int, int, int], ...]:
        """Independent modes: zero mode first, then the representatives."""
        return (((0, 0, 0),) if self.has_zero else ()) + self.reps

    def __len__(self) -> int:
        return len(self.canonical)

    @property
    def n_points(self) -> int:
        """Number of lattice points in the full cutoff ball."""
        return int(self.has_zero) + 2 * len(self.reps)

    def position(self, n) -> int:
        """Row of mode ``n`` (or of its representative) in canonical order."""
        n = _as_index(n)
        if classify(n) is Conjugacy.MIRROR:
            n = mirror(n)
        try:
            return self._index[n]
        except KeyError:
            raise KeyError(f"mode {n} is outside the cutoff ball") from None

    def contains(self, n) -> bool:
        n = _as_index(n)
        return sum(c * c for c in n) <= _in_ball_bound(self.params)

    @cached_property
    def canonical_array(self) -> np.ndarray:
        return np.array(self.canonical, dtype=np.int64).reshape(-1, 3)

    @cached_property
    def ball_array(self) -> np.ndarray:
        """Every lattice point of the ball: zero, representatives, then mirrors."""
        reps = np.array(self.reps, dtype=np.int64).reshape(-1, 3)
        parts = [np.zeros((1, 3), dtype=np.int64)] if self.has_zero else []
        return np.concatenate(parts + [reps, -reps])

    @cached_property
    def wavevectors(self) -> np.ndarray:
        return self.params.k_unit * self.canonical_array

    @cached_property
    def energies(self) -> np.ndarray:
        return np.atleast_1d(mode_energy(self.canonical_array, self.params))

    @cached_property
    def omegas(self) -> np.ndarray:
        """Angular frequencies ``2 E_k / hbar`` (inverse length)."""
        return 2.0 * self.energies / self.params.hbar

    @cached_property
    def rates(self) -> np.ndarray:
        return np.atleast_1d(mode_rate(self.canonical_array, self.params))

    def with_nu(self, nu: float) -> "ModeSet":
        """Same lattice, different diffusion parameter."""
        from dataclasses import replace

        return ModeSet(replace(self.params, nu=nu), self.reps, self.has_zero)


def build_mode_set(params: PhysicalParams, max_points: int = DEFAULT_MAX_POINTS) -> ModeSet:
    """Enumerate the cutoff ball and split it into zero mode and representative/mirror pairs."""
    bound = _in_ball_bound(params)
    nmax = int(math.floor(math.sqrt(bound)))
    estimate = 4.0 / 3.0 * math.pi * (nmax + 1) ** 3
    if estimate > max_points:
        raise ResourceLimitError(
            f"cutoff ball holds ~{estimate:.3g} lattice points (limit {max_points}); "
            "lower lambda_cut or L"
        )
    r = np.arange(-nmax, nmax + 1)
    n = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    n = n[np.sum(n * n, axis=1) <= bound]
    if len(n) > max_points:
        raise ResourceLimitError(f"cutoff ball holds {len(n)} lattice points (limit {max_points})")
    # first nonzero component positive; meshgrid 'ij' order is already lexicographic
    first = np.where(n[:, 0] != 0, n[:, 0], np.where(n[:, 1] != 0, n[:, 1], n[:, 2]))
    reps = n[first > 0]
    has_zero = bool(np.any(first == 0))
    return ModeSet(params, tuple(map(tuple, reps.tolist())), has_zero)
