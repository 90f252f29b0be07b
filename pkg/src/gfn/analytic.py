"""Closed-form and quadrature correlators of the free field.

Conventions: times and lengths share units (c = 1), ``mu = m/hbar`` is the inverse
Compton length and ``omega_k = sqrt(|k|^2 + mu^2) = 2 E_k / hbar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .bessel import k1
from .lattice import ModeSet, PhysicalParams, classify, Conjugacy, mode_energy, mode_rate

__all__ = [
    "CoincidentPointError",
    "SpacetimePoint",
    "field_mode_correlation",
    "isserlis",
    "mode_correlation",
    "modesum_npoint",
    "scaled_time_expectation",
    "schwinger2_continuum",
    "schwinger2_modesum",
    "schwinger2_quadrature",
    "schwingerN",
    "wick_pairings",
]

#: Largest N accepted by :func:`wick_pairings`; 15!! is about two million matchings.
MAX_WICK_N = 16


class CoincidentPointError(ValueError):
    """Two arguments of a correlator coincide, where it diverges."""


@dataclass(frozen=True)
class SpacetimePoint:
    x: tuple[float, float, float]
    t: float = 0.0

    def __post_init__(self):
        x = tuple(float(c) for c in self.x)
        if len(x) != 3:
            raise ValueError(f"spatial part must have 3 components, got {self.x!r}")
        if not all(math.isfinite(c) for c in x + (float(self.t),)):
            raise ValueError(f"non-finite coordinate in {self!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))

    def __sub__(self, other: "SpacetimePoint") -> "SpacetimePoint":
        return SpacetimePoint(tuple(a - b for a, b in zip(self.x, other.x)), self.t - other.t)

    def __add__(self, other: "SpacetimePoint") -> "SpacetimePoint":
        return SpacetimePoint(tuple(a + b for a, b in zip(self.x, other.x)), self.t + other.t)

    def scale_time(self, factor: float) -> "SpacetimePoint":
        return SpacetimePoint(self.x, factor * self.t)

    @property
    def spatial_norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.x))

    @property
    def euclidean_norm(self) -> float:
        return math.hypot(self.spatial_norm, self.t)


def _as_point(p) -> SpacetimePoint:
    if isinstance(p, SpacetimePoint):
        return p
    x, t = p
    return SpacetimePoint(tuple(x), t)


# ---------------------------------------------------------------------------
# mode level


def mode_correlation(n, dt: float, params: PhysicalParams) -> float:
    """Stationary autocorrelation ``E(R_k(t) R_k(t+dt))`` of one nonzero mode.

    The I component has the same autocorrelation.
    """
    if classify(n) is Conjugacy.SELF_CONJUGATE:
        raise ValueError("zero mode has a different variance; use field_mode_correlation")
    energy = mode_energy(n, params)
    return math.exp(-mode_rate(n, params) * abs(dt)) * params.hbar**2 / (4.0 * energy)


def field_mode_correlation(n, n2, dt: float, params: PhysicalParams) -> float:
    """``E(phi_k(t) phi_k'(t+dt))``; nonzero only for ``k' = -k``."""
    n = tuple(int(c) for c in n)
    n2 = tuple(int(c) for c in n2)
    if n2 != tuple(-c for c in n):
        return 0.0
    energy = mode_energy(n, params)
    return 2.0 * math.exp(-mode_rate(n, params) * abs(dt)) * params.hbar**2 / (4.0 * energy)


def schwinger2_modesum(p1, p2, modes: ModeSet, nu: float | None = None) -> float:
    """Finite-volume, finite-cutoff two-point function of the Markov field.

    ``(1/L^3) sum_k exp(i k.dx) exp(-lambda_k |dt|) / (2 omega_k)`` over the cutoff ball,
    with ``lambda_k = (2 nu/hbar) omega_k``.  ``nu`` overrides ``modes.params.nu``.
    """
    d = _as_point(p1) - _as_point(p2)
    params = modes.params
    nu = params.nu if nu is None else nu
    rates = (4.0 * nu / params.hbar**2) * modes.energies
    return _modesum(modes, d, np.exp(-rates * abs(d.t)))


def _modesum(modes: ModeSet, d: SpacetimePoint, decay: np.ndarray):
    # each representative stands for the pair {k, -k}: 2 cos(k.dx) / (2 omega)
    phase = modes.wavevectors @ np.asarray(d.x)
    weight = np.where(np.any(modes.canonical_array != 0, axis=1), 2.0, 1.0)
    terms = weight * np.cos(phase) * decay / (2.0 * modes.omegas)
    return np.sum(terms) / modes.params.L**3


# ---------------------------------------------------------------------------
# continuum


def _separation(dp) -> tuple[float, float]:
    d = _as_point(dp)
    return d.spatial_norm, abs(d.t)


def schwinger2_continuum(dp, params: PhysicalParams) -> float:
    """Euclidean two-point function ``mu K1(mu r) / (4 pi^2 r)`` at separation ``dp``."""
    r = math.hypot(*_separation(dp))
    if r == 0.0:
        raise CoincidentPointError("two-point function diverges at zero separation")
    mu = params.mu
    return mu * k1(mu * r) / (4.0 * math.pi**2 * r)


def _subtracted_kernel(k: float, tau: float, mu: float) -> float:
    # k exp(-omega tau)/omega - exp(-k tau), written to avoid cancellation at large k
    if k == 0.0:
        return -1.0
    omega = math.sqrt(k * k + mu * mu)
    log_ratio = -0.5 * math.log1p((mu / k) ** 2) - tau * mu * mu / (omega + k)
    return math.exp(-k * tau) * math.expm1(log_ratio)


def schwinger2_quadrature(dp, params: PhysicalParams, rtol: float = 1e-11) -> float:
    """Independent radial-quadrature evaluation of the Euclidean two-point function.

    The frequency integral is done in closed form, leaving
    ``(1/(4 pi^2 R)) int_0^inf sin(kR) k exp(-omega tau)/omega dk``.  The slowly decaying
    part ``exp(-k tau)`` is integrated analytically and the remainder is a Fourier-sine
    integral handled by QUADPACK's cycle-by-cycle extrapolation (QAWF).
    """
    R, tau = _separation(dp)
    if R == 0.0 and tau == 0.0:
        raise CoincidentPointError("two-point function diverges at zero separation")
    mu = params.mu

    def omega(k):
        return math.sqrt(k * k + mu * mu)

    if R <= 1e-9 * tau:
        val, _ = integrate.quad(
            lambda k: k * k * math.exp(-omega(k) * tau) / omega(k),
            0.0, np.inf, epsabs=0.0, epsrel=rtol, limit=500,
        )
        return val / (4.0 * math.pi**2)
    if R < 8.0 * tau:
        # damping wins within a few dozen oscillations; QAWF's cycle extrapolation
        # is unstable when successive cycles shrink this fast
        k_max = 45.0 / tau + 10.0 * mu
        val, _ = integrate.quad(
            lambda k: k * math.exp(-omega(k) * tau) / omega(k), 0.0, k_max,
            weight="sin", wvar=R, epsabs=0.0, epsrel=rtol, limit=2000,
        )
        return val / (4.0 * math.pi**2 * R)
    head = R / (R * R + tau * tau)
    rest, _ = integrate.quad(
        _subtracted_kernel, 0.0, np.inf, args=(tau, mu), weight="sin", wvar=R,
        epsabs=1e-12 * head, limlst=200, limit=500,
    )
    return (head + rest) / (4.0 * math.pi**2 * R)


# ---------------------------------------------------------------------------
# Wick combinatorics


def wick_pairings(N: int, max_n: int = MAX_WICK_N) -> list[tuple[tuple[int, int], ...]]:
    """All perfect matchings of ``0..N-1``; empty for odd ``N``.

    Ordered by pairing the smallest unpaired index first, then its partner ascending.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    if N > max_n:
        raise ValueError(f"N={N} exceeds the pairing limit {max_n} ((N-1)!! matchings)")
    if N % 2:
        return []

    def rec(items):
        if not items:
            yield ()
            return
        first, rest = items[0], items[1:]
        for j, partner in enumerate(rest):
            for tail in rec(rest[:j] + rest[j + 1:]):
                yield ((first, partner),) + tail

    return list(rec(tuple(range(N))))


def isserlis(pair_value: Callable[[int, int], complex], N: int):
    """Sum over perfect matchings of products of ``pair_value(i, j)``; zero for odd ``N``."""
    if N % 2:
        return 0.0
    cache: dict[tuple[int, int], complex] = {}

    def value(i, j):
        if (i, j) not in cache:
            cache[(i, j)] = pair_value(i, j)
        return cache[(i, j)]

    total = 0.0
    for pairing in wick_pairings(N):
        prod = 1.0
        for i, j in pairing:
            prod = prod * value(i, j)
        total = total + prod
    return total


def _check_distinct(points: Sequence[SpacetimePoint]):
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if points[i] == points[j]:
                raise CoincidentPointError(f"points {i} and {j} coincide")


def schwingerN(points, params: PhysicalParams) -> float:
    """Euclidean N-point function as a Wick sum of continuum two-point functions."""
    pts = [_as_point(p) for p in points]
    _check_distinct(pts)
    return isserlis(lambda i, j: schwinger2_continuum(pts[i] - pts[j], params), len(pts))


def scaled_time_expectation(points, params: PhysicalParams) -> float:
    """Infinite-volume Markov expectation: Schwinger function at times scaled by ``2 nu/hbar``."""
    pts = [_as_point(p).scale_time(params.time_scale) for p in points]
    return schwingerN(pts, params)


def modesum_npoint(points, modes: ModeSet) -> float:
    """Finite-volume Markov N-point expectation built from :func:`schwinger2_modesum`."""
    pts = [_as_point(p) for p in points]
    return isserlis(lambda i, j: schwinger2_modesum(pts[i], pts[j], modes), len(pts))
