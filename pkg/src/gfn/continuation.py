"""Continuation of the Markov correlators to complex diffusion parameter.

Each mode factor ``exp(-lambda |dt|)`` has ``lambda = (2 nu/hbar) omega_k``, so a complex
``nu`` just rotates the Euclidean time.  At ``nu = +i hbar/2`` the two-point function
becomes the time-ordered vacuum expectation; ``nu = -i hbar/2`` gives anti-time ordering.

Position-space values use the radial reduction
``(1/(2 pi^2 R)) int_0^inf k sin(kR) exp(-c omega |dt|) / (2 omega) dk`` with
``c = 2 nu/hbar``.  On the real axis this converges only in the Abel sense when
``Re c = 0``, so a regulator ``exp(-eps k)`` is applied and removed by polynomial
extrapolation in ``eps``.  Each regulated integral is itself evaluated along rays in the
complex k plane on which the integrand decays exponentially.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .analytic import CoincidentPointError, SpacetimePoint, _as_point, _check_distinct, isserlis
from .lattice import ModeSet, PhysicalParams, mode_energy

__all__ = [
    "BoostCheck",
    "DEFAULT_EPS_SCHEDULE",
    "PropagatorValue",
    "QuadratureError",
    "STANDARD_BOOST_PAIRS",
    "boost",
    "continued_mode_correlation",
    "continued_modesum",
    "continued_two_point",
    "feynman_propagator",
    "lorentz_invariance_check",
    "npoint_continued",
]

#: Regulator values; halving from 0.05 keeps the extrapolation error near 1e-11.
DEFAULT_EPS_SCHEDULE = (0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625)

_MAX_RAY_ANGLE = math.pi / 3
_LIGHTCONE_RTOL = 1e-9


class QuadratureError(RuntimeError):
    """A radial integral failed to reach its tolerance."""


@dataclass(frozen=True)
class PropagatorValue:
    """Extrapolated value, spread between the last two extrapolants, raw regulated values."""

    value: complex
    systematic: float
    eps: tuple[float, ...]
    regulated: tuple[complex, ...]


def continued_mode_correlation(n, dt: float, nu: complex, params: PhysicalParams) -> complex:
    """``E_nu(phi_k(t) phi_-k(t + dt)) = 2 exp(-4 nu E_k |dt|/hbar^2) hbar^2 / (4 E_k)``."""
    energy = mode_energy(n, params)
    rate = 4.0 * complex(nu) * energy / params.hbar**2
    return 2.0 * cmath.exp(-rate * abs(dt)) * params.hbar**2 / (4.0 * energy)


def continued_modesum(p1, p2, modes: ModeSet, nu: complex) -> complex:
    """Finite-volume two-point function at complex ``nu``."""
    d = _as_point(p1) - _as_point(p2)
    c = 2.0 * complex(nu) / modes.params.hbar
    phase = modes.wavevectors @ np.asarray(d.x)
    weight = np.where(np.any(modes.canonical_array != 0, axis=1), 2.0, 1.0)
    terms = weight * np.cos(phase) * np.exp(-c * modes.omegas * abs(d.t)) / (2.0 * modes.omegas)
    return complex(np.sum(terms)) / modes.params.L**3


# ---------------------------------------------------------------------------
# radial integrals along rotated rays


def _ray_angle(w: complex) -> float:
    # steepest descent of exp(k w) is along arg k = -arg(-w); rays stay clear of the
    # branch cuts of omega on the imaginary axis
    if w == 0:
        return 0.0
    return float(np.clip(-cmath.phase(-w), -_MAX_RAY_ANGLE, _MAX_RAY_ANGLE))


def _ray_integral(f, theta: float, scale: float, tol: float) -> complex:
    e = cmath.exp(1j * theta)

    def g(s):
        return f(s * e) * e

    opts = dict(epsabs=tol * scale, epsrel=0.0, limit=500, full_output=1)
    re = integrate.quad(lambda s: g(s).real, 0.0, np.inf, **opts)
    im = integrate.quad(lambda s: g(s).imag, 0.0, np.inf, **opts)
    for part in (re, im):
        if len(part) > 3 and part[1] > 10 * tol * scale:
            raise QuadratureError(
                f"ray integral at angle {theta:.3f} did not converge: estimate {part[0]:.6g}, "
                f"error {part[1]:.3g}; {part[3]}"
            )
    return complex(re[0], im[0])


def _safe_exp(z: complex) -> complex:
    return 0j if z.real < -745.0 else cmath.exp(z)


def _radial_two_point(R: float, T: float, c: complex, mu: float, eps: float, tol: float = 1e-13) -> complex:
    """``(1/(2 pi^2 R)) int_0^inf k sin(kR) exp(-c omega T - eps k) / (2 omega) dk``."""
    def omega(k):
        return cmath.sqrt(k * k + mu * mu)

    decay = c * T + eps
    # natural size of the result; sets the absolute tolerance
    scale = 1.0 / (R * R + abs(decay) ** 2)
    if R < 0.5 * abs(decay):
        # sin(kR)/R kept whole: its growth off the real axis is beaten by the decay
        theta = _ray_angle(-decay)
        if abs(R) > 0:
            def f(k):
                e = -omega(k) * c * T - eps * k
                return k * (_safe_exp(1j * k * R + e) - _safe_exp(-1j * k * R + e)) / (2j * R * 2.0 * omega(k))
        else:
            def f(k):
                return k * k * _safe_exp(-omega(k) * c * T - eps * k) / (2.0 * omega(k))
        return _ray_integral(f, theta, scale, tol) / (2.0 * math.pi**2)
    total = 0j
    for sign in (1.0, -1.0):
        w = sign * 1j * R - decay
        theta = _ray_angle(w)

        def f(k, sign=sign):
            return k * _safe_exp(sign * 1j * k * R - omega(k) * c * T - eps * k) / (2.0 * omega(k))

        total += sign * _ray_integral(f, theta, scale * R, tol)
    return total / (2j) / (2.0 * math.pi**2 * R)


def _extrapolate(eps: Sequence[float], values: Sequence[complex]) -> complex:
    # Neville's scheme for the interpolating polynomial evaluated at eps = 0
    p = list(values)
    n = len(eps)
    for j in range(1, n):
        for i in range(n - j):
            p[i] = (eps[i] * p[i + 1] - eps[i + j] * p[i]) / (eps[i] - eps[i + j])
    return p[0]


def continued_two_point(dp, nu: complex, params: PhysicalParams,
                        eps_schedule: Sequence[float] | None = DEFAULT_EPS_SCHEDULE) -> PropagatorValue:
    """Infinite-volume two-point function at complex diffusion ``nu`` (``Re nu >= 0``).

    ``eps_schedule=None`` (or empty) integrates the unregulated integrand directly.
    Values at ``Im nu < 0`` are computed as conjugates of the mirrored point, so the
    two signs are exact conjugates of one another.
    """
    d = _as_point(dp)
    R, T = d.spatial_norm, abs(d.t)
    c = 2.0 * complex(nu) / params.hbar
    if c.real < 0:
        raise ValueError("continuation requires Re(nu) >= 0; the mode factors grow otherwise")
    if R == 0.0 and T == 0.0:
        raise CoincidentPointError("two-point function diverges at zero separation")
    if c.real == 0.0 and c.imag != 0.0 and abs(R - abs(c.imag) * T) <= _LIGHTCONE_RTOL * max(R, T):
        raise CoincidentPointError("separation lies on the light cone, where the propagator is singular")
    if c.imag < 0:
        res = continued_two_point(dp, complex(nu).conjugate(), params, eps_schedule)
        return PropagatorValue(res.value.conjugate(), res.systematic, res.eps,
                               tuple(v.conjugate() for v in res.regulated))
    mu = params.mu
    if not eps_schedule:
        return PropagatorValue(_radial_two_point(R, T, c, mu, 0.0), 0.0, (), ())
    eps = tuple(float(e) for e in eps_schedule)
    values = tuple(_radial_two_point(R, T, c, mu, e) for e in eps)
    best = _extrapolate(eps, values)
    spread = abs(best - _extrapolate(eps[:-1], values[:-1])) if len(eps) > 1 else math.inf
    return PropagatorValue(best, spread, eps, values)


def feynman_propagator(dp, params: PhysicalParams, sign: int = +1,
                       eps_schedule: Sequence[float] | None = DEFAULT_EPS_SCHEDULE) -> complex:
    """Time-ordered two-point function, the Markov expectation at ``nu = +i hbar/2``.

    ``sign=-1`` gives the anti-time-ordered function at ``nu = -i hbar/2``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    nu = sign * 0.5j * params.hbar
    return continued_two_point(dp, nu, params, eps_schedule).value


def npoint_continued(points, params: PhysicalParams, sign: int = +1,
                     eps_schedule: Sequence[float] | None = DEFAULT_EPS_SCHEDULE) -> complex:
    """Wick sum of propagators: (anti-)time-ordered N-point function."""
    pts = [_as_point(p) for p in points]
    _check_distinct(pts)
    if len(pts) % 2:
        return 0j
    return complex(isserlis(lambda i, j: feynman_propagator(pts[i] - pts[j], params, sign, eps_schedule),
                            len(pts)))


# ---------------------------------------------------------------------------
# Lorentz invariance


def boost(dp, beta: float, axis: int = 0) -> SpacetimePoint:
    """Lorentz boost with velocity ``beta`` along spatial ``axis``."""
    if not -1.0 < beta < 1.0:
        raise ValueError("|beta| must be below 1")
    d = _as_point(dp)
    gamma = 1.0 / math.sqrt(1.0 - beta * beta)
    x = list(d.x)
    xa = gamma * (x[axis] - beta * d.t)
    t = gamma * (d.t - beta * x[axis])
    x[axis] = xa
    return SpacetimePoint(tuple(x), t)


def _pair(x, t, beta, axis=0):
    p = SpacetimePoint(x, t)
    return p, boost(p, beta, axis)


#: Five spacelike and five timelike separations with their boosted partners.
STANDARD_BOOST_PAIRS: tuple[tuple[SpacetimePoint, SpacetimePoint], ...] = (
    _pair((1.0, 0.0, 0.0), 0.0, -0.6),  # -> x = 1.25, t = 0.75
    _pair((0.8, 0.0, 0.0), 0.0, 0.3),
    _pair((0.5, 0.5, 0.0), 0.2, 0.5),
    _pair((1.5, 0.0, 0.0), 0.5, -0.4),
    _pair((0.0, 2.0, 0.0), 1.0, 0.2, 1),
    _pair((0.0, 0.0, 0.0), 1.0, 0.6),
    _pair((0.0, 0.0, 0.0), 0.7, -0.4),
    _pair((0.3, 0.0, 0.0), 1.2, -0.5),
    _pair((0.2, 0.3, 0.0), 1.5, 0.3),
    _pair((0.0, 0.0, 0.5), 2.0, 0.45, 2),
)


@dataclass(frozen=True)
class BoostCheck:
    first: SpacetimePoint
    second: SpacetimePoint
    value_first: complex
    value_second: complex
    residual: float

    @property
    def interval(self) -> float:
        """Minkowski interval ``dt^2 - |dx|^2`` of the first separation."""
        return self.first.t**2 - self.first.spatial_norm**2


def lorentz_invariance_check(pairs, params: PhysicalParams,
                             eps_schedule: Sequence[float] | None = DEFAULT_EPS_SCHEDULE) -> list[BoostCheck]:
    """Relative difference of the propagator between separations of equal interval."""
    out = []
    for a, b in pairs:
        a, b = _as_point(a), _as_point(b)
        ia = a.t**2 - a.spatial_norm**2
        ib = b.t**2 - b.spatial_norm**2
        if abs(ia - ib) > 1e-9 * max(1.0, abs(ia)):
            raise ValueError(f"separations {a} and {b} have different intervals ({ia} vs {ib})")
        fa = feynman_propagator(a, params, eps_schedule=eps_schedule)
        fb = fa if a == b else feynman_propagator(b, params, eps_schedule=eps_schedule)
        out.append(BoostCheck(a, b, fa, fb, abs(fa - fb) / abs(fa)))
    return out
