"""Modified Bessel function of the second kind, order one."""

from __future__ import annotations

import math

import numpy as np

_EULER_GAMMA = 0.57721566490153286061


def _k1_series(x: float) -> float:
    # K1(x) = 1/x + ln(x/2) I1(x) - (x/4) sum_k [psi(k+1) + psi(k+2)] q^k / (k! (k+1)!),  q = x^2/4
    q = 0.25 * x * x
    term = 1.0  # q^k / (k! (k+1)!)
    i1_sum = 0.0
    psi_sum = 0.0
    psi_k1 = -_EULER_GAMMA  # psi(k+1)
    k = 0
    while True:
        psi_k2 = psi_k1 + 1.0 / (k + 1)
        i1_sum += term
        psi_sum += (psi_k1 + psi_k2) * term
        if term < 1e-18 * i1_sum:
            break
        k += 1
        psi_k1 = psi_k2
        term *= q / (k * (k + 1))
    i1 = 0.5 * x * i1_sum
    return 1.0 / x + math.log(0.5 * x) * i1 - 0.25 * x * psi_sum


def _k1e_trapezoid(x: float) -> float:
    # exp(x) K1(x) = int_0^inf exp(-x (cosh t - 1)) cosh t dt; the integrand is entire and
    # doubly-exponentially decaying, so the trapezoid rule converges geometrically in 1/h.
    # Peak width shrinks like 1/sqrt(x).
    h = min(0.125, 0.5 / math.sqrt(x))
    total = 0.5
    j = 1
    while True:
        t = j * h
        s = math.sinh(0.5 * t)
        term = math.exp(-2.0 * x * s * s) * math.cosh(t)
        total += term
        if term < 1e-18 * total:
            break
        j += 1
    return h * total


def k1e(x: float) -> float:
    """Exponentially scaled ``exp(x) * K1(x)`` for ``x > 0``."""
    if not 0 < x < math.inf:
        raise ValueError(f"K1 requires finite x > 0, got {x!r}")
    if x <= 2.0:
        return math.exp(x) * _k1_series(x)
    return _k1e_trapezoid(x)


def k1(x):
    """``K1(x)`` for positive ``x``; relative error below 1e-12 in double precision.

    Accepts a scalar or an array.
    """
    if np.ndim(x) == 0:
        x = float(x)
        if not 0 < x < math.inf:
            raise ValueError(f"K1 requires finite x > 0, got {x!r}")
        if x <= 2.0:
            return _k1_series(x)
        return math.exp(-x) * _k1e_trapezoid(x)
    return np.vectorize(k1, otypes=[float])(x)
