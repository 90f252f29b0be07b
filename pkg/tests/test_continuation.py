import cmath
import math

import numpy as np
import pytest
from scipy.signal import fftconvolve
from scipy.special import kv

from gfn.analytic import CoincidentPointError, SpacetimePoint, schwinger2_continuum, schwinger2_modesum
from gfn.continuation import (
    DEFAULT_EPS_SCHEDULE, STANDARD_BOOST_PAIRS, QuadratureError, boost, continued_mode_correlation,
    continued_modesum, continued_two_point, feynman_propagator, lorentz_invariance_check, npoint_continued,
)
from gfn.lattice import PhysicalParams, build_mode_set

# time-ordered value at dx = 0, dt = 1, m = 1 (30-digit mpmath Hankel evaluation)
TIMELIKE_UNIT = -0.0310834705291766127714879590775 + 0.0175090564829475256509193629687j


def P(x, t=0.0):
    return SpacetimePoint(x, t)


def kv_reference(R, T, c, mu=1.0):
    """Closed form at complex Euclidean distance sqrt(R^2 + (c T)^2)."""
    z = cmath.sqrt(R * R + (c * T) ** 2)
    return mu * kv(1, mu * z) / (4 * math.pi**2 * z)


def r3_counts(M):
    nmax = int(math.isqrt(M))
    sq = np.zeros(M + 1)
    a = np.arange(-nmax, nmax + 1)
    np.add.at(sq, a * a, 1)
    c2 = np.rint(fftconvolve(sq, sq)[:M + 1])
    return np.rint(fftconvolve(c2, sq)[:M + 1])


def shell_modesum(L, delta, T, mu=1.0):
    """Gaussian-damped box sum at dx = 0 and nu = i/2, grouped by |n|^2 shells."""
    ku = 2 * math.pi / L
    M = int(40 / delta / ku**2) + 1
    counts = r3_counts(M)
    k = ku * np.sqrt(np.arange(M + 1))
    w = np.sqrt(k * k + mu * mu)
    return np.sum(counts * np.exp(-1j * w * T - delta * k * k) / (2 * w)) / L**3


def neville(h, v):
    p = list(v)
    for j in range(1, len(h)):
        for i in range(len(h) - j):
            p[i] = (h[i] * p[i + 1] - h[i + j] * p[i]) / (h[i] - h[i + j])
    return p[0]


class TestModeLevel:
    def test_equal_time_is_nu_independent(self, params):
        base = continued_mode_correlation((1, 0, 0), 0.0, 0.5, params)
        for nu in (0.5j, -0.5j, 2 + 3j, 0.0):
            assert continued_mode_correlation((1, 0, 0), 0.0, nu, params) == base
        assert base == pytest.approx(1 / math.sqrt(2), rel=1e-15)

    def test_pure_phase_on_imaginary_axis(self, params):
        for dt in (0.3, 1.0, 7.0):
            v = continued_mode_correlation((1, 1, 0), dt, 0.5j, params)
            assert abs(v) == pytest.approx(abs(continued_mode_correlation((1, 1, 0), 0.0, 0.5j, params)), rel=1e-14)
            assert cmath.phase(v) == pytest.approx(-math.remainder(math.sqrt(3) * dt, 2 * math.pi), abs=1e-12)

    def test_conjugation(self, params):
        for dt in (0.2, 1.4):
            a = continued_mode_correlation((0, 1, 0), dt, 0.5j, params)
            b = continued_mode_correlation((0, 1, 0), dt, -0.5j, params)
            assert a == pytest.approx(b.conjugate(), rel=1e-15)

    def test_matches_markov_on_real_axis(self, modes, params):
        p1, p2 = P((1, 0, 0), 0.7), P((0, 0, 0))
        assert continued_modesum(p1, p2, modes, 0.5) == pytest.approx(schwinger2_modesum(p1, p2, modes), rel=1e-14)


class TestTwoPoint:
    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_equal_time_equals_euclidean(self, params, r):
        exact = schwinger2_continuum(P((r, 0, 0)), params)
        for sign in (1, -1):
            v = feynman_propagator(P((r, 0, 0)), params, sign)
            assert abs(v - exact) / exact < 1e-6
            assert abs(v.imag) < 1e-6 * exact

    @pytest.mark.parametrize("R,T", [(0.0, 1.0), (0.3, 1.2), (0.0, 0.3), (1.0, 2.5), (2.0, 0.5), (0.5, 0.2), (0.0, 6.0)])
    def test_against_hankel_form(self, params, R, T):
        ref = kv_reference(R, T, 1j)
        v = feynman_propagator(P((R, 0, 0), T), params)
        assert abs(v - ref) / abs(ref) < 1e-6

    def test_unit_time_value(self, params):
        assert abs(feynman_propagator(P((0, 0, 0), 1.0), params) - TIMELIKE_UNIT) < 1e-9 * abs(TIMELIKE_UNIT)

    def test_against_box_sum(self, params):
        # independent oracle: damped finite-volume sum, damping removed by extrapolation
        deltas = [0.01 / 2**j for j in range(5)]
        sums = [shell_modesum(16.0, d, 1.0) for d in deltas]
        oracle = neville(deltas, sums)
        assert abs(oracle - TIMELIKE_UNIT) / abs(TIMELIKE_UNIT) < 1e-6
        assert abs(feynman_propagator(P((0, 0, 0), 1.0), params) - oracle) / abs(oracle) < 1e-6

    @pytest.mark.parametrize("theta", [0.0, 0.4, 0.9, 1.3, math.pi / 2])
    def test_arc_of_diffusion_constants(self, params, theta):
        nu = 0.5 * cmath.exp(1j * theta)
        for R, T in [(0.4, 1.0), (1.0, 0.5), (0.0, 1.7)]:
            ref = kv_reference(R, T, cmath.exp(1j * theta))
            v = continued_two_point(P((R, 0, 0), T), nu, params).value
            assert abs(v - ref) / abs(ref) < 1e-6

    def test_real_nu_matches_euclidean(self, params):
        dp = P((0.6, 0.2, 0), 0.8)
        v = continued_two_point(dp, 0.5, params).value
        assert v == pytest.approx(schwinger2_continuum(dp, params), rel=1e-9)

    def test_direct_and_regulated_agree(self, params):
        for dp in (P((1.0, 0, 0), 0.5), P((0.2, 0, 0), 1.5)):
            a = continued_two_point(dp, 0.5j, params, None)
            b = continued_two_point(dp, 0.5j, params)
            assert a.eps == () and a.systematic == 0.0
            assert b.eps == DEFAULT_EPS_SCHEDULE and len(b.regulated) == len(DEFAULT_EPS_SCHEDULE)
            assert abs(a.value - b.value) < 1e-7 * abs(a.value)
            assert b.systematic < 1e-6 * abs(b.value)

    def test_sign_conjugation(self, params):
        for dp in STANDARD_BOOST_PAIRS:
            a = feynman_propagator(dp[0], params, +1)
            b = feynman_propagator(dp[0], params, -1)
            assert b == a.conjugate()

    def test_time_reversal(self, params):
        dp = P((0.3, 0, 0), 1.1)
        assert feynman_propagator(dp, params) == feynman_propagator(P((0.3, 0, 0), -1.1), params)

    def test_rotation_invariance(self, params):
        a = feynman_propagator(P((0.6, 0.0, 0.0), 1.0), params)
        b = feynman_propagator(P((0.0, 0.36, 0.48), 1.0), params)
        assert abs(a - b) < 1e-12 * abs(a)

    def test_singular_points(self, params):
        with pytest.raises(CoincidentPointError):
            feynman_propagator(P((0, 0, 0)), params)
        with pytest.raises(CoincidentPointError):
            feynman_propagator(P((1.0, 0, 0), 1.0), params)
        with pytest.raises(CoincidentPointError):
            feynman_propagator(P((0.6, 0.8, 0), -1.0), params, -1)

    def test_input_guards(self, params):
        with pytest.raises(ValueError):
            continued_two_point(P((1, 0, 0), 1.0), -0.1 + 0.5j, params)
        with pytest.raises(ValueError):
            feynman_propagator(P((1, 0, 0), 1.0), params, sign=0)

    def test_quadrature_error_is_runtime_error(self):
        assert issubclass(QuadratureError, RuntimeError)


class TestLorentz:
    def test_boost_preserves_interval(self):
        p = P((0.3, -0.2, 0.5), 1.1)
        for axis in range(3):
            q = boost(p, 0.7, axis)
            assert q.t**2 - q.spatial_norm**2 == pytest.approx(p.t**2 - p.spatial_norm**2, rel=1e-13)
        assert boost(p, 0.0) == p
        with pytest.raises(ValueError):
            boost(p, 1.0)

    def test_boost_example(self):
        q = boost(P((1.0, 0, 0), 0.0), -0.6)
        assert q.x[0] == pytest.approx(1.25) and q.t == pytest.approx(0.75)

    def test_standard_pairs(self, params):
        checks = lorentz_invariance_check(STANDARD_BOOST_PAIRS, params)
        assert len(checks) == 10
        assert sum(c.interval < 0 for c in checks) == 5
        assert sum(c.interval > 0 for c in checks) == 5
        assert max(c.residual for c in checks) < 1e-6

    def test_identity_pair(self, params):
        p = P((0.5, 0, 0), 0.2)
        (c,) = lorentz_invariance_check([(p, p)], params)
        assert c.residual == 0.0

    def test_mismatched_interval(self, params):
        with pytest.raises(ValueError):
            lorentz_invariance_check([(P((1, 0, 0), 0.0), P((2, 0, 0), 0.0))], params)


class TestNPoint:
    def test_two_point(self, params):
        a, b = P((0.4, 0, 0), 0.9), P((0, 0, 0), 0.1)
        assert npoint_continued([a, b], params) == feynman_propagator(a - b, params)

    def test_equal_time_four_point(self, params):
        s = 1 / math.sqrt(2)
        pts = [P((s, 0, 0)), P((0, s, 0)), P((0, 0, s)), P((-s, 0, 0))]
        g = lambda i, j: schwinger2_continuum(pts[i] - pts[j], params)  # noqa: E731
        expected = g(0, 1) * g(2, 3) + g(0, 2) * g(1, 3) + g(0, 3) * g(1, 2)
        v = npoint_continued(pts, params)
        assert abs(v - expected) < 1e-5 * expected

    def test_conjugate_orderings(self, params):
        pts = [P((0, 0, 0), 0.0), P((0.3, 0, 0), 1.0), P((0, 0.2, 0), 2.0), P((0, 0, 0.7), 0.5)]
        assert npoint_continued(pts, params, -1) == pytest.approx(npoint_continued(pts, params, 1).conjugate(), rel=1e-14)

    def test_odd_and_coincident(self, params):
        assert npoint_continued([P((0, 0, 0)), P((1, 0, 0), 2.0), P((0, 1, 0))], params) == 0j
        with pytest.raises(CoincidentPointError):
            npoint_continued([P((0, 0, 0)), P((0, 0, 0))], params)


def test_finite_volume_heavy_mass_limit():
    # with one mode the continued sum is a single phase over the volume
    p = PhysicalParams(m=2.0, L=1.0, lambda_cut=1.0)
    ms = build_mode_set(p)
    v = continued_modesum(P((0, 0, 0), 1.5), P((0, 0, 0)), ms, 0.5j)
    assert v == pytest.approx(cmath.exp(-2j * 1.5) / 4.0, rel=1e-14)
