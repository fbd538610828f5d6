import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ncx2

from agvsched.numerics import (
    DomainError,
    QuadratureError,
    QuadratureSpec,
    TabulatedCurve,
    bessel_j0,
    marcum_q1,
    marcum_q1c,
    rayleigh_expect,
)

mp.mp.dps = 40


def marcum_oracle(a, b):
    """Q1 from its defining integral, evaluated in extended precision."""
    a = mp.mpf(a)
    b = mp.mpf(b)
    if b == 0:
        return mp.mpf(1)
    f = lambda x: x * mp.exp(-(x * x + a * a) / 2) * mp.besseli(0, a * x)
    pts = [b] + [b + w for w in (2, 5, 10, 20, 40) if b + w > b] + [mp.inf]
    return mp.quad(f, pts)


# --- Bessel J0 -------------------------------------------------------------

def test_j0_at_zero():
    assert bessel_j0(0.0) == 1.0


def test_j0_first_root():
    assert abs(bessel_j0(2.404825557695773)) < 1e-10


def test_j0_at_three():
    assert bessel_j0(3.0) == pytest.approx(-0.2600519549, abs=1e-9)


def test_j0_against_mpmath(kern):
    xs = np.concatenate([np.linspace(-50, 50, 801), [1e-8, 24.999, 25.0, 25.001, 49.99]])
    worst = max(abs(kern.bessel_j0(float(x)) - float(mp.besselj(0, x))) for x in xs)
    assert worst <= 1e-12


def test_j0_sign_alternates_across_roots():
    roots = [float(mp.besseljzero(0, k)) for k in range(1, 16)]
    mids = [0.5 * (a + b) for a, b in zip([0.0] + roots[:-1], roots)]
    signs = [math.copysign(1.0, bessel_j0(m)) for m in mids]
    assert all(s1 == -s0 for s0, s1 in zip(signs[:-1], signs[1:]))
    assert all(abs(bessel_j0(r)) < 1e-12 for r in roots)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_j0_rejects_non_finite(bad):
    with pytest.raises(DomainError):
        bessel_j0(bad)


# --- Marcum Q --------------------------------------------------------------

@pytest.mark.parametrize("a", [0.0, 0.3, 1.0, 7.5, 40.0, 300.0])
def test_marcum_b_zero(a):
    assert marcum_q1(a, 0.0) == 1.0


@pytest.mark.parametrize("b", [0.0, 0.1, 1.0, 3.0, 6.0, 7.4])
def test_marcum_a_zero(b):
    assert marcum_q1(0.0, b) == pytest.approx(math.exp(-b * b / 2), rel=1e-10, abs=0)


def test_marcum_one_two_matches_integral():
    assert marcum_q1(1.0, 2.0) == pytest.approx(float(marcum_oracle(1.0, 2.0)), abs=1e-8)


@pytest.mark.parametrize(
    "a,b",
    [(1.0, 2.0), (0.5, 0.2), (3.0, 3.0), (5.0, 9.0), (9.0, 5.0), (20.0, 21.0),
     (34.5, 37.5), (300.0, 299.0), (1000.0, 1000.5), (0.05, 0.07), (2.0, 8.0)],
)
def test_marcum_relative_accuracy(kern, a, b):
    q = marcum_oracle(a, b)
    got_q = kern.marcum_q1(a, b)
    got_c = kern.marcum_q1c(a, b)
    if q >= 1e-12:
        assert abs(got_q - float(q)) <= 1e-10 * float(q)
    if 1 - q >= 1e-12:
        assert abs(got_c - float(1 - q)) <= 1e-10 * float(1 - q)


def test_marcum_grid_against_ncx2():
    worst = 0.0
    for a in np.linspace(0, 30, 31):
        for b in np.linspace(0.25, 30, 31):
            ref = ncx2.sf(b * b, 2, a * a)
            if ref > 1e-12:
                worst = max(worst, abs(marcum_q1(a, b) - ref) / ref)
    assert worst < 1e-9  # scipy's own accuracy is the binding limit here


def test_marcum_complement_sums_to_one():
    for a, b in [(0.4, 1.2), (5.0, 5.0), (12.0, 9.0)]:
        assert marcum_q1(a, b) + marcum_q1c(a, b) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("a,b", [(-1.0, 1.0), (1.0, -0.1), (math.nan, 1.0), (1.0, math.inf)])
def test_marcum_domain(a, b):
    with pytest.raises(DomainError):
        marcum_q1(a, b)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0, 25), b=st.floats(0, 25),
    da=st.floats(0, 3), db=st.floats(0, 3),
)
def test_marcum_monotone(a, b, da, db):
    q = marcum_q1(a, b)
    assert 0.0 <= q <= 1.0
    assert marcum_q1(a + da, b) >= q - 1e-15
    assert marcum_q1(a, b + db) <= q + 1e-15


# --- Rayleigh expectation ---------------------------------------------------

def test_expect_constant_one():
    assert rayleigh_expect(lambda g: 1.0, 3.7) == pytest.approx(1.0, abs=1e-15)


def test_expect_step_at_zero():
    assert rayleigh_expect(lambda g: 1.0 if g < 0.0 else 0.0, 2.0) == 0.0


@pytest.mark.parametrize("ratio", [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0])
def test_expect_step_closed_form(ratio):
    gb = 4.2
    gt = ratio * gb
    v = rayleigh_expect(lambda g: 1.0 if g < gt else 0.0, gb)
    assert v == pytest.approx(-math.expm1(-ratio), abs=1e-6)


def test_expect_tabulated_step_closed_form(kern):
    # a steep two-point curve approximates a step at 10 dB
    c = kern.TabulatedCurve([10.0, 10.0 + 1e-9], [1.0, 1e-12])
    for gb_db in (0.0, 5.0, 10.0, 15.0, 30.0):
        gb = 10 ** (gb_db / 10)
        v, _err, ok = c.expect_rayleigh(gb)
        assert ok
        assert v == pytest.approx(-math.expm1(-10.0 / gb), abs=1e-6)


def test_expect_tabulated_matches_generic():
    c = TabulatedCurve([-2.0, 0.0, 3.0, 8.0, 15.0], [1.0, 0.3, 0.05, 1e-4, 1e-9])
    knots = [10 ** (s / 10) for s in c.snr_db]
    for gb in (0.3, 2.0, 20.0, 400.0):
        a = rayleigh_expect(c, gb)
        b = rayleigh_expect(lambda g: c.at(g), gb, breakpoints=knots)
        assert a == pytest.approx(b, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    vals=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8),
    gb=st.floats(1e-3, 1e5),
)
def test_expect_in_unit_interval(vals, gb):
    bl = sorted(vals, reverse=True)
    c = TabulatedCurve([float(i) * 2.5 - 5 for i in range(len(bl))], bl)
    v = rayleigh_expect(c, gb)
    assert 0.0 <= v <= 1.0
    assert min(c.at(0.0), c.at(1e30)) - 1e-12 <= v <= max(bl) + 1e-12 or v <= 1.0


def test_expect_reports_nonconvergence():
    spec = QuadratureSpec(relative_tolerance=1e-15, max_subdivisions=1)
    with pytest.raises(QuadratureError) as info:
        rayleigh_expect(lambda g: 1.0 if g < 1.234 else 0.0, 1.0, spec)
    assert 0.0 < info.value.estimate < 1.0


def test_expect_rejects_bad_gamma():
    with pytest.raises(DomainError):
        rayleigh_expect(lambda g: 1.0, 0.0)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(relative_tolerance=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(tail_truncation_factor=10.0)


def test_tabulated_curve_interpolation():
    c = TabulatedCurve([0.0, 10.0], [1e-1, 1e-3])
    assert c.at_db(-5.0) == pytest.approx(1e-1)
    assert c.at_db(0.0) == pytest.approx(1e-1)
    assert c.at_db(5.0) == pytest.approx(1e-2, rel=1e-12)
    assert c.at_db(99.0) == pytest.approx(1e-3)
    assert c.at(0.0) == pytest.approx(1e-1)
