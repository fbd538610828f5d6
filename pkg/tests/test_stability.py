import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import ncx2

from agvsched import _backend
from agvsched.numerics import DomainError
from agvsched.stability import (
    StabilityParams,
    p_back_to_back,
    p_instability,
    solve_pe_threshold,
    threshold_table,
)

RHO = 0.9890486952237258


def pbb_oracle(p, rho):
    """Joint outage over p by conditioning on the first power sample."""
    r2 = rho * rho
    t = -math.log1p(-p)
    s = 2.0 / (1.0 - r2)
    cond = lambda x: ncx2.cdf(s * t, 2, s * r2 * x) * math.exp(-x)
    joint, _ = integrate.quad(cond, 0.0, t, epsabs=0, epsrel=1e-12, limit=200)
    return joint / p


@pytest.mark.parametrize("p", [1e-4, 1e-3, 0.01, 0.05, 0.1, 0.3, 0.6, 0.9])
@pytest.mark.parametrize("rho", [0.3, 0.5, 0.9, RHO])
def test_pbb_against_quadrature(p, rho):
    assert p_back_to_back(p, rho) == pytest.approx(pbb_oracle(p, rho), rel=1e-7)


@pytest.mark.parametrize("p", [1e-4, 1e-3, 0.01, 0.1, 0.5, 0.9])
def test_pbb_independent_is_p(p):
    assert p_back_to_back(p, 0.0) == pytest.approx(p, abs=1e-12)


def test_as_printed_form_is_complement_at_zero_correlation():
    assert p_back_to_back(0.3, 0.0, "as_printed") == pytest.approx(0.7, abs=1e-12)


def test_kibble_and_marcum_routes_agree():
    k = _backend.kernels
    for p in (0.05, 0.1, 0.2):
        for rho in (0.5, 0.9):
            r2 = rho * rho
            x = -math.log1p(-p) / (1 - r2)
            assert x <= k.KIBBLE_MAX_X
            th = math.sqrt(2 * x)
            bracket = k.marcum_q1c(rho * th, th) - k.marcum_q1c(th, rho * th)
            via_marcum = 1 - (1 - p) / p * bracket
            assert k.kibble_joint_cdf(x, r2) / p == pytest.approx(via_marcum, rel=1e-9)


def test_pbb_endpoints():
    assert p_back_to_back(0.0, 0.5) == 0.0
    assert p_back_to_back(1.0, 0.5) == 1.0


@settings(max_examples=100, deadline=None)
@given(p=st.floats(1e-6, 0.99), rho=st.floats(0.0, 0.995))
def test_pbb_bounds(p, rho):
    v = p_back_to_back(p, rho)
    assert p - 1e-9 <= v <= 1.0


@settings(max_examples=60, deadline=None)
@given(p=st.floats(1e-5, 0.9), rho=st.floats(0.0, 0.99), d=st.floats(0.001, 0.009))
def test_pbb_increases_with_correlation(p, rho, d):
    assert p_back_to_back(p, min(rho + d, 0.999)) >= p_back_to_back(p, rho) - 1e-12


@pytest.mark.parametrize("bad", [-0.1, 1.1, math.nan])
def test_pbb_domain(bad):
    with pytest.raises(DomainError):
        p_back_to_back(bad, 0.5)
    with pytest.raises(DomainError):
        p_back_to_back(0.5, bad if not 0 <= bad < 1 else 1.0)


def test_pbb_bad_form():
    with pytest.raises(ValueError):
        p_back_to_back(0.1, 0.5, "other")


def test_p_instability_formula():
    p, rho = 0.05, 0.9
    pbb = p_back_to_back(p, rho)
    for delta in range(10):
        assert p_instability(p, rho, 10, delta) == pytest.approx(pbb ** (9 - delta) * p, rel=1e-13)
    assert p_instability(p, rho, 10, 9) == p


@pytest.mark.parametrize("delta", [-1, 10, 11])
def test_p_instability_domain(delta):
    with pytest.raises(DomainError):
        p_instability(0.1, 0.5, 10, delta)


def test_threshold_independent_closed_form():
    # p**10 <= 1e-9 gives 10**-0.9
    assert solve_pe_threshold(0.0, 10, 0, 1e-9) == pytest.approx(10 ** -0.9, abs=1e-6)


@pytest.mark.parametrize("delta", range(9))
def test_threshold_independent_all_deltas(delta):
    want = 1e-9 ** (1.0 / (10 - delta))
    assert solve_pe_threshold(0.0, 10, delta, 1e-9) == pytest.approx(want, rel=2e-6)


def test_threshold_last_delta_is_bound():
    assert solve_pe_threshold(RHO, 10, 9, 1e-9) == 1e-9


def test_threshold_table_correlated():
    tab = threshold_table(StabilityParams(correlation=RHO))
    assert len(tab) == 10
    assert all(b <= a for a, b in zip(tab[:-1], tab[1:]))
    assert tab[-1] == 1e-9
    for d, p in enumerate(tab[:-1]):
        assert p_instability(p, RHO, 10, d) <= 1e-9
        assert p_instability(p * (1 + 1e-5), RHO, 10, d) > 1e-9


def test_threshold_feasibility_extremes():
    assert solve_pe_threshold(0.0, 10, 0, 0.9999) > 0.99
    assert solve_pe_threshold(0.0, 2, 0, 1e-30) == 1e-12


def test_threshold_domain():
    with pytest.raises(DomainError):
        solve_pe_threshold(0.5, 10, 10, 1e-9)
    with pytest.raises(DomainError):
        solve_pe_threshold(0.5, 10, 0, 0.0)


def test_params_validation():
    for kw in (dict(n_max=0), dict(n_max=2.5), dict(instability_bound=1.0),
               dict(correlation=1.0), dict(pbb_form="x")):
        with pytest.raises(ValueError):
            StabilityParams(**kw)


def test_pbb_small_p_relative_accuracy():
    # small x: the positive series keeps full relative precision
    for p in (1e-8, 1e-6):
        assert p_back_to_back(p, RHO) == pytest.approx(pbb_oracle(p, RHO), rel=1e-6)
        assert np.isfinite(p_back_to_back(p, RHO))
