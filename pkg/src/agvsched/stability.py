"""Back-to-back error probability, probability of instability, and the
dynamic error-probability threshold.

For a Rayleigh link whose unit-mean power gains at consecutive ticks have
correlation ``rho**2``, an outage threshold ``t = -ln(1 - p)`` gives
marginal error probability ``p``. The conditional probability of an error
following an error is::

    P_bb = 1 - ((1 - p) / p) * [Q1(theta, rho*theta) - Q1(rho*theta, theta)]
    theta = sqrt(-2 ln(1 - p) / (1 - rho**2))

which reduces to ``p`` for independent ticks. The same quantity equals the
joint outage probability divided by ``p``; for small scaled thresholds the
joint probability is summed from a positive series instead, because the
bracket above then cancels to within rounding.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._backend import kernels
from .numerics import DomainError, clamp_probability

__all__ = [
    "PBB_FORMS",
    "P_MIN",
    "P_MAX",
    "StabilityParams",
    "p_back_to_back",
    "p_instability",
    "solve_pe_threshold",
    "threshold_table",
]

PBB_FORMS = ("corrected", "as_printed")
P_MIN = 1e-12
P_MAX = 1.0 - 1e-12
_REL_WIDTH = 1e-6
_PROBE_POINTS = 64


@dataclass(frozen=True)
class StabilityParams:
    """Stability constraint of the control loop.

    Attributes
    ----------
    n_max : int
        Consecutive losses the loop survives; the AGV is unstable at
        ``delta >= n_max``.
    instability_bound : float
        Ceiling on the probability of instability.
    correlation : float
        Lag-one fading correlation ``rho``.
    pbb_form : str
        ``"corrected"`` or ``"as_printed"`` (the bracket without the
        leading ``1 -``, which gives ``1 - p`` at ``rho = 0``).
    """

    n_max: int = 10
    instability_bound: float = 1e-9
    correlation: float = 0.0
    pbb_form: str = "corrected"

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        if not 0.0 < self.instability_bound < 1.0:
            raise ValueError(f"instability_bound must lie in (0, 1), got {self.instability_bound!r}")
        if not 0.0 <= self.correlation < 1.0:
            raise ValueError(f"correlation must lie in [0, 1), got {self.correlation!r}")
        if self.pbb_form not in PBB_FORMS:
            raise ValueError(f"pbb_form must be one of {PBB_FORMS}, got {self.pbb_form!r}")


def _check_p(p):
    p = float(p)
    if not (math.isfinite(p) and 0.0 <= p <= 1.0):
        raise DomainError(f"error probability must lie in [0, 1], got {p!r}")
    return p


def _check_rho(rho):
    rho = float(rho)
    if not (math.isfinite(rho) and 0.0 <= rho < 1.0):
        raise DomainError(f"correlation must lie in [0, 1), got {rho!r}")
    return rho


def _marcum_bracket(theta, rho):
    # Q1(theta, rho*theta) - Q1(rho*theta, theta) via the complements, which
    # are the small quantities here.
    return kernels.marcum_q1c(rho * theta, theta) - kernels.marcum_q1c(theta, rho * theta)


def p_back_to_back(expected_pe, rho, form="corrected"):
    """Probability of an error at tick k given an error at tick k-1.

    Parameters
    ----------
    expected_pe : float
        Marginal (fading-averaged) error probability ``p``.
    rho : float
        Lag-one fading correlation in [0, 1).
    form : {"corrected", "as_printed"}

    Returns
    -------
    float
        In [0, 1]; 0 for ``p = 0`` and 1 for ``p = 1``.
    """
    p = _check_p(expected_pe)
    rho = _check_rho(rho)
    if form not in PBB_FORMS:
        raise ValueError(f"form must be one of {PBB_FORMS}, got {form!r}")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    r2 = rho * rho
    x = -math.log1p(-p) / (1.0 - r2)
    if form == "corrected" and x <= kernels.KIBBLE_MAX_X:
        return clamp_probability(kernels.kibble_joint_cdf(x, r2) / p)
    ratio = (1.0 - p) / p * _marcum_bracket(math.sqrt(2.0 * x), rho)
    return clamp_probability(1.0 - ratio if form == "corrected" else ratio)


def p_instability(expected_pe, rho, n_max, delta, form="corrected"):
    """Probability that the next ``n_max - delta`` transmissions all fail.

    ``P_bb ** (n_max - delta - 1) * p``.

    Raises
    ------
    DomainError
        If ``delta >= n_max`` (already unstable) or ``delta < 0``.
    """
    if not 0 <= delta < n_max:
        raise DomainError(f"delta must satisfy 0 <= delta < n_max={n_max}, got {delta!r}")
    p = _check_p(expected_pe)
    k = n_max - delta - 1
    if p == 0.0:
        return 0.0
    if k == 0:
        return p
    return clamp_probability(p_back_to_back(p, rho, form) ** k * p)


@lru_cache(maxsize=4096)
def solve_pe_threshold(rho, n_max, delta, bound, form="corrected"):
    """Largest ``p`` with ``p_instability(p, rho, n_max, delta) <= bound``.

    Bisection in ``log p`` over ``[1e-12, 1 - 1e-12]`` to a relative width of
    1e-6, returning the feasible end. A 64-point log grid is probed first;
    if ``P_us`` is not monotone on it the largest feasible grid point is
    returned instead. Returns 1e-12 when nothing is feasible.
    """
    if not 0 <= delta < n_max:
        raise DomainError(f"delta must satisfy 0 <= delta < n_max={n_max}, got {delta!r}")
    if not 0.0 < bound:
        raise DomainError(f"bound must be > 0, got {bound!r}")

    def pus(p):
        return p_instability(p, rho, n_max, delta, form)

    if n_max - delta - 1 == 0:
        return min(max(bound, P_MIN), P_MAX)
    if pus(P_MAX) <= bound:
        return P_MAX
    if pus(P_MIN) > bound:
        return P_MIN
    grid = np.geomspace(P_MIN, P_MAX, _PROBE_POINTS)
    vals = [pus(float(g)) for g in grid]
    if any(b < a for a, b in zip(vals[:-1], vals[1:])):
        feasible = [float(g) for g, v in zip(grid, vals) if v <= bound]
        p_star = feasible[-1] if feasible else P_MIN
    else:
        # bracket from the probe grid, then bisect in log p
        i = next(i for i, v in enumerate(vals) if v > bound)
        lo = math.log(grid[i - 1])
        hi = math.log(grid[i])
        while hi - lo > _REL_WIDTH:
            mid = 0.5 * (lo + hi)
            if pus(math.exp(mid)) <= bound:
                lo = mid
            else:
                hi = mid
        p_star = math.exp(lo)
    if pus(p_star) > bound:
        raise ArithmeticError(f"threshold {p_star!r} violates bound {bound!r}")
    return p_star


def threshold_table(params):
    """``p*(delta)`` for ``delta = 0 .. n_max - 1``."""
    return tuple(
        solve_pe_threshold(params.correlation, params.n_max, d, params.instability_bound, params.pbb_form)
        for d in range(params.n_max)
    )
