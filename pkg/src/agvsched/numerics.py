"""Special functions and Rayleigh-fading expectations.

Thin validated wrappers over the kernel backend chosen in ``_backend``:
Bessel J0, first-order Marcum Q, and the expectation of a BLER curve over
the exponential SNR density of a Rayleigh channel.
"""

import math
from dataclasses import dataclass

from ._backend import kernels

__all__ = [
    "DomainError",
    "QuadratureError",
    "QuadratureSpec",
    "TabulatedCurve",
    "bessel_j0",
    "marcum_q1",
    "marcum_q1c",
    "rayleigh_expect",
    "clamp_probability",
]

TabulatedCurve = kernels.TabulatedCurve


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach its tolerance.

    Attributes
    ----------
    estimate : float
        Best value reached before the subdivision budget ran out.
    error : float
        Error estimate attached to ``estimate``.
    """

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for :func:`rayleigh_expect`.

    Parameters
    ----------
    relative_tolerance : float
        Target relative accuracy of the expectation.
    max_subdivisions : int
        Bisection budget of the adaptive Gauss-Kronrod scheme.
    tail_truncation_factor : float
        Integration stops at ``tail_truncation_factor * gamma_b``; the
        neglected mass is at most ``exp(-tail_truncation_factor)``.
    """

    relative_tolerance: float = 1e-10
    max_subdivisions: int = 400
    tail_truncation_factor: float = 40.0

    def __post_init__(self):
        if not self.relative_tolerance > 0.0:
            raise ValueError("relative_tolerance must be > 0")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if not self.tail_truncation_factor >= 20.0:
            raise ValueError("tail_truncation_factor must be >= 20")


DEFAULT_QUADRATURE = QuadratureSpec()


def clamp_probability(p):
    return 0.0 if p < 0.0 else (1.0 if p > 1.0 else p)


def _check_finite(name, x):
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")


def bessel_j0(x):
    """Bessel function of the first kind of order zero.

    Parameters
    ----------
    x : float
        Real, finite argument.

    Returns
    -------
    float
        J0(x), absolute error below 1e-12 for ``|x| <= 50``.
    """
    x = float(x)
    _check_finite("x", x)
    return kernels.bessel_j0(x)


def _check_marcum(a, b):
    a = float(a)
    b = float(b)
    _check_finite("a", a)
    _check_finite("b", b)
    if a < 0.0 or b < 0.0:
        raise DomainError(f"Marcum Q needs a, b >= 0, got a={a!r}, b={b!r}")
    return a, b


def marcum_q1(a, b):
    """First-order Marcum Q function.

    Evaluated as ``P(U >= V)`` for independent Poisson variables with means
    ``a**2/2`` and ``b**2/2``, summing only positive terms. The smaller of
    Q and its complement is summed directly so both keep full relative
    precision.

    Parameters
    ----------
    a, b : float
        Non-negative, finite.

    Returns
    -------
    float
        Q1(a, b) in [0, 1].
    """
    a, b = _check_marcum(a, b)
    return kernels.marcum_q1(a, b)


def marcum_q1c(a, b):
    """Complement ``1 - Q1(a, b)``, accurate when small."""
    a, b = _check_marcum(a, b)
    return kernels.marcum_q1c(a, b)


def rayleigh_expect(curve, gamma_b, spec=DEFAULT_QUADRATURE, breakpoints=()):
    """Expectation of ``curve(gamma)`` for ``gamma ~ Exp(mean=gamma_b)``.

    Parameters
    ----------
    curve : callable or TabulatedCurve
        Maps linear SNR to a probability. Tabulated curves go through the
        kernel integrator, which splits at the sample points; any other
        callable is integrated by the generic adaptive scheme.
    gamma_b : float
        Mean linear SNR, > 0.
    spec : QuadratureSpec
    breakpoints : sequence of float, optional
        Linear-SNR locations of kinks or jumps in a generic ``curve``.

    Returns
    -------
    float
        The expectation, clamped to [0, 1].

    Raises
    ------
    QuadratureError
        If the tolerance is not met within ``spec.max_subdivisions``.
    """
    gamma_b = float(gamma_b)
    if not (math.isfinite(gamma_b) and gamma_b > 0.0):
        raise DomainError(f"gamma_b must be finite and > 0, got {gamma_b!r}")
    tail = spec.tail_truncation_factor
    if hasattr(curve, "expect_rayleigh"):
        value, err, ok = curve.expect_rayleigh(
            gamma_b, spec.relative_tolerance, spec.max_subdivisions, tail
        )
    else:
        # Integrate in t = gamma / gamma_b with a few geometric seed panels.
        cuts = {0.0, tail}
        cuts.update(c for c in (0.5, 1.0, 2.0, 4.0, 8.0, 16.0) if c < tail)
        cuts.update(
            float(g) / gamma_b for g in breakpoints if 0.0 < float(g) / gamma_b < tail
        )
        edges = sorted(cuts)

        def f(t):
            return curve(gamma_b * t) * math.exp(-t)

        tail_mass = clamp_probability(curve(gamma_b * tail)) * math.exp(-tail)
        value, err, ok = kernels.adaptive_gk(
            f,
            edges,
            spec.relative_tolerance,
            spec.max_subdivisions,
            spec.relative_tolerance * tail_mass + 1e-300,
        )
        value += tail_mass
    if not ok:
        raise QuadratureError(
            f"rayleigh_expect: tolerance {spec.relative_tolerance:g} not met "
            f"in {spec.max_subdivisions} subdivisions",
            clamp_probability(value),
            err,
        )
    return clamp_probability(value)
