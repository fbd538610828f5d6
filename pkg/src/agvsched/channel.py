"""Path loss and time-correlated Rayleigh fading.

The fading gain follows a first-order autoregressive complex-Gaussian
process ``h[k] = rho*h[k-1] + sqrt(1 - rho**2)*w[k]`` whose lag-one
correlation ``rho = J0(2*pi*f_d*T_s)`` is the Clarke/Jakes value. Its
marginal is unit-variance circular Gaussian, so ``|h|**2`` is Exp(1).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .numerics import bessel_j0

__all__ = [
    "SPEED_OF_LIGHT",
    "RHO_MAX",
    "RadioConfig",
    "FadingState",
    "free_space_loss_db",
    "noise_power_dbm",
    "mean_snr",
    "mean_snr_flagged",
    "fading_correlation",
    "init_fading",
    "advance_fading",
    "gain_trajectory",
    "draw_complex_normal",
]

SPEED_OF_LIGHT = 299_792_458.0
RHO_MAX = 1.0 - 1e-9

_DEFAULT_WAVELENGTH = SPEED_OF_LIGHT / 2.0e9


@dataclass(frozen=True)
class RadioConfig:
    """Downlink radio budget.

    Defaults: 20 dBm transmit power, 2 GHz carrier, 1.4 MHz bandwidth,
    log-distance path loss with exponent 3 beyond a 100 m free-space
    reference, -174 dBm/Hz thermal noise with a 7 dB noise figure, and a
    Doppler shift for 1 m/s at the carrier.
    """

    tx_power: float = 20.0
    carrier_wavelength: float = _DEFAULT_WAVELENGTH
    reference_distance: float = 100.0
    pathloss_exponent: float = 3.0
    bandwidth: float = 1.4e6
    noise_density: float = -174.0
    noise_figure: float = 7.0
    doppler_hz: float = 1.0 / _DEFAULT_WAVELENGTH
    sample_time: float = 0.005

    def validate(self):
        """Return a list of ``(field, message)`` problems; empty when valid."""
        bad = []
        for name in ("carrier_wavelength", "reference_distance", "bandwidth", "sample_time"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                bad.append((name, f"must be finite and > 0, got {v!r}"))
        if not (math.isfinite(self.doppler_hz) and self.doppler_hz >= 0.0):
            bad.append(("doppler_hz", f"must be finite and >= 0, got {self.doppler_hz!r}"))
        if not (2.0 <= self.pathloss_exponent <= 6.0):
            bad.append(("pathloss_exponent", f"must lie in [2, 6], got {self.pathloss_exponent!r}"))
        for name in ("tx_power", "noise_density", "noise_figure"):
            v = getattr(self, name)
            if not math.isfinite(v):
                bad.append((name, f"must be finite, got {v!r}"))
        return bad

    def __post_init__(self):
        bad = self.validate()
        if bad:
            raise ValueError("; ".join(f"{k}: {m}" for k, m in bad))


@dataclass(frozen=True)
class FadingState:
    """Channel state of one AGV at one tick."""

    complex_gain: complex
    mean_snr_linear: float
    inst_snr_linear: float

    @classmethod
    def from_gain(cls, h, mean_snr_linear):
        h = complex(h)
        return cls(h, mean_snr_linear, (h.real * h.real + h.imag * h.imag) * mean_snr_linear)


def free_space_loss_db(distance, wavelength):
    return 20.0 * math.log10(4.0 * math.pi * distance / wavelength)


def noise_power_dbm(config):
    return config.noise_density + 10.0 * math.log10(config.bandwidth) + config.noise_figure


def mean_snr_flagged(config, distance):
    """Mean SNR and whether ``distance`` was clamped up to the reference.

    Returns
    -------
    (float, bool)
        Linear mean SNR and the clamp flag.
    """
    clamped = distance < config.reference_distance
    d = config.reference_distance if clamped else float(distance)
    snr_db = (
        config.tx_power
        - free_space_loss_db(config.reference_distance, config.carrier_wavelength)
        - 10.0 * config.pathloss_exponent * math.log10(d / config.reference_distance)
        - noise_power_dbm(config)
    )
    return 10.0 ** (snr_db / 10.0), clamped


def mean_snr(config, distance):
    """Mean linear SNR at ``distance`` metres from the transmitter.

    ``P_tx (lambda / 4 pi d0)^2 (d0 / d)^beta / (N0 BW F)``; distances
    below the reference distance are clamped to it.
    """
    return mean_snr_flagged(config, distance)[0]


def fading_correlation(config):
    """Lag-one fading correlation ``J0(2 pi f_d T_s)``."""
    return bessel_j0(2.0 * math.pi * config.doppler_hz * config.sample_time)


def _check_rho(rho):
    if not 0.0 <= rho:
        raise ValueError(f"fading correlation must be >= 0, got {rho!r}")
    if rho >= 1.0:
        warnings.warn(
            f"fading correlation {rho!r} >= 1 clamped to {RHO_MAX!r} (static channel)",
            RuntimeWarning,
            stacklevel=3,
        )
        return RHO_MAX
    return rho


def draw_complex_normal(rng, size=None):
    """Unit-variance circular complex Gaussian draws."""
    z = rng.standard_normal(2 if size is None else (size, 2))
    z = z * math.sqrt(0.5)
    if size is None:
        return complex(z[0], z[1])
    return z[:, 0] + 1j * z[:, 1]


def init_fading(mean_snr_linear, rng):
    """Stationary initial state for one link."""
    return FadingState.from_gain(draw_complex_normal(rng), mean_snr_linear)


def advance_fading(state, rho, rng, mean_snr_linear=None):
    """One AR(1) step of the fading gain.

    Parameters
    ----------
    state : FadingState
    rho : float
        Lag-one correlation in [0, 1); values >= 1 are clamped with a
        warning.
    rng : numpy.random.Generator
    mean_snr_linear : float, optional
        Updated mean SNR (the AGV may have moved); defaults to the old one.
    """
    rho = _check_rho(rho)
    w = draw_complex_normal(rng)
    h = rho * state.complex_gain + math.sqrt(1.0 - rho * rho) * w
    gb = state.mean_snr_linear if mean_snr_linear is None else mean_snr_linear
    return FadingState.from_gain(h, gb)


def gain_trajectory(h0, rho, n, rng):
    """``n`` successive AR(1) gains following ``h0``.

    Consumes the same normal variates, in the same order, as ``n`` calls of
    :func:`advance_fading`, so both paths give identical gains for a given
    generator state.
    """
    rho = _check_rho(rho)
    if n <= 0:
        return np.empty(0, dtype=complex)
    w = draw_complex_normal(rng, n)
    y, _ = lfilter([math.sqrt(1.0 - rho * rho)], [1.0, -rho], w, zi=[rho * complex(h0)])
    return y
