import math
import warnings

import numpy as np
import pytest
from scipy import stats

from agvsched.channel import (
    RHO_MAX,
    SPEED_OF_LIGHT,
    FadingState,
    RadioConfig,
    advance_fading,
    fading_correlation,
    free_space_loss_db,
    gain_trajectory,
    init_fading,
    mean_snr,
    mean_snr_flagged,
    noise_power_dbm,
)


def db(x):
    return 10 * math.log10(x)


def test_link_budget_hand_oracle():
    # dB budget worked by hand for 20 dBm, 2 GHz, 1.4 MHz, beta 3,
    # d0 = 1 m, d = 1000 m:
    #   FSPL(1 m) = 20 log10(2e9) + 20 log10(1) - 147.55 = 38.47 dB
    #   extra path loss = 30 log10(1000) = 90 dB
    #   noise = -174 + 10 log10(1.4e6) + 7 = -105.54 dBm
    #   SNR = 20 - 38.47 - 90 + 105.54 = -2.93 dB
    cfg = RadioConfig(reference_distance=1.0)
    assert db(mean_snr(cfg, 1000.0)) == pytest.approx(-2.93, abs=0.01)


def test_default_reference_shifts_budget_by_log_d0():
    base = db(mean_snr(RadioConfig(reference_distance=1.0), 1000.0))
    cfg = RadioConfig()
    assert db(mean_snr(cfg, 1000.0)) == pytest.approx(base + 10 * math.log10(cfg.reference_distance), abs=1e-9)


def test_at_reference_distance_is_pure_free_space():
    cfg = RadioConfig(reference_distance=10.0)
    want = cfg.tx_power - free_space_loss_db(10.0, cfg.carrier_wavelength) - noise_power_dbm(cfg)
    assert db(mean_snr(cfg, 10.0)) == pytest.approx(want, abs=1e-12)


def test_free_space_loss_formula():
    lam = SPEED_OF_LIGHT / 2e9
    assert free_space_loss_db(1.0, lam) == pytest.approx(20 * math.log10(2e9) - 147.5522, abs=1e-3)


def test_mean_snr_monotone_in_distance():
    cfg = RadioConfig()
    ds = np.linspace(cfg.reference_distance, 5000, 200)
    v = [mean_snr(cfg, d) for d in ds]
    assert all(b < a for a, b in zip(v[:-1], v[1:]))


def test_mean_snr_clamps_below_reference():
    cfg = RadioConfig()
    v, flag = mean_snr_flagged(cfg, 0.5 * cfg.reference_distance)
    assert flag
    assert v == mean_snr(cfg, cfg.reference_distance)
    assert not mean_snr_flagged(cfg, 2 * cfg.reference_distance)[1]


def test_fading_correlation_default():
    # f_d = v / lambda at 1 m/s and 2 GHz, T_s = 5 ms
    assert fading_correlation(RadioConfig()) == pytest.approx(0.9890486952237258, abs=1e-12)


def test_fading_correlation_static_is_one():
    assert fading_correlation(RadioConfig(doppler_hz=0.0)) == 1.0


@pytest.mark.parametrize("field,value", [
    ("bandwidth", 0.0), ("reference_distance", -1.0), ("sample_time", math.nan),
    ("pathloss_exponent", 1.0), ("doppler_hz", -1.0), ("tx_power", math.inf),
])
def test_radio_config_rejects(field, value):
    with pytest.raises(ValueError, match=field):
        RadioConfig(**{field: value})


def test_advance_fading_warns_and_clamps(rng):
    st = init_fading(1.0, rng)
    with pytest.warns(RuntimeWarning):
        nxt = advance_fading(st, 1.0, rng)
    assert abs(nxt.complex_gain - RHO_MAX * st.complex_gain) < 1e-3


def test_advance_fading_rejects_negative(rng):
    with pytest.raises(ValueError):
        advance_fading(init_fading(1.0, rng), -0.1, rng)


def test_fading_state_snr():
    s = FadingState.from_gain(3 + 4j, 2.0)
    assert s.inst_snr_linear == pytest.approx(50.0)


def test_trajectory_matches_stepwise():
    h0 = 0.3 - 0.8j
    a = gain_trajectory(h0, 0.97, 50, np.random.default_rng(7))
    rng = np.random.default_rng(7)
    st = FadingState.from_gain(h0, 1.0)
    b = []
    for _ in range(50):
        st = advance_fading(st, 0.97, rng)
        b.append(st.complex_gain)
    # lfilter and the scalar recursion round differently in the last bits
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


def test_power_marginal_is_exponential():
    # independent chains, each run long past its correlation time
    rng = np.random.default_rng(2024)
    n = 4000
    h = np.array([gain_trajectory(0j, 0.989, 600, rng)[-1] for _ in range(n)])
    p = np.abs(h) ** 2
    assert stats.kstest(p, "expon").pvalue > 0.01
    assert p.mean() == pytest.approx(1.0, abs=0.06)


def test_lag_one_correlation():
    rho = 0.9
    h = gain_trajectory(0j, rho, 400_000, np.random.default_rng(3))[1000:]
    c = np.mean(h[1:] * np.conj(h[:-1])) / np.mean(np.abs(h) ** 2)
    assert c.real == pytest.approx(rho, abs=0.01)
    assert abs(c.imag) < 0.01


def test_zero_correlation_is_white():
    h = gain_trajectory(1 + 0j, 0.0, 200_000, np.random.default_rng(5))
    c = np.mean(h[1:] * np.conj(h[:-1]))
    assert abs(c) < 0.01


def test_no_warning_for_valid_rho(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        advance_fading(init_fading(1.0, rng), 0.989, rng)
