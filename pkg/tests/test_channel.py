import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shortaoi.channel import (
    Blocklength,
    ChannelConfig,
    ChannelDomainError,
    bler,
    bler_derivative,
    is_loose,
    log_bler,
    psi,
    q_function,
)

# 50-digit mpmath evaluation of the BLER expression at m=200, N=150, 4.5 dB
PSI_200 = 3.1095952060461152
BLER_200 = 9.3671948610154613e-4
DERIV_200 = -1.9545653800888553e-4
# step-1 central differences (bler(m+1) - bler(m-1)) / 2 and exact derivatives, same oracle
HALF_DIFF = {150: -0.029791970395900294, 200: -1.9662035296623297e-4, 400: -6.2457333701211803e-34}
EXACT_DERIV = {150: -0.029822149073117997, 200: -1.9545653800888553e-4, 400: -6.0734692851386115e-34}

snrs = st.floats(min_value=0.05, max_value=100.0)
payloads = st.integers(min_value=1, max_value=2000)


def mp_bler(m, ch):
    mpmath.mp.dps = 50
    g = mpmath.mpf(ch.snr_linear)
    x = (mpmath.log(1 + g, 2) / 2 - mpmath.mpf(ch.payload_bits) / m) / (
        mpmath.log(mpmath.e, 2) * mpmath.sqrt((1 - 1 / (1 + g) ** 2) / (2 * mpmath.mpf(m)))
    )
    return mpmath.erfc(x / mpmath.sqrt(2)) / 2


def test_config_db_roundtrip():
    ch = ChannelConfig.from_db(150, 4.5)
    assert ch.snr_linear == pytest.approx(10**0.45, rel=1e-15)
    assert ch.snr_db == pytest.approx(4.5, rel=1e-12)


@given(st.floats(min_value=-30, max_value=40))
def test_config_db_roundtrip_property(db):
    ch = ChannelConfig.from_db(10, db)
    assert math.isclose(ChannelConfig.from_db(10, ch.snr_db).snr_linear, ch.snr_linear, rel_tol=1e-12)


@pytest.mark.parametrize("kwargs", [dict(payload_bits=0, snr_linear=1.0), dict(payload_bits=10, snr_linear=0.0),
                                    dict(payload_bits=10, snr_linear=-2.0), dict(payload_bits=1.5, snr_linear=1.0)])
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ChannelDomainError):
        ChannelConfig(**kwargs)


def test_blocklength_validation_and_loose_flag():
    assert Blocklength(100).loose and not Blocklength(101).loose
    assert is_loose(50) and not is_loose(200)
    with pytest.raises(ChannelDomainError):
        Blocklength(0)


@pytest.mark.parametrize("fn", [bler, psi, bler_derivative, log_bler])
def test_domain_errors(fn, reference_channel):
    with pytest.raises(ChannelDomainError):
        fn(0.5, reference_channel)


@given(payloads, snrs)
def test_bler_is_half_at_capacity(n, snr):
    ch = ChannelConfig(n, snr)
    m = n / ch.half_capacity
    if m >= 1:
        assert bler(m, ch) == pytest.approx(0.5, abs=1e-12)
        assert psi(m, ch) == pytest.approx(0.0, abs=1e-12)


def test_large_blocklength_is_reliable(reference_channel):
    ms = np.array([1e4, 1e5, 1e6])
    vals = bler(ms, reference_channel)
    assert np.all(vals < 1e-10)
    assert np.all(np.diff(vals) <= 0)
    assert np.all(np.diff(log_bler(ms, reference_channel)) < 0)


def test_reference_point_frozen(reference_channel):
    assert psi(200, reference_channel) == pytest.approx(PSI_200, rel=1e-12)
    assert bler(200, reference_channel) == pytest.approx(BLER_200, rel=1e-11)
    assert bler_derivative(200, reference_channel) == pytest.approx(DERIV_200, rel=1e-11)
    assert float(f"{bler(200, reference_channel):.6g}") == 9.36719e-4


def test_bler_matches_high_precision_oracle(reference_channel):
    for m in (105, 130, 160, 200, 250, 300, 600, 1000):
        assert bler(m, reference_channel) == pytest.approx(float(mp_bler(m, reference_channel)), rel=1e-11)


def test_q_function_accuracy():
    mpmath.mp.dps = 40
    for x in np.linspace(-8, 8, 161):
        ref = float(mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2)
        assert q_function(x) == pytest.approx(ref, rel=1e-12)


@given(st.floats(min_value=1.0, max_value=1e5), payloads, snrs)
def test_bler_in_unit_interval(m, n, snr):
    e = bler(m, ChannelConfig(n, snr))
    assert 0.0 <= e <= 1.0


@given(st.floats(min_value=1.0, max_value=1e5), payloads, snrs)
def test_derivative_non_positive(m, n, snr):
    assert bler_derivative(m, ChannelConfig(n, snr)) <= 0.0


@given(st.floats(min_value=1.0, max_value=1e4), st.floats(min_value=1e-3, max_value=50.0), payloads, snrs)
def test_psi_increasing(m, dm, n, snr):
    ch = ChannelConfig(n, snr)
    assert psi(m + dm, ch) > psi(m, ch)


def test_bler_strictly_decreasing_on_grid(reference_channel):
    ms = np.arange(110, 5001)
    assert np.all(np.diff(log_bler(ms, reference_channel)) < 0)
    ms = ms[reference_channel.payload_bits / ms < reference_channel.half_capacity]
    vals = bler(ms, reference_channel)
    positive = vals > 0
    # doubles underflow in the far tail; the log-BLER stays resolvable everywhere
    assert np.all(np.diff(vals[positive]) < 0)
    assert np.all(np.diff(vals) <= 0)
    assert np.all(np.diff(log_bler(ms, reference_channel)) < 0)


@pytest.mark.parametrize("m", [120, 150, 200, 300, 500, 1000])
def test_derivative_matches_finite_difference(m, reference_channel):
    h = 1e-3
    fd = (bler(m + h, reference_channel) - bler(m - h, reference_channel)) / (2 * h)
    assert bler_derivative(m, reference_channel) == pytest.approx(fd, rel=1e-3)


@pytest.mark.parametrize("m", [150, 200, 400])
def test_unit_step_difference_against_oracle(m, reference_channel):
    half = (bler(m + 1, reference_channel) - bler(m - 1, reference_channel)) / 2
    assert half == pytest.approx(HALF_DIFF[m], rel=1e-9)
    assert bler_derivative(m, reference_channel) == pytest.approx(EXACT_DERIV[m], rel=1e-10)


def test_integral_and_continuous_m_agree(reference_channel):
    for m in (110, 200, 777):
        assert bler(m, reference_channel) == bler(float(m), reference_channel) == bler(Blocklength(m), reference_channel)


def test_bler_is_q_of_psi(reference_channel):
    ms = np.linspace(101, 900, 50)
    assert np.array_equal(bler(ms, reference_channel), np.clip(q_function(psi(ms, reference_channel)), 0, 1))
