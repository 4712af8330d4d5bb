import math

import numpy as np
import pytest

from orbitfl.link import (
    BOLTZMANN_J_PER_K,
    CONTROL_MESSAGE_BITS,
    FixedRateLink,
    LinkParams,
    LinkUnavailableError,
    ShannonLink,
    db,
    dbm_to_watts,
    from_db,
    model_size_bits,
    path_loss,
    rate,
    snr,
    transfer_time,
)
from orbitfl.orbital import SPEED_OF_LIGHT_M_S


def reference_link() -> LinkParams:
    # 20 MHz S-band channel, 40 dBm transmit power, 6.98 dBi antennas, 354.81 K noise
    return LinkParams(
        tx_power_w=dbm_to_watts(40.0),
        tx_gain=from_db(6.98),
        rx_gain=from_db(6.98),
        bandwidth_hz=20e6,
        noise_temperature_k=354.81,
        carrier_hz=2.4e9,
    )


CHORD_M = 6406.886e3  # adjacent-ring spacing of the reference constellation


def test_db_round_trip():
    for x in (1e-6, 0.5, 1.0, 42.0, 4.15e17):
        assert from_db(db(x)) == pytest.approx(x, rel=1e-12)
    assert dbm_to_watts(40.0) == pytest.approx(10.0, rel=1e-12)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3, rel=1e-12)


def test_path_loss_reference_value():
    loss = path_loss(CHORD_M, 2.4e9)
    assert loss == pytest.approx(4.1543e17, rel=1e-3)
    assert db(loss) == pytest.approx(176.18, abs=0.05)


def test_path_loss_square_law():
    base = path_loss(1e6, 2.4e9)
    assert path_loss(2e6, 2.4e9) == pytest.approx(4 * base, rel=1e-12)
    assert path_loss(1e6, 4.8e9) == pytest.approx(4 * base, rel=1e-12)


def test_path_loss_unit_distance():
    # loss is 1 where 4*pi*f*d/c == 1
    d_unit = SPEED_OF_LIGHT_M_S / (4 * math.pi * 2.4e9)
    assert path_loss(d_unit, 2.4e9) == pytest.approx(1.0, rel=1e-12)


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        path_loss(0.0, 2.4e9)


def test_snr_reference_value():
    params = reference_link()
    got = snr(params, CHORD_M)
    assert got == pytest.approx(6.115e-3, rel=1e-3)
    assert db(got) == pytest.approx(-22.14, abs=0.05)


def test_snr_zero_when_invisible():
    assert snr(reference_link(), CHORD_M, visible=False) == 0.0
    assert rate(reference_link(), CHORD_M, visible=False) == 0.0


def test_snr_decreases_with_distance():
    params = reference_link()
    rng = np.random.default_rng(3)
    for _ in range(200):
        d = float(rng.uniform(1e4, 1e8))
        factor = float(rng.uniform(1.01, 10.0))
        assert snr(params, d * factor) < snr(params, d)
        assert rate(params, d * factor) < rate(params, d)


def test_rate_reference_value():
    assert rate(reference_link(), CHORD_M) == pytest.approx(1.759e5, rel=1e-3)


def test_rate_at_unity_snr_is_bandwidth():
    # engineered link with SNR exactly 1: rate must equal B * log2(2) = B
    d = 1e6
    loss = path_loss(d, 1e9)
    noise = BOLTZMANN_J_PER_K * 300.0 * 1e6
    params = LinkParams(
        tx_power_w=noise * loss,
        tx_gain=1.0,
        rx_gain=1.0,
        bandwidth_hz=1e6,
        noise_temperature_k=300.0,
        carrier_hz=1e9,
    )
    assert rate(params, d) == pytest.approx(1e6, rel=1e-9)


def test_transfer_time_reference_value():
    params = reference_link()
    got = transfer_time(params, CHORD_M, 251_200)
    assert got == pytest.approx(1.4494, abs=2e-3)


def test_transfer_time_zero_payload_is_propagation_plus_delays():
    params = LinkParams(
        tx_power_w=10.0,
        tx_gain=2.0,
        rx_gain=2.0,
        bandwidth_hz=1e6,
        noise_temperature_k=300.0,
        carrier_hz=1e9,
        tx_delay_s=0.25,
        rx_delay_s=0.5,
    )
    got = transfer_time(params, 3e8, 0)
    assert got == pytest.approx(3e8 / SPEED_OF_LIGHT_M_S + 0.75, rel=1e-9)


def test_transfer_time_requires_visibility():
    with pytest.raises(LinkUnavailableError):
        transfer_time(reference_link(), CHORD_M, 1000, visible=False)


def test_transfer_time_monotone_in_payload_and_distance():
    params = reference_link()
    assert transfer_time(params, CHORD_M, 2000) > transfer_time(params, CHORD_M, 1000)
    assert transfer_time(params, 2 * CHORD_M, 1000) > transfer_time(params, CHORD_M, 1000)


def test_model_size_bits():
    # 7850 packed 32-bit parameters plus the fixed header
    assert model_size_bits(7850) == 7850 * 32 + 256
    assert model_size_bits(1) == 288
    with pytest.raises(ValueError):
        model_size_bits(0)
    assert CONTROL_MESSAGE_BITS == 512


def test_link_params_validation():
    with pytest.raises(ValueError):
        LinkParams(0.0, 1.0, 1.0, 1e6, 300.0, 1e9)
    with pytest.raises(ValueError):
        LinkParams(1.0, 1.0, 1.0, 1e6, -300.0, 1e9)
    with pytest.raises(ValueError):
        LinkParams(1.0, 1.0, 1.0, 1e6, 300.0, 1e9, tx_delay_s=-1.0)


def test_shannon_link_wraps_functions():
    params = reference_link()
    model = ShannonLink(params)
    assert model.transfer_time(CHORD_M, 251_200) == transfer_time(params, CHORD_M, 251_200)


def test_fixed_rate_link():
    model = FixedRateLink(1000.0, fixed_delay_s=0.5)
    assert model.transfer_time(12345.0, 2000) == pytest.approx(2.5)
    with pytest.raises(LinkUnavailableError):
        model.transfer_time(1.0, 1, visible=False)
    with pytest.raises(ValueError):
        FixedRateLink(0.0)
