import pytest

from leachsim.config import RadioParams
from leachsim.energy import tx_energy, rx_energy, idle_energy

RADIO = RadioParams(e_elec_j_per_bit=50e-9, eps_amp_j_per_bit_m2=10e-12, e_idle_j_per_s=0.0)


def test_tx_zero_bits_costs_nothing():
    assert tx_energy(0, 123.0, RADIO) == 0.0


def test_tx_electronics_only_at_zero_distance():
    # 1000 bits * 50 nJ/bit
    assert tx_energy(1000, 0.0, RADIO) == pytest.approx(5.0e-5, rel=1e-12)


def test_tx_amplifier_term_grows_with_distance_squared():
    # 5.0e-5 + 1e-11 * 1000 * 100^2
    assert tx_energy(1000, 100.0, RADIO) == pytest.approx(1.5e-4, rel=1e-12)


def test_rx_zero_bits():
    assert rx_energy(0, RADIO) == 0.0


def test_rx_is_electronics_cost():
    assert rx_energy(1000, RADIO) == pytest.approx(5.0e-5, rel=1e-12)


def test_single_tx_plus_rx_totals_at_zero_distance():
    total = tx_energy(1000, 0.0, RADIO) + rx_energy(1000, RADIO)
    assert total == pytest.approx(1.0e-4, rel=1e-12)


def test_idle_scales_with_time():
    radio = RadioParams(e_idle_j_per_s=0.5)
    assert idle_energy(4.0, radio) == pytest.approx(2.0)
    assert idle_energy(0.0, radio) == 0.0


@pytest.mark.parametrize("func, args", [
    (tx_energy, (-1, 0.0, RADIO)),
    (tx_energy, (10, -1.0, RADIO)),
    (rx_energy, (-1, RADIO)),
    (idle_energy, (-1.0, RADIO)),
])
def test_negative_inputs_rejected(func, args):
    with pytest.raises(ValueError):
        func(*args)
