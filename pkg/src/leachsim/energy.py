"""First-order radio energy model."""

from .config import RadioParams


def tx_energy(k_bits: int, d_m: float, radio: RadioParams) -> float:
    """Energy to transmit k_bits over distance d_m (J)."""
    if k_bits < 0:
        raise ValueError("k_bits must be >= 0")
    if d_m < 0:
        raise ValueError("d_m must be >= 0")
    return radio.e_elec_j_per_bit * k_bits + radio.eps_amp_j_per_bit_m2 * k_bits * d_m * d_m


def rx_energy(k_bits: int, radio: RadioParams) -> float:
    """Energy to receive k_bits (J), independent of distance."""
    if k_bits < 0:
        raise ValueError("k_bits must be >= 0")
    return radio.e_elec_j_per_bit * k_bits


def idle_energy(dt_s: float, radio: RadioParams) -> float:
    """Idle drain over dt_s seconds (J)."""
    if dt_s < 0:
        raise ValueError("dt_s must be >= 0")
    return radio.e_idle_j_per_s * dt_s
