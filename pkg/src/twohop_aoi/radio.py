"""Channel gains, SINR, rates and transmission times for both hops.

Rates are expressed per millisecond: callers pass ``bandwidth`` already
scaled to "bits per ms per bit/s/Hz", i.e. ``bandwidth_hz * 1e-3``.
Logarithms are base 2.
"""

import numpy as np

from . import _accel


def access_gain(uav, device, beta0):
    """LoS gain ``beta0 / (dz^2 + dx^2 + dy^2)`` between two 3-D points."""
    dx = uav[0] - device[0]
    dy = uav[1] - device[1]
    dz = uav[2] - device[2]
    return beta0 / (dz * dz + dx * dx + dy * dy)


def access_rate(gain, rho_dev, noise_power, bandwidth):
    """Uplink rate on one access subcarrier, ``B log2(1 + rho g / sigma^2)``."""
    snr = rho_dev * gain / noise_power
    return bandwidth * float(np.log1p(snr) / np.log(2.0))


def upload_time(d_bits, psi, rate):
    """Offloading time ``psi * D / R``; ``inf`` when scheduled on a dead link."""
    if not psi:
        return 0.0
    if rate <= 0.0:
        return float("inf")
    return d_bits / rate


def interference_set(hsq_col, zeta_col, m):
    """UAVs whose signal UAV ``m`` still sees after SIC on one subcarrier.

    Decoding runs in descending channel strength; equal channels are broken by
    treating the lower index as stronger. Only co-scheduled UAVs count.
    """
    hm = hsq_col[m]
    out = []
    for o in range(len(hsq_col)):
        if o == m or not zeta_col[o]:
            continue
        ho = hsq_col[o]
        if ho < hm or (ho == hm and o > m):
            out.append(o)
    return out


def backhaul_sinr(hsq, power, zeta, m, l, noise_power, literal=False):
    """SINR of UAV ``m`` on backhaul subcarrier ``l`` under PD-NOMA with SIC.

    ``literal=True`` evaluates the interference term with the decoded UAV's
    own power and allocation in place of each interferer's.
    """
    hm = hsq[m, l]
    acc = 0.0
    for o in range(hsq.shape[0]):
        if o == m:
            continue
        ho = hsq[o, l]
        if ho < hm or (ho == hm and o > m):
            if literal:
                acc += ho * power[m, l] * zeta[m, l]
            else:
                acc += ho * power[o, l] * zeta[o, l]
    return zeta[m, l] * hm * power[m, l] / (acc + noise_power)


def backhaul_sum_rate(hsq, power, zeta, m, noise_power, bandwidth, literal=False):
    """Sum over subcarriers of ``bandwidth * log2(1 + sinr)`` for UAV ``m``."""
    total = 0.0
    for l in range(hsq.shape[1]):
        g = backhaul_sinr(hsq, power, zeta, m, l, noise_power, literal)
        total += float(np.log1p(g) / np.log(2.0))
    return bandwidth * total


def backhaul_time(d_residual, z, zeta_row, rate):
    """Time to forward the selected residual payloads of one UAV.

    The subcarrier sum acts as an allocation indicator: payload bits are sent
    once over the aggregate rate, not once per subcarrier.
    """
    bits = float(np.sum(np.asarray(d_residual, dtype=np.float64) * np.asarray(z, dtype=bool)))
    if bits == 0.0:
        return 0.0
    if rate <= 0.0 or not np.any(zeta_row):
        return float("inf")
    return bits / rate


# --- matrix forms used by the environment ---------------------------------


def access_rate_matrix(gain, rho_dev, noise_power, bandwidth):
    return bandwidth * _accel.log2_1p(rho_dev * np.asarray(gain) / noise_power)


def backhaul_rates(hsq, power, zeta, noise_power, bandwidth, literal=False):
    """Per-UAV sum rates plus the SINR and interference matrices."""
    sinr, interf = _accel.sic_sinr(hsq, power, zeta, noise_power, literal)
    rates = bandwidth * _accel.log2_1p(sinr).sum(axis=1)
    return rates, sinr, interf
