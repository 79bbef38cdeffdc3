"""Hot numeric kernels, compiled with numba when available.

Set ``TWOHOP_AOI_JIT=0`` in the environment to force the pure-numpy path.
Both paths are kept behaviourally identical and are tested against each other.
"""

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

JIT_ENABLED = _HAVE_NUMBA and os.environ.get("TWOHOP_AOI_JIT", "1") != "0"

_LN2 = np.log(2.0)


# --- pure numpy reference path -------------------------------------------


def _np_access_gain_matrix(rx_xyz, dev_xyz, beta0):
    dx = rx_xyz[:, None, 0] - dev_xyz[None, :, 0]
    dy = rx_xyz[:, None, 1] - dev_xyz[None, :, 1]
    dz = rx_xyz[:, None, 2] - dev_xyz[None, :, 2]
    return beta0 / (dz * dz + dx * dx + dy * dy)


def _np_sic_sinr(hsq, power, zeta, noise, literal):
    n_uav = hsq.shape[0]
    idx = np.arange(n_uav)
    h_self = hsq[:, None, :]
    h_other = hsq[None, :, :]
    weaker = (h_other < h_self) | (
        (h_other == h_self) & (idx[None, :, None] > idx[:, None, None])
    )
    weaker &= idx[None, :, None] != idx[:, None, None]
    if literal:
        # interferer channel, but the decoded UAV's own power and allocation
        interf = (weaker * h_other).sum(axis=1) * power * zeta
    else:
        interf = (weaker * (h_other * power[None, :, :] * zeta[None, :, :])).sum(axis=1)
    signal = zeta * hsq * power
    sinr = signal / (interf + noise)
    return sinr, interf


def _np_log2_1p(x):
    return np.log1p(x) / _LN2


# --- numba path ------------------------------------------------------------

if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _nb_access_gain_matrix(rx_xyz, dev_xyz, beta0):
        n_rx = rx_xyz.shape[0]
        n_dev = dev_xyz.shape[0]
        out = np.empty((n_rx, n_dev))
        for m in range(n_rx):
            for k in range(n_dev):
                dx = rx_xyz[m, 0] - dev_xyz[k, 0]
                dy = rx_xyz[m, 1] - dev_xyz[k, 1]
                dz = rx_xyz[m, 2] - dev_xyz[k, 2]
                out[m, k] = beta0 / (dz * dz + dx * dx + dy * dy)
        return out

    @numba.njit(cache=True)
    def _nb_sic_sinr(hsq, power, zeta, noise, literal):
        n_uav, n_sub = hsq.shape
        sinr = np.zeros((n_uav, n_sub))
        interf = np.zeros((n_uav, n_sub))
        for l in range(n_sub):
            for m in range(n_uav):
                acc = 0.0
                hm = hsq[m, l]
                for o in range(n_uav):
                    if o == m:
                        continue
                    ho = hsq[o, l]
                    if ho < hm or (ho == hm and o > m):
                        if literal:
                            acc += ho
                        else:
                            acc += ho * power[o, l] * zeta[o, l]
                if literal:
                    acc = acc * power[m, l] * zeta[m, l]
                interf[m, l] = acc
                sinr[m, l] = zeta[m, l] * hm * power[m, l] / (acc + noise)
        return sinr, interf


def access_gain_matrix(rx_xyz, dev_xyz, beta0):
    """LoS gain between every receiver (rows) and every device (columns)."""
    rx_xyz = np.ascontiguousarray(rx_xyz, dtype=np.float64)
    dev_xyz = np.ascontiguousarray(dev_xyz, dtype=np.float64)
    if JIT_ENABLED:
        return _nb_access_gain_matrix(rx_xyz, dev_xyz, float(beta0))
    return _np_access_gain_matrix(rx_xyz, dev_xyz, float(beta0))


def sic_sinr(hsq, power, zeta, noise, literal=False):
    """SINR and interference power of every (UAV, subcarrier) pair under SIC.

    Returns ``(sinr, interference)``, both shaped like ``hsq``.
    """
    hsq = np.ascontiguousarray(hsq, dtype=np.float64)
    power = np.ascontiguousarray(power, dtype=np.float64)
    zeta = np.ascontiguousarray(zeta, dtype=np.float64)
    if JIT_ENABLED:
        return _nb_sic_sinr(hsq, power, zeta, float(noise), bool(literal))
    return _np_sic_sinr(hsq, power, zeta, float(noise), bool(literal))


def log2_1p(x):
    # numpy's vectorised log1p beats a compiled scalar loop, so no jit variant
    return _np_log2_1p(np.asarray(x, dtype=np.float64))


def backend():
    return "numba" if JIT_ENABLED else "numpy"
