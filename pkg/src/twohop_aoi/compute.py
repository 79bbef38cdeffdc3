"""MEC execution-time accounting at the UAVs and the BS."""

import numpy as np


def _exec_time(cycles, capacity):
    if cycles == 0.0:
        return 0.0
    if capacity <= 0.0:
        return float("inf")
    return cycles / capacity


def uav_exec_time(selected, lam, d_bits, f_cyc_per_bit, f_uav):
    """Time for UAV to run the ``lam`` share of each selected task (ms).

    ``f_uav`` is in cycles/ms.
    """
    sel = np.asarray(selected, dtype=bool)
    cycles = float(np.sum(sel * np.asarray(lam) * np.asarray(d_bits) * np.asarray(f_cyc_per_bit)))
    return _exec_time(cycles, f_uav)


def bs_exec_time(selected, lam, d_bits, f_cyc_per_bit, f_bs):
    """Time for the BS to run the remaining ``1 - lam`` share (ms)."""
    sel = np.asarray(selected, dtype=bool)
    rest = 1.0 - np.asarray(lam, dtype=np.float64)
    cycles = float(np.sum(sel * rest * np.asarray(d_bits) * np.asarray(f_cyc_per_bit)))
    return _exec_time(cycles, f_bs)


def age_greedy_fill(order, time_of, limit):
    """Select candidates in ``order`` while the one-slot time bound holds.

    ``time_of(mask_indices)`` evaluates the slot time of a candidate set.
    Returns the selected indices and whether the node stalled, i.e. had work
    but could not take even its first candidate.
    """
    chosen = []
    for idx in order:
        trial = chosen + [idx]
        if time_of(trial) <= limit:
            chosen = trial
    stalled = bool(order) and not chosen
    return chosen, stalled
