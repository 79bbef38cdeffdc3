"""Integer AoI recursions for the device, UAV and BS sides.

Counters are per device and advance at slot edges. The device counter runs
while the task waits at the device. The UAV- and BS-side counters are the
age of the freshest task held at that hop: they take the arriving task's age
on arrival and otherwise grow by one per slot.
"""

from dataclasses import dataclass

import numpy as np

from .scenario import LogicError, Stage


@dataclass(frozen=True)
class AgeState:
    delta0: np.ndarray
    delta_m: np.ndarray
    delta_b: np.ndarray

    @classmethod
    def zeros(cls, n_devices):
        z = np.zeros(n_devices, dtype=np.int64)
        return cls(z.copy(), z.copy(), z.copy())


def tick(age: AgeState, stage, uploaded, forwarded, no_uav=False) -> AgeState:
    """Advance every counter across one slot edge.

    ``stage`` is each device's task stage at the start of the slot;
    ``uploaded``/``forwarded`` flag the hop transitions that happened in it.
    In a UAV-less network the upload lands directly at the BS.
    """
    stage = np.asarray(stage)
    up = np.asarray(uploaded, dtype=bool)
    fw = np.asarray(forwarded, dtype=bool)
    if np.any(up & (stage != Stage.AT_DEVICE)):
        raise LogicError("upload reported for a task that is not at its device")
    if np.any(fw & (stage != Stage.UAV_DONE)):
        raise LogicError("forward reported for a task not ready at a UAV")
    if no_uav and np.any(fw):
        raise LogicError("forward reported in a network without UAVs")

    waiting = stage == Stage.AT_DEVICE
    d0 = age.delta0 + (waiting & ~up)
    if no_uav:
        dm = age.delta_m.copy()
        db = np.where(up, age.delta0 + 1, age.delta_b + 1)
    else:
        dm = np.where(up, age.delta0 + 1, age.delta_m + 1)
        db = np.where(fw, age.delta_m + 1, age.delta_b + 1)
    return AgeState(d0.astype(np.int64), dm.astype(np.int64), db.astype(np.int64))


def mean_aoi(history_m, history_b, k1, k2):
    """Episode means of the UAV- and BS-side ages and the weighted objective.

    Histories are ``(T, K)`` arrays of post-slot ages.
    """
    hm = np.asarray(history_m)
    hb = np.asarray(history_b)
    if hm.size == 0:
        raise ValueError("empty history")
    n = hm.shape[0] * hm.shape[1]
    mean_m = int(hm.sum()) / n
    mean_b = int(hb.sum()) / n
    return mean_m, mean_b, k1 * mean_m + k2 * mean_b
