"""UAV motion: per-slot displacement limit, area box, and spacing."""

import numpy as np


def clip_displacement(cmds, step_max):
    """Scale each (vx, vy) row down to magnitude ``step_max`` if it is longer."""
    cmds = np.asarray(cmds, dtype=np.float64).reshape(-1, 2)
    norms = np.hypot(cmds[:, 0], cmds[:, 1])
    scale = np.ones_like(norms)
    over = norms > step_max
    scale[over] = step_max / norms[over]
    return cmds * scale[:, None]


def apply_move(xy, cmds, v_max, area_m, d_min):
    """Move every UAV by its command and resolve spacing conflicts.

    Displacements are clipped to ``v_max`` (one slot of travel) and the
    results to the square area. Any pair closer than ``d_min`` after the move
    has both members' moves cancelled; cancellation repeats until stable
    because a held UAV can conflict with a third one that did move.

    Returns ``(new_xy, applied_displacement, flags)`` where ``flags[m]`` counts
    the conflicting pairs UAV ``m`` was part of.
    """
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    n = xy.shape[0]
    disp = clip_displacement(cmds, v_max)
    proposed = np.clip(xy + disp, 0.0, area_m)
    moved = np.any(proposed != xy, axis=1)
    flags = np.zeros(n, dtype=np.int64)
    if n < 2:
        return proposed, proposed - xy, flags
    flagged_pairs = set()
    while True:
        diff = proposed[:, None, :] - proposed[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        bad = np.argwhere(np.triu(dist < d_min, k=1))
        cancelled = False
        for a, b in bad:
            if not (moved[a] or moved[b]):
                continue
            if (a, b) not in flagged_pairs:
                flagged_pairs.add((a, b))
                flags[a] += 1
                flags[b] += 1
            for u in (a, b):
                if moved[u]:
                    proposed[u] = xy[u]
                    moved[u] = False
                    cancelled = True
        if not cancelled:
            break
    return proposed, proposed - xy, flags


def in_coverage(uav, device, r_max, metric="horizontal"):
    """True iff the device lies within ``r_max`` of the UAV.

    ``metric="horizontal"`` ignores altitude; ``"3d"`` includes it.
    """
    dx = uav[0] - device[0]
    dy = uav[1] - device[1]
    d2 = dx * dx + dy * dy
    if metric == "3d":
        dz = uav[2] - device[2]
        d2 += dz * dz
    elif metric != "horizontal":
        raise ValueError(f"unknown coverage metric {metric!r}")
    return bool(d2 <= r_max * r_max)


def coverage_matrix(uav_xyz, dev_xyz, r_max, metric="horizontal"):
    uav_xyz = np.asarray(uav_xyz, dtype=np.float64)
    dev_xyz = np.asarray(dev_xyz, dtype=np.float64)
    d = uav_xyz[:, None, :] - dev_xyz[None, :, :]
    d2 = d[..., 0] ** 2 + d[..., 1] ** 2
    if metric == "3d":
        d2 = d2 + d[..., 2] ** 2
    elif metric != "horizontal":
        raise ValueError(f"unknown coverage metric {metric!r}")
    return d2 <= r_max * r_max
