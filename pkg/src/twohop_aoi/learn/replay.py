import numpy as np


class ReplayBuffer:
    """Fixed-capacity ring of joint transitions.

    Each transition stores every agent's observation and action, the local
    rewards of the UAV agents, the global (BS) reward and the next
    observations.
    """

    def __init__(self, capacity, n_uav, uav_obs, uav_act, bs_obs, bs_act):
        self.capacity = int(capacity)
        self.size = 0
        self._next = 0
        c = self.capacity
        self.s_u = np.zeros((c, n_uav, uav_obs))
        self.a_u = np.zeros((c, n_uav, uav_act))
        self.s_b = np.zeros((c, bs_obs))
        self.a_b = np.zeros((c, bs_act))
        self.r_l = np.zeros((c, n_uav))
        self.r_g = np.zeros(c)
        self.s2_u = np.zeros((c, n_uav, uav_obs))
        self.s2_b = np.zeros((c, bs_obs))

    def __len__(self):
        return self.size

    def add(self, s_u, a_u, s_b, a_b, r_l, r_g, s2_u, s2_b):
        i = self._next
        self.s_u[i] = s_u
        self.a_u[i] = a_u
        self.s_b[i] = s_b
        self.a_b[i] = a_b
        self.r_l[i] = r_l
        self.r_g[i] = r_g
        self.s2_u[i] = s2_u
        self.s2_b[i] = s2_b
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng, batch):
        if batch > self.size:
            raise ValueError(f"cannot draw {batch} transitions from {self.size}")
        idx = rng.choice(self.size, size=batch, replace=False)
        return {
            "s_u": self.s_u[idx],
            "a_u": self.a_u[idx],
            "s_b": self.s_b[idx],
            "a_b": self.a_b[idx],
            "r_l": self.r_l[idx],
            "r_g": self.r_g[idx],
            "s2_u": self.s2_u[idx],
            "s2_b": self.s2_b[idx],
        }
