"""Per-walk statistics near the origin, for many short walks at once."""
import numpy as np
from numba import njit

# column order of the output matrix
FIELDS = ("xi0", "xi_e1", "Xi0", "Xi_e1", "T0", "Te1", "R")


@njit(cache=True)
def origin_kernel(dirs, d, out):
    """Fill ``out[r]`` with the statistics of walk ``r`` over ``dirs.shape[1]`` steps.

    xi0, xi_e1   local times at 0 and e_1
    Xi0, Xi_e1   occupation of the unit spheres around 0 and e_1
    T0, Te1      first hitting times of 0 and e_1 (-1 if not hit)
    R            for the walk restarted at S_1 (a point of S(1)): time of the
                 first return to S(1) if it happens before hitting 0, -2 if 0
                 comes first, -1 if neither happens
    """
    pos = np.zeros(d, dtype=np.int64)
    n_steps = dirs.shape[1]
    for r in range(dirs.shape[0]):
        for i in range(d):
            pos[i] = 0
        xi0 = 0
        xi1 = 0
        big0 = 0
        big1 = 0
        t0 = -1
        t1 = -1
        ret = -1
        for t in range(1, n_steps + 1):
            k = dirs[r, t - 1]
            if k < d:
                pos[k] += 1
            else:
                pos[k - d] -= 1
            rest = 0
            for i in range(1, d):
                rest += abs(pos[i])
            l1 = abs(pos[0]) + rest
            l1_e1 = abs(pos[0] - 1) + rest
            if l1 == 0:
                xi0 += 1
                if t0 < 0:
                    t0 = t
                if ret == -1:
                    ret = -2
            elif l1 == 1:
                big0 += 1
                if ret == -1 and t >= 2:
                    ret = t - 1
            if l1_e1 == 0:
                xi1 += 1
                if t1 < 0:
                    t1 = t
            elif l1_e1 == 1:
                big1 += 1
        out[r, 0] = xi0
        out[r, 1] = xi1
        out[r, 2] = big0
        out[r, 3] = big1
        out[r, 4] = t0
        out[r, 5] = t1
        out[r, 6] = ret
