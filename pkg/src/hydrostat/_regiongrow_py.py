"""Pure-Python region growing over level-line angles (fallback kernel)."""
import math

import numpy as np

_TWO_PI = 2.0 * math.pi


def region_grow(angle, valid, order, tol):
    """Group 8-connected pixels whose level-line angle stays within ``tol``.

    Parameters
    ----------
    angle : (H, W) float64
        Level-line angle per pixel, radians.
    valid : (H, W) uint8
        Nonzero where the gradient is strong enough to seed or join a region.
    order : (n,) int64
        Flat pixel indices in seeding order (strongest gradient first).
    tol : float
        Angular tolerance, radians.

    Returns
    -------
    labels : (H, W) int32
        Region id per pixel, -1 where unassigned.
    n_regions : int
    """
    angle = np.ascontiguousarray(angle, dtype=np.float64)
    h, w = angle.shape
    ang = angle.ravel().tolist()
    ok = np.ascontiguousarray(valid, dtype=np.uint8).ravel().tolist()
    labels = [-1] * (h * w)
    n_regions = 0
    for seed in order.tolist():
        if labels[seed] != -1 or not ok[seed]:
            continue
        lab = n_regions
        n_regions += 1
        labels[seed] = lab
        a0 = ang[seed]
        sx = math.cos(a0)
        sy = math.sin(a0)
        reg_angle = a0
        members = [seed]
        i = 0
        while i < len(members):
            p = members[i]
            i += 1
            r, c = divmod(p, w)
            for dr in (-1, 0, 1):
                rr = r + dr
                if rr < 0 or rr >= h:
                    continue
                for dc in (-1, 0, 1):
                    cc = c + dc
                    if cc < 0 or cc >= w or (dr == 0 and dc == 0):
                        continue
                    q = rr * w + cc
                    if labels[q] != -1 or not ok[q]:
                        continue
                    d = ang[q] - reg_angle
                    while d > math.pi:
                        d -= _TWO_PI
                    while d < -math.pi:
                        d += _TWO_PI
                    if abs(d) <= tol:
                        labels[q] = lab
                        members.append(q)
                        sx += math.cos(ang[q])
                        sy += math.sin(ang[q])
                        reg_angle = math.atan2(sy, sx)
    return np.asarray(labels, dtype=np.int32).reshape(h, w), n_regions
