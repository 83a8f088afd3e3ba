"""Exact squared Euclidean distance transform kernels.

Two-pass separable algorithm (Felzenszwalb & Huttenlocher): a columnwise
scan yields the vertical distance to the nearest site, then a rowwise
lower-envelope pass over the squared column distances produces the exact
2D squared distance. All outputs are integers, so results are
schedule-independent and bit-reproducible.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def squared_edt(sites):
    """Squared L2 distance from every pixel to the nearest True pixel.

    `sites` is a (H, W) boolean grid with at least one True entry; the
    caller is responsible for checking that. Returns int64 (H, W).
    """
    h, w = sites.shape
    inf_d = h + w + 1  # larger than any realizable axis distance

    # pass 1: per-column vertical distance to the nearest site
    g = np.empty((h, w), np.int64)
    for x in range(w):
        g[0, x] = 0 if sites[0, x] else inf_d
        for y in range(1, h):
            if sites[y, x]:
                g[y, x] = 0
            else:
                d = g[y - 1, x] + 1
                g[y, x] = d if d < inf_d else inf_d
        for y in range(h - 2, -1, -1):
            if g[y + 1, x] + 1 < g[y, x]:
                g[y, x] = g[y + 1, x] + 1

    # pass 2: per-row lower envelope of parabolas x -> (x - x')^2 + g(x')^2
    out = np.empty((h, w), np.int64)
    f = np.empty(w, np.int64)
    v = np.empty(w, np.int64)
    z = np.empty(w + 1, np.float64)
    for y in range(h):
        for x in range(w):
            gv = g[y, x]
            f[x] = gv * gv
        k = 0
        v[0] = 0
        z[0] = -1e30
        z[1] = 1e30
        for q in range(1, w):
            fq = f[q] + q * q
            p = v[k]
            s = (fq - (f[p] + p * p)) / (2.0 * (q - p))
            while s <= z[k]:
                k -= 1
                p = v[k]
                s = (fq - (f[p] + p * p)) / (2.0 * (q - p))
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = 1e30
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k += 1
            p = v[k]
            out[y, q] = (q - p) * (q - p) + f[p]
    return out


def warmup() -> None:
    """Force JIT compilation ahead of timed sections."""
    squared_edt(np.array([[True, False], [False, False]]))
