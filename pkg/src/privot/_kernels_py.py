"""Pure-numpy kernels; reference semantics for the compiled extension."""

import numpy as np

# caps the size of broadcast temporaries (number of float64 entries)
_BLOCK = 1 << 22


def legendre_lines(xs, ys, F, threads=1):
    """Row-wise discrete Legendre transform.

    Computes ``out[l, j] = max_k xs[k] * ys[j] - F[l, k]`` by exhaustive
    search over ``k``. ``threads`` is accepted for signature parity.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    L, m = F.shape
    if xs.shape[0] != m:
        raise ValueError("xs length must match F columns")
    out = np.empty((L, ys.shape[0]))
    xy = xs[:, None] * ys[None, :]
    rows = max(1, _BLOCK // max(1, m * ys.shape[0]))
    for start in range(0, L, rows):
        stop = min(L, start + rows)
        out[start:stop] = (xy[None, :, :] - F[start:stop, :, None]).max(axis=1)
    return out


def fenchel_brute(points, ys, F, threads=1):
    """Exhaustive transform, ``out[b, j] = max_k <points[k], ys[j]> - F[b, k]``."""
    points = np.asarray(points, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    G = points.shape[0]
    if F.shape[1] != G or ys.shape[1] != points.shape[1]:
        raise ValueError("shape mismatch between points, ys and F")
    if G == 0:
        raise ValueError("empty grid")
    out = np.empty((F.shape[0], ys.shape[0]))
    cols = max(1, _BLOCK // G)
    for j0 in range(0, ys.shape[0], cols):
        j1 = min(ys.shape[0], j0 + cols)
        ip = np.zeros((G, j1 - j0))
        for a in range(points.shape[1]):
            ip += points[:, a, None] * ys[None, j0:j1, a]
        for b in range(F.shape[0]):
            out[b, j0:j1] = (ip - F[b, :, None]).max(axis=0)
    return out
