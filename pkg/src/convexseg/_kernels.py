"""Hot numeric kernels with numba and pure-numpy implementations.

Three operations dominate solver runtime: uniform disc convolution,
general weighted-tap convolution (truncated Gaussian), and per-pixel
projection onto the probability simplex. Each has a numba version and a
numpy version; public wrappers dispatch on `backend.USE_NUMBA` unless an
explicit `impl` is requested (used by the benchmark and parity tests).

Disc convolution exploits that the disc is a stack of horizontal runs:
output(x) = w * sum_dy sum_{|dx| <= half[dy]} field_pad(x + (dy, dx)),
evaluated with sliding window sums, O(H*W*(2r+1)) instead of O(H*W*r^2).
The disc is symmetric under offset negation, so this correlation form
equals the convolution sum_o w(o) field(x - o).
"""

import numpy as np

from . import backend

if backend.HAS_NUMBA:
    from numba import njit, prange
else:  # pragma: no cover - exercised only without numba installed
    def njit(*args, **kwargs):
        def wrap(f):
            return f
        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range


def _pad2d(field, r, pad_value):
    H, W = field.shape
    out = np.full((H + 2 * r, W + 2 * r), float(pad_value))
    out[r:r + H, r:r + W] = field
    return out


# ---------------------------------------------------------------------------
# uniform disc convolution


def _disc_conv_numpy(padded, half_widths, weight, H, W):
    r = (len(half_widths) - 1) // 2
    csum = np.cumsum(padded, axis=1)
    csum = np.concatenate([np.zeros((padded.shape[0], 1)), csum], axis=1)
    acc = np.zeros((H, W))
    for k in range(2 * r + 1):
        hw = int(half_widths[k])
        rows = csum[k:k + H]
        # window over padded columns [j + r - hw, j + r + hw]
        acc += rows[:, r + hw + 1:r + hw + 1 + W] - rows[:, r - hw:r - hw + W]
    return acc * weight


@njit(parallel=True, cache=True)
def _disc_conv_numba(padded, half_widths, weight, H, W):  # pragma: no cover
    r = (len(half_widths) - 1) // 2
    out = np.empty((H, W))
    for i in prange(H):
        acc = np.zeros(W)
        for k in range(2 * r + 1):
            hw = half_widths[k]
            row = padded[i + k]
            s = 0.0
            for t in range(r - hw, r + hw + 1):
                s += row[t]
            acc[0] += s
            for j in range(1, W):
                s += row[j + r + hw] - row[j - 1 + r - hw]
                acc[j] += s
        for j in range(W):
            out[i, j] = acc[j] * weight
    return out


def disc_convolve(field, half_widths, weight, pad_value=0.0, impl=None):
    """Convolve a 2D field with a uniform disc kernel described by its
    per-row half widths. Values outside the grid read `pad_value`."""
    H, W = field.shape
    r = (len(half_widths) - 1) // 2
    padded = _pad2d(np.ascontiguousarray(field, dtype=np.float64), r, pad_value)
    use_numba = backend.USE_NUMBA if impl is None else (impl == "numba")
    if use_numba:
        return _disc_conv_numba(padded, half_widths, float(weight), H, W)
    return _disc_conv_numpy(padded, half_widths, float(weight), H, W)


# ---------------------------------------------------------------------------
# general tap convolution (truncated Gaussian)


def _tap_conv_numpy(padded, offs, weights, r, H, W):
    acc = np.zeros((H, W))
    for (dy, dx), w in zip(offs, weights):
        acc += w * padded[r + dy:r + dy + H, r + dx:r + dx + W]
    return acc


@njit(parallel=True, cache=True)
def _tap_conv_numba(padded, offs, weights, r, H, W):  # pragma: no cover
    out = np.empty((H, W))
    n = offs.shape[0]
    for i in prange(H):
        for j in range(W):
            s = 0.0
            for t in range(n):
                s += weights[t] * padded[i + r + offs[t, 0], j + r + offs[t, 1]]
            out[i, j] = s
    return out


def tap_convolve(field, offsets, weights, pad_value=0.0, impl=None):
    """Convolve with an arbitrary symmetric tap set (offset, weight) list."""
    H, W = field.shape
    r = int(np.abs(offsets).max()) if len(offsets) else 0
    padded = _pad2d(np.ascontiguousarray(field, dtype=np.float64), r, pad_value)
    use_numba = backend.USE_NUMBA if impl is None else (impl == "numba")
    if use_numba:
        return _tap_conv_numba(padded, offsets, weights, r, H, W)
    return _tap_conv_numpy(padded, offsets, weights, r, H, W)


# ---------------------------------------------------------------------------
# simplex projection of column vectors


def _project_columns_numpy(x):
    C = x.shape[0]
    s = np.sort(x, axis=0)[::-1]
    cs = np.cumsum(s, axis=0)
    j = np.arange(1, C + 1)[:, None]
    cond = s + (1.0 - cs) / j > 0.0
    rho = C - 1 - np.argmax(cond[::-1], axis=0)
    t = (cs[rho, np.arange(x.shape[1])] - 1.0) / (rho + 1.0)
    return np.maximum(x - t[None, :], 0.0)


@njit(parallel=True, cache=True)
def _project_columns_numba(x):  # pragma: no cover
    C, N = x.shape
    out = np.empty((C, N))
    for n in prange(N):
        s = np.empty(C)
        for i in range(C):
            s[i] = x[i, n]
        # insertion sort, descending; C is small (number of classes + 1)
        for i in range(1, C):
            key = s[i]
            j = i - 1
            while j >= 0 and s[j] < key:
                s[j + 1] = s[j]
                j -= 1
            s[j + 1] = key
        csum = 0.0
        t = 0.0
        for i in range(C):
            csum += s[i]
            cand = (csum - 1.0) / (i + 1.0)
            if s[i] - cand > 0.0:
                t = cand
        for i in range(C):
            v = x[i, n] - t
            out[i, n] = v if v > 0.0 else 0.0
    return out


def project_columns(x, impl=None):
    """Project each column of a (C, N) array onto the probability simplex.

    Uses the sorted-scan rule: with components sorted descending, the shift
    t* is (sum of the leading rho entries - 1) / rho for the largest rho
    keeping all leading entries positive after the shift.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    use_numba = backend.USE_NUMBA if impl is None else (impl == "numba")
    if use_numba:
        return _project_columns_numba(x)
    return _project_columns_numpy(x)
