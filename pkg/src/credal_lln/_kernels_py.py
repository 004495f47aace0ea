"""Numpy implementation of the kernels in ``_kernels.pyx``.

numpy's ``Philox`` bit generator is Philox4x64-10 with a 256-bit counter that
it increments *before* producing each block. Starting it one below
``(trial0, step, 0, 0)`` therefore yields the blocks for consecutive trials of
one step; the first word of each block is the draw for that trial.
"""
import numpy as np

BACKEND = "python"

_MASK64 = (1 << 64) - 1
_MASK256 = (1 << 256) - 1
_M0 = 0xD2E7470EE14C6C93
_M1 = 0xCA5A826395121157
_W0 = 0x9E3779B97F4A7C15
_W1 = 0xBB67AE8584CAA73B
_TWO_M53 = 2.0**-53


def philox4x64(counter, key):
    c = [int(v) & _MASK64 for v in counter]
    k0, k1 = (int(v) & _MASK64 for v in key)
    for r in range(10):
        if r:
            k0 = (k0 + _W0) & _MASK64
            k1 = (k1 + _W1) & _MASK64
        p0 = _M0 * c[0]
        p1 = _M1 * c[2]
        c = [(p1 >> 64) ^ c[1] ^ k0, p1 & _MASK64, (p0 >> 64) ^ c[3] ^ k1, p0 & _MASK64]
    return c


def philox_raw(seed, trial0, count, step):
    start = (((int(step) << 64) | int(trial0)) - 1) & _MASK256
    counter = np.array([(start >> (64 * w)) & _MASK64 for w in range(4)], dtype=np.uint64)
    key = np.array([int(seed) & _MASK64, 0], dtype=np.uint64)
    bits = np.random.Philox(counter=counter, key=key)
    return bits.random_raw(4 * int(count))[0::4].copy()


def uniforms(seed, trial0, count, step):
    return (philox_raw(seed, trial0, count, step) >> np.uint64(11)).astype(np.float64) * _TWO_M53


def draw_step(seed, trial0, count, step, cdf, pick=None):
    cdf = np.asarray(cdf, dtype=np.float64)
    if cdf.ndim != 2:
        raise ValueError("cdf must be a 2-d array of candidate rows")
    if pick is None:
        if cdf.shape[0] != 1:
            raise ValueError("several candidate rows need a pick array")
        rows = np.broadcast_to(cdf[0, :-1], (int(count), cdf.shape[1] - 1))
    else:
        pick = np.asarray(pick, dtype=np.int64)
        if pick.shape != (int(count),):
            raise ValueError("pick must have one entry per trial")
        rows = cdf[pick, :-1]
    u = uniforms(seed, trial0, count, step)
    return np.count_nonzero(rows <= u[:, None], axis=1).astype(np.int64)
