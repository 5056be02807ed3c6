"""Numpy implementation of the XYZ kernel, used when the extension is absent."""
import numpy as np

_DIAG_CACHE = {}


def _bond_sign_sum(L):
    # sum_j (+1 if sites j, j+1 parallel else -1), cached per L
    out = _DIAG_CACHE.get(L)
    if out is None:
        k = np.arange(1 << L, dtype=np.int64)
        d = (k ^ (k >> 1)) & ((1 << (L - 1)) - 1)
        anti = np.zeros(1 << L, dtype=np.int64)
        for j in range(L - 1):
            anti += (d >> j) & 1
        out = ((L - 1) - 2 * anti).astype(np.float64)
        if L <= 20:
            _DIAG_CACHE[L] = out
    return out


def apply_xyz(x, out, L, c_zz, c_par, c_anti):
    n = x.shape[0]
    if out.shape[0] != n:
        raise ValueError("output length mismatch")
    if n != 1 << L:
        raise ValueError("vector length is not 2**L")
    np.multiply(x, 0.25 * c_zz * _bond_sign_sum(L), out=out)
    for j in range(L - 1):
        # axes: higher sites, site j+1, site j, lower sites
        xv = x.reshape(1 << (L - j - 2), 2, 2, 1 << j)
        ov = out.reshape(1 << (L - j - 2), 2, 2, 1 << j)
        flipped = xv[:, ::-1, ::-1, :]
        if c_par:
            ov[:, 0, 0, :] += c_par * flipped[:, 0, 0, :]
            ov[:, 1, 1, :] += c_par * flipped[:, 1, 1, :]
        if c_anti:
            ov[:, 0, 1, :] += c_anti * flipped[:, 0, 1, :]
            ov[:, 1, 0, :] += c_anti * flipped[:, 1, 0, :]
    return out
