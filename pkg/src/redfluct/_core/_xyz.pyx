# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Matrix-free action of the open XYZ chain on a real amplitude vector."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def apply_xyz(const double[::1] x, double[::1] out, int L,
              double c_zz, double c_par, double c_anti):
    """Write H x into ``out``.

    ``c_zz`` multiplies S^z S^z on every bond, ``c_par`` is the amplitude of
    |uu> <-> |dd> and ``c_anti`` the amplitude of |ud> <-> |du>.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, hi, lo, nhi, run, base, partner
    cdef unsigned long long kk, bond_mask
    cdef int j, p, nbonds = L - 1
    cdef double coef, diag_unit = 0.25 * c_zz
    if out.shape[0] != n:
        raise ValueError("output length mismatch")
    if n != (<Py_ssize_t>1 << L):
        raise ValueError("vector length is not 2**L")
    bond_mask = (1ULL << nbonds) - 1ULL
    for k in prange(n, nogil=True, schedule="static"):
        kk = <unsigned long long>k
        # bits of kk ^ (kk >> 1) mark antiparallel bonds
        out[k] = diag_unit * (nbonds - 2 * __builtin_popcountll((kk ^ (kk >> 1)) & bond_mask)) * x[k]
    if c_par == 0.0 and c_anti == 0.0:
        return np.asarray(out)
    for j in range(nbonds):
        run = <Py_ssize_t>1 << j
        nhi = n >> (j + 2)
        for hi in prange(nhi, nogil=True, schedule="static"):
            for p in range(4):
                base = (hi << (j + 2)) | (<Py_ssize_t>p << j)
                partner = base ^ (<Py_ssize_t>3 << j)
                if p == 0 or p == 3:
                    coef = c_par
                else:
                    coef = c_anti
                if coef != 0.0:
                    for lo in range(run):
                        out[base + lo] += coef * x[partner + lo]
    return np.asarray(out)
