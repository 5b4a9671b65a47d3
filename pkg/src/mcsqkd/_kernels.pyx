# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the Fock-propagation and coincidence-accumulation kernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport lgamma, exp

cnp.import_array()

cdef int[4][2] _CLICK = [[0, 1], [2, 3], [0, 3], [2, 1]]
cdef int[4][2] _SILENT = [[2, 3], [0, 1], [2, 1], [0, 3]]


cdef inline double complex _cpow(double complex z, int k) nogil:
    cdef double complex r = 1.0
    cdef int i
    for i in range(k):
        r = r * z
    return r


cdef _expand(int n, const double complex[:] w, cnp.int64_t[:] flat, double complex[:] coef, Py_ssize_t base):
    """Fill mixed-radix monomial indices and coefficients of (w . a)^n."""
    cdef int a0, a1, a2, a3
    cdef Py_ssize_t t = 0
    cdef double lfn = lgamma(n + 1.0)
    for a0 in range(n + 1):
        for a1 in range(n + 1 - a0):
            for a2 in range(n + 1 - a0 - a1):
                a3 = n - a0 - a1 - a2
                coef[t] = exp(lfn - lgamma(a0 + 1.0) - lgamma(a1 + 1.0)
                              - lgamma(a2 + 1.0) - lgamma(a3 + 1.0)) \
                    * _cpow(w[0], a0) * _cpow(w[1], a1) * _cpow(w[2], a2) * _cpow(w[3], a3)
                flat[t] = a0 + base * (a1 + base * (a2 + base * a3))
                t += 1


def fock_product(int n, int m, u, v):
    cdef const double complex[:] uu = np.ascontiguousarray(u, dtype=np.complex128)
    cdef const double complex[:] vv = np.ascontiguousarray(v, dtype=np.complex128)
    cdef Py_ssize_t base = n + m + 1
    cdef Py_ssize_t size = base * base * base * base
    cdef Py_ssize_t ta = (n + 1) * (n + 2) * (n + 3) // 6
    cdef Py_ssize_t tb = (m + 1) * (m + 2) * (m + 3) // 6
    cdef cnp.int64_t[:] fa = np.empty(ta, dtype=np.int64)
    cdef cnp.int64_t[:] fb = np.empty(tb, dtype=np.int64)
    cdef double complex[:] ca = np.empty(ta, dtype=np.complex128)
    cdef double complex[:] cb = np.empty(tb, dtype=np.complex128)
    _expand(n, uu, fa, ca, base)
    _expand(m, vv, fb, cb, base)

    cdef double[:] re = np.zeros(size)
    cdef double[:] im = np.zeros(size)
    cdef cnp.uint8_t[:] hit = np.zeros(size, dtype=np.uint8)
    cdef Py_ssize_t i, j, idx
    cdef double complex cc
    with nogil:
        for i in range(ta):
            for j in range(tb):
                cc = ca[i] * cb[j]
                idx = fa[i] + fb[j]
                re[idx] += cc.real
                im[idx] += cc.imag
                hit[idx] = 1

    cdef double lfn = lgamma(n + 1.0)
    cdef double lfm = lgamma(m + 1.0)
    cdef Py_ssize_t count = 0
    for i in range(size):
        count += hit[i]
    configs_arr = np.empty((count, 4), dtype=np.int64)
    probs_arr = np.empty(count)
    cdef cnp.int64_t[:, :] configs = configs_arr
    cdef double[:] probs = probs_arr
    cdef Py_ssize_t rem
    cdef int k0, k1, k2, k3
    j = 0
    for i in range(size):
        if hit[i]:
            rem = i
            k0 = rem % base
            rem //= base
            k1 = rem % base
            rem //= base
            k2 = rem % base
            k3 = rem // base
            configs[j, 0] = k0
            configs[j, 1] = k1
            configs[j, 2] = k2
            configs[j, 3] = k3
            probs[j] = (re[i] * re[i] + im[i] * im[i]) * exp(
                lgamma(k0 + 1.0) + lgamma(k1 + 1.0) + lgamma(k2 + 1.0) + lgamma(k3 + 1.0)
                - lfn - lfm)
            j += 1
    return configs_arr, probs_arr


def segment_pattern_sums(configs, probs, offsets, click, silence):
    cdef const cnp.int64_t[:, :] k = np.ascontiguousarray(configs, dtype=np.int64)
    cdef const double[:] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef const cnp.int64_t[:] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[:] c = np.ascontiguousarray(click, dtype=np.float64)
    cdef const double[:] s = np.ascontiguousarray(silence, dtype=np.float64)
    cdef Py_ssize_t nseg = off.shape[0] - 1
    out_arr = np.zeros((nseg, 4))
    cdef double[:, :] out = out_arr
    cdef Py_ssize_t g, r
    cdef int j
    cdef double acc[4]
    with nogil:
        for g in range(nseg):
            acc[0] = 0.0
            acc[1] = 0.0
            acc[2] = 0.0
            acc[3] = 0.0
            for r in range(off[g], off[g + 1]):
                for j in range(4):
                    acc[j] += p[r] * c[k[r, _CLICK[j][0]]] * c[k[r, _CLICK[j][1]]] \
                        * s[k[r, _SILENT[j][0]]] * s[k[r, _SILENT[j][1]]]
            for j in range(4):
                out[g, j] = acc[j]
    return out_arr
