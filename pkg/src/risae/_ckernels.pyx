# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, M_PI

cnp.import_array()

cdef double SEARCH_TIE_RTOL = 1e-12


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int popcount64(long long v) nogil:
    return __builtin_popcountll(<unsigned long long>v)


def exhaustive_search(const double complex[::1] cascade, double complex h_d, long levels):
    cdef Py_ssize_t n = cascade.shape[0]
    cdef Py_ssize_t el, i
    cdef long long total = 1
    for el in range(n):
        total *= levels
    tre_np = np.empty((n, levels))
    tim_np = np.empty((n, levels))
    cdef double[:, ::1] tre = tre_np
    cdef double[:, ::1] tim = tim_np
    cdef double ang
    for el in range(n):
        for i in range(levels):
            ang = 2.0 * M_PI * i / levels
            tre[el, i] = cascade[el].real * cos(ang) - cascade[el].imag * sin(ang)
            tim[el, i] = cascade[el].real * sin(ang) + cascade[el].imag * cos(ang)
    digits_np = np.zeros(n, dtype=np.int64)
    cdef long long[::1] digits = digits_np
    best_np = np.empty(n, dtype=np.int64)
    cdef long long[::1] best_digits = best_np
    # prefix sums: pre_re[el] = re(h_d + sum_{m < el} term[m])
    pre_re_np = np.empty(n + 1)
    pre_im_np = np.empty(n + 1)
    cdef double[::1] pre_re = pre_re_np
    cdef double[::1] pre_im = pre_im_np
    cdef double best = -1.0, threshold, val
    cdef long long count
    cdef Py_ssize_t changed
    cdef int pass_no
    for pass_no in range(2):
        if pass_no == 1:
            threshold = best * (1.0 - SEARCH_TIE_RTOL)
        for el in range(n):
            digits[el] = 0
        changed = 0
        pre_re[0] = h_d.real
        pre_im[0] = h_d.imag
        for count in range(total):
            for el in range(changed, n):
                pre_re[el + 1] = pre_re[el] + tre[el, digits[el]]
                pre_im[el + 1] = pre_im[el] + tim[el, digits[el]]
            val = sqrt(pre_re[n] * pre_re[n] + pre_im[n] * pre_im[n])
            if pass_no == 0:
                if val > best:
                    best = val
            elif val >= threshold:
                for el in range(n):
                    best_digits[el] = digits[el]
                return best_np, val
            # odometer increment, last element fastest
            el = n - 1
            while el >= 0:
                digits[el] += 1
                if digits[el] < levels:
                    break
                digits[el] = 0
                el -= 1
            changed = el if el > 0 else 0  # el == -1 only after the last point
    raise AssertionError("unreachable: maximum not found on second pass")


def ml_detect(const double complex[::1] y, const double complex[::1] h,
              const double complex[::1] constellation):
    cdef Py_ssize_t s = y.shape[0], m = constellation.shape[0], i, c
    out_np = np.empty(s, dtype=np.int64)
    cdef long long[::1] out = out_np
    cdef double d, best, er, ei, hr, hi
    cdef long long arg
    with nogil:
        for i in range(s):
            hr = h[i].real
            hi = h[i].imag
            best = 1e308
            arg = 0
            for c in range(m):
                er = y[i].real - (hr * constellation[c].real - hi * constellation[c].imag)
                ei = y[i].imag - (hr * constellation[c].imag + hi * constellation[c].real)
                d = er * er + ei * ei
                if d < best:
                    best = d
                    arg = c
            out[i] = arg
    return out_np


def bit_errors(const long long[::1] a, const long long[::1] b):
    cdef Py_ssize_t i
    cdef long long total = 0
    with nogil:
        for i in range(a.shape[0]):
            total += popcount64(a[i] ^ b[i])
    return total


def ml_detect_errors(const double complex[::1] y, const double complex[::1] h,
                     const double complex[::1] constellation, const long long[::1] labels):
    cdef Py_ssize_t s = y.shape[0], m = constellation.shape[0], i, c
    cdef double d, best, er, ei, hr, hi
    cdef long long arg, total = 0
    with nogil:
        for i in range(s):
            hr = h[i].real
            hi = h[i].imag
            best = 1e308
            arg = 0
            for c in range(m):
                er = y[i].real - (hr * constellation[c].real - hi * constellation[c].imag)
                ei = y[i].imag - (hr * constellation[c].imag + hi * constellation[c].real)
                d = er * er + ei * ei
                if d < best:
                    best = d
                    arg = c
            total += popcount64(arg ^ labels[i])
    return total


ctypedef fused real:
    float
    double


def adam_step(real[::1] p, const real[::1] g, real[::1] m, real[::1] v,
              double b1, double b2, double step_size, double inv_c2, double eps):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef real c1 = <real>(1.0 - b1)
    cdef real c2 = <real>(1.0 - b2)
    cdef real rb1 = <real>b1, rb2 = <real>b2, rs = <real>step_size, ri = <real>inv_c2, re = <real>eps
    cdef real d
    with nogil:
        for i in range(n):
            m[i] = m[i] * rb1 + g[i] * c1
            v[i] = v[i] * rb2 + (g[i] * g[i]) * c2
            d = <real>sqrt(v[i]) * ri + re
            p[i] -= (m[i] / d) * rs
