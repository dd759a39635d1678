# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: overflow-safe weighted log-sum-exp reductions.

These fuse the exponential/reduction passes that dominate the Armijo line
search.  Sums are Kahan-compensated so the absolute error of a log-mass
stays O(eps) independent of the node count; the line search relies on
that to measure decreases near machine precision.  The pure-numpy module
``_kernels_py`` mirrors the contract.
"""

from libc.math cimport exp, log, INFINITY

IS_COMPILED = True


def logsumexp_weighted(const double[::1] v, const double[::1] w):
    """log(sum_i w_i * exp(v_i)) with w_i >= 0."""
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double m = -INFINITY
    cdef double s = 0.0, comp = 0.0, y, t
    for i in range(n):
        if w[i] > 0.0 and v[i] > m:
            m = v[i]
    if m == -INFINITY:
        return -INFINITY
    for i in range(n):
        if w[i] > 0.0:
            y = w[i] * exp(v[i] - m) - comp
            t = s + y
            comp = (t - s) - y
            s = t
    return m + log(s)


def logsumexp_weighted_line(const double[::1] u, const double[::1] d,
                            double t, const double[::1] w):
    """log(sum_i w_i * exp(u_i + t * d_i)) with w_i >= 0."""
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double m = -INFINITY
    cdef double e
    cdef double s = 0.0, comp = 0.0, y, acc
    for i in range(n):
        if w[i] > 0.0:
            e = u[i] + t * d[i]
            if e > m:
                m = e
    if m == -INFINITY:
        return -INFINITY
    for i in range(n):
        if w[i] > 0.0:
            y = w[i] * exp(u[i] + t * d[i] - m) - comp
            acc = s + y
            comp = (acc - s) - y
            s = acc
    return m + log(s)


def logsumexp_weighted_scaled(const double[::1] d, double t,
                              const double[::1] w):
    """log(sum_i w_i * exp(t * d_i)) with w_i >= 0."""
    cdef Py_ssize_t i, n = d.shape[0]
    cdef double m = -INFINITY
    cdef double e
    cdef double s = 0.0, comp = 0.0, y, acc
    for i in range(n):
        if w[i] > 0.0:
            e = t * d[i]
            if e > m:
                m = e
    if m == -INFINITY:
        return -INFINITY
    for i in range(n):
        if w[i] > 0.0:
            y = w[i] * exp(t * d[i] - m) - comp
            acc = s + y
            comp = (acc - s) - y
            s = acc
    return m + log(s)


def exp_shift(const double[::1] v, double shift, double[::1] out):
    """out_i = exp(v_i - shift)."""
    cdef Py_ssize_t i, n = v.shape[0]
    for i in range(n):
        out[i] = exp(v[i] - shift)
    return out.base if out.base is not None else out


def weighted_exp_shift(const double[::1] logw, const double[::1] v,
                       double shift, const double[::1] scale,
                       double[::1] out):
    """out_i = exp(logw_i + v_i - shift) * scale_i (zero where logw = -inf)."""
    cdef Py_ssize_t i, n = v.shape[0]
    for i in range(n):
        out[i] = exp(logw[i] + v[i] - shift) * scale[i]
    return out.base if out.base is not None else out
