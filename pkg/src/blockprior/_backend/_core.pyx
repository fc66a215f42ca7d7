# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: incomplete-gamma tail integrals and the splitting-solver
inner loop. Mirrors the API of blockprior._backend.pure."""

import numpy as np

from libc.math cimport exp, fabs, log, sqrt, tgamma, INFINITY
from scipy.linalg.cython_blas cimport dgemv

cdef double _EPS = 1e-16
cdef double _TINY = 1e-300
cdef int _MAX_TERMS = 400


cdef double _lower_gamma_series(double a, double z):
    # sum_{n>=0} z^n / (a (a+1) ... (a+n)), scaled by z^a e^{-z}
    cdef double ap = a
    cdef double term = 1.0 / a
    cdef double total = term
    cdef int n
    for n in range(_MAX_TERMS):
        ap += 1.0
        term *= z / ap
        total += term
        if fabs(term) < fabs(total) * _EPS:
            return total * exp(a * log(z) - z)
    return total * exp(a * log(z) - z)


cdef double _upper_gamma_cf(double a, double z):
    # Lentz continued fraction for the (unregularized) upper tail
    cdef double b = z + 1.0 - a
    cdef double c = 1.0 / _TINY
    cdef double d = 1.0 / b
    cdef double h = d
    cdef double an, delta
    cdef int i
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if fabs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < _EPS:
            break
    return exp(a * log(z) - z) * h


cdef double _gamma_upper(double a, double z):
    if z <= 0.0:
        return tgamma(a)
    if z < a + 1.0:
        return tgamma(a) - _lower_gamma_series(a, z)
    return _upper_gamma_cf(a, z)


cdef double _power_tail(double z, double p):
    # int_z^inf u^p exp(-u^2/2) du
    return 2.0 ** ((p - 1.0) / 2.0) * _gamma_upper((p + 1.0) / 2.0, z * z / 2.0)


def gamma_upper(double a, double z):
    return _gamma_upper(a, z)


def power_tail(double z, double p):
    return _power_tail(z, p)


def tail_moment0(double z, int k):
    return _power_tail(z, k - 1.0)


def tail_moment1(double z, int k):
    return _power_tail(z, <double>k) - z * _power_tail(z, k - 1.0)


def tail_moment2(double z, int k):
    return (_power_tail(z, k + 1.0)
            - 2.0 * z * _power_tail(z, <double>k)
            + z * z * _power_tail(z, k - 1.0))


def dr_loop(double[:, ::1] null_proj not None,
            double[::1] x_feas not None,
            double[::1] tau_w not None,
            int block_len,
            long max_iter,
            double tol,
            double[::1] z not None,
            double[::1] x_out not None,
            double[::1] trace=None):
    """Douglas-Rachford iteration for min sum_b w_b ||x_b|| s.t. x feasible.

    The affine projection is x = x_feas + null_proj @ z; tau_w holds the
    per-block shrink thresholds (step * weight). z is updated in place,
    x_out receives the projection of the final z. Returns
    (iterations_run, last_change, converged).
    """
    cdef int n = x_feas.shape[0]
    cdef int q = tau_w.shape[0]
    cdef int k = block_len
    cdef double one = 1.0, zero = 0.0
    cdef int inc = 1
    cdef char trans = b'T'
    cdef bint want_trace = trace is not None

    xbuf = np.empty(n)
    ubuf = np.empty(n)
    vbuf = np.empty(n)
    cdef double[::1] x = xbuf
    cdef double[::1] u = ubuf
    cdef double[::1] v = vbuf

    cdef long it = 0
    cdef bint converged = False
    cdef double change = INFINITY
    cdef double nrm, scale, xnorm, diff, tau
    cdef int b, j, off

    while it < max_iter:
        it += 1
        # x = x_feas + null_proj (as stored, row-major) @ z
        for j in range(n):
            x[j] = x_feas[j]
        dgemv(&trans, &n, &n, &one, &null_proj[0, 0], &n, &z[0], &inc,
              &one, &x[0], &inc)
        for j in range(n):
            v[j] = 2.0 * x[j] - z[j]
        # u = blockwise shrink of v
        for b in range(q):
            off = b * k
            nrm = 0.0
            for j in range(off, off + k):
                nrm += v[j] * v[j]
            nrm = sqrt(nrm)
            tau = tau_w[b]
            if nrm <= tau:
                for j in range(off, off + k):
                    u[j] = 0.0
            else:
                scale = 1.0 - tau / nrm
                for j in range(off, off + k):
                    u[j] = scale * v[j]
        change = 0.0
        xnorm = 0.0
        for j in range(n):
            diff = u[j] - x[j]
            change += diff * diff
            xnorm += x[j] * x[j]
            z[j] += diff
        change = sqrt(change)
        xnorm = sqrt(xnorm)
        if want_trace:
            trace[it - 1] = change
        if change <= tol * (1.0 + xnorm):
            converged = True
            break

    for j in range(n):
        x_out[j] = x_feas[j]
    dgemv(&trans, &n, &n, &one, &null_proj[0, 0], &n, &z[0], &inc,
          &one, &x_out[0], &inc)
    return it, change, converged
