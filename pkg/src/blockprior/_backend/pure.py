"""Pure-Python/numpy fallback for the compiled kernels in _core.

Same functions, same semantics; used when the extension is not built or
when BLOCKPRIOR_BACKEND=python is set.
"""

import math

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 400


def _lower_gamma_series(a, z):
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= z / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(a * math.log(z) - z)


def _upper_gamma_cf(a, z):
    b = z + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(a * math.log(z) - z) * h


def gamma_upper(a, z):
    if z <= 0.0:
        return math.gamma(a)
    if z < a + 1.0:
        return math.gamma(a) - _lower_gamma_series(a, z)
    return _upper_gamma_cf(a, z)


def power_tail(z, p):
    return 2.0 ** ((p - 1.0) / 2.0) * gamma_upper((p + 1.0) / 2.0, z * z / 2.0)


def tail_moment0(z, k):
    return power_tail(z, k - 1.0)


def tail_moment1(z, k):
    return power_tail(z, float(k)) - z * power_tail(z, k - 1.0)


def tail_moment2(z, k):
    return (power_tail(z, k + 1.0)
            - 2.0 * z * power_tail(z, float(k))
            + z * z * power_tail(z, k - 1.0))


def dr_loop(null_proj, x_feas, tau_w, block_len, max_iter, tol, z, x_out,
            trace=None):
    """See _core.dr_loop."""
    q = tau_w.shape[0]
    k = block_len
    converged = False
    change = math.inf
    it = 0
    while it < max_iter:
        it += 1
        x = x_feas + null_proj @ z
        v = 2.0 * x - z
        blocks = v.reshape(q, k)
        nrm = np.linalg.norm(blocks, axis=1)
        scale = np.zeros(q)
        np.divide(tau_w, nrm, out=scale, where=nrm > tau_w)
        u = (np.where(nrm > tau_w, 1.0 - scale, 0.0)[:, None] * blocks).ravel()
        diff = u - x
        change = float(np.linalg.norm(diff))
        z += diff
        if trace is not None:
            trace[it - 1] = change
        if change <= tol * (1.0 + float(np.linalg.norm(x))):
            converged = True
            break
    x_out[:] = x_feas + null_proj @ z
    return it, change, converged
