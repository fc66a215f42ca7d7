"""Tail integrals of the chi kernel and the upper incomplete gamma function.

Everything downstream (measurement bounds, weight equations, sensitivity)
is built from three integrals over the unnormalized chi kernel
u^{k-1} exp(-u^2/2):

    tail_moment2(z, k) = int_z^inf (u - z)^2 u^{k-1} exp(-u^2/2) du
    tail_moment1(z, k) = int_z^inf (u - z)   u^{k-1} exp(-u^2/2) du
    tail_moment0(z, k) = int_z^inf           u^{k-1} exp(-u^2/2) du

Each is evaluated in closed form by expanding the excess power and
substituting v = u^2/2, which turns every term into an upper incomplete
gamma value. gamma_upper itself uses the standard regime split: a power
series for z < a + 1 and a Lentz continued fraction otherwise.

All functions are pure scalar maps; they hold no state and are safe to
call concurrently. Large z underflows to 0, which is the correct limit.
"""

import math

from ._backend import kernels
from .errors import DomainError

_MAX_SHAPE = 170.0  # Gamma(a) overflows past this


def _check_tail_args(z, k):
    if not k >= 1 or int(k) != k:
        raise DomainError(f"block size k must be a positive integer, got {k!r}")
    if not z >= 0:
        raise DomainError(f"threshold z must be nonnegative, got {z!r}")
    if (k + 2) / 2 > _MAX_SHAPE:
        raise DomainError(f"block size k={k} too large for double precision")


def gamma_upper(a, z):
    """Upper incomplete gamma integral int_z^inf u^(a-1) exp(-u) du.

    Continuous in both arguments; gamma_upper(a, 0) equals Gamma(a).
    """
    if not a > 0:
        raise DomainError(f"shape a must be positive, got {a!r}")
    if not z >= 0:
        raise DomainError(f"lower limit z must be nonnegative, got {z!r}")
    if a > _MAX_SHAPE:
        raise DomainError(f"shape a={a} too large for double precision")
    return kernels.gamma_upper(float(a), float(z))


def tail_moment2(z, k):
    """Quadratic excess tail integral of the chi kernel with k-1 power."""
    _check_tail_args(z, k)
    return kernels.tail_moment2(float(z), int(k))


def tail_moment1(z, k):
    """Linear excess tail integral of the chi kernel with k-1 power."""
    _check_tail_args(z, k)
    return kernels.tail_moment1(float(z), int(k))


def tail_moment0(z, k):
    """Plain tail mass int_z^inf u^(k-1) exp(-u^2/2) du."""
    _check_tail_args(z, k)
    return kernels.tail_moment0(float(z), int(k))


def chi_norm_const(k):
    """Normalizer 2^(k/2-1) Gamma(k/2) of the chi density with k degrees.

    tail_moment2(z, k) / chi_norm_const(k) is the expected squared excess
    of a chi_k variable past z.
    """
    if not k >= 1 or int(k) != k:
        raise DomainError(f"block size k must be a positive integer, got {k!r}")
    return 2.0 ** (k / 2.0 - 1.0) * math.gamma(k / 2.0)
