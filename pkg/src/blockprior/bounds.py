"""Measurement bounds for block-sparse recovery, per block of size k.

The central object is the dilation objective: the expected squared
distance (normalized by the block count q) from a standard Gaussian
vector to the dilated subdifferential of the (weighted) group norm at a
signal with block-sparsity fraction sigma. Its infimum over the dilation
t is the normalized measurement bound; a recovery program needs about
q * bound measurements, with a tightness band attached.

Known minor inconsistency in the literature this follows: the separable
single-variable objective is sometimes displayed with a per-block cost of
1 instead of the full block size k; this module uses k throughout, which
is the version consistent with the weighted objective it must agree with.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .specfun import chi_norm_const, tail_moment2

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_T_TOL = 1e-10


@dataclass(frozen=True)
class BoundEvaluation:
    """A normalized bound with its minimizing dilation and tightness band.

    band_low = m_hat - err and band_high = m_hat; the truth lies in
    [band_low, band_high]. When no band applies (s = 0 or unknown q),
    both endpoints equal m_hat.
    """

    m_hat: float
    t_star: float
    band_low: float
    band_high: float


def _golden_min(f, lo, hi, xtol):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, f(t)


def _minimize_dilation(f, t_max):
    # expand the bracket until the minimizer is interior
    for _ in range(12):
        t, val = _golden_min(f, 0.0, t_max, _T_TOL)
        if t < t_max * (1.0 - 1e-6):
            return t, val
        t_max *= 2.0
    raise NumericalError("dilation minimizer not interior even after bracket expansion")


def bound_objective(sigma, k, t):
    """Dilation objective for the unit-weight group norm."""
    if not 0.0 <= sigma <= 1.0:
        raise DomainError(f"sparsity fraction sigma={sigma} outside [0, 1]")
    if not t >= 0.0:
        raise DomainError(f"dilation t={t} must be nonnegative")
    return sigma * (k + t * t) + (1.0 - sigma) / chi_norm_const(k) * tail_moment2(t, k)


def bound_objective_weighted(alpha, rho, k, t, omega):
    """Dilation objective with per-set weights omega on the prior sets."""
    alpha, rho, omega = _check_sets(alpha, rho, omega)
    if not t >= 0.0:
        raise DomainError(f"dilation t={t} must be nonnegative")
    c = chi_norm_const(k)
    total = 0.0
    for a, r, o in zip(alpha, rho, omega):
        total += r * (a * (k + (t * o) ** 2) + (1.0 - a) / c * tail_moment2(t * o, k))
    return total


def _check_sets(alpha, rho, omega=None):
    alpha = np.asarray(alpha, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if alpha.shape != rho.shape or alpha.ndim != 1 or alpha.size == 0:
        raise DomainError("alpha and rho must be equal-length nonempty vectors")
    if np.any(alpha < 0) or np.any(alpha > 1):
        raise DomainError("accuracies must lie in [0, 1]")
    if np.any(rho <= 0):
        raise DomainError("set fractions must be positive")
    if abs(rho.sum() - 1.0) > 1e-9:
        raise DomainError(f"set fractions must sum to 1, got {rho.sum()}")
    if omega is None:
        return alpha, rho
    omega = np.asarray(omega, dtype=float)
    if omega.shape != alpha.shape:
        raise DomainError("omega must match alpha in length")
    if np.any(omega < 0):
        raise DomainError("weights must be nonnegative")
    return alpha, rho, omega


def measurement_bound(sigma, k, q=None, s=None):
    """Normalized measurement bound for the unit-weight program.

    q and s (defaulting to sigma * q) feed the tightness band 2/sqrt(s q);
    the band is omitted when s = 0 or q is unknown.
    """
    if not 0.0 <= sigma <= 1.0:
        raise DomainError(f"sparsity fraction sigma={sigma} outside [0, 1]")
    if s is None and q is not None:
        s = sigma * q
    if sigma == 0.0:
        m_hat, t_star = 0.0, math.inf
    elif sigma == 1.0:
        m_hat, t_star = float(k), 0.0
    else:
        t_star, m_hat = _minimize_dilation(lambda t: bound_objective(sigma, k, t),
                                           10.0 * math.sqrt(k))
    err = 2.0 / math.sqrt(s * q) if (q and s) else 0.0
    return BoundEvaluation(m_hat=m_hat, t_star=t_star,
                           band_low=m_hat - err, band_high=m_hat)


def measurement_bound_weighted(alpha, rho, k, omega, q=None):
    """Normalized measurement bound for the weighted program.

    The band is 2/sqrt(q L), attached when q is given.
    """
    alpha, rho, omega = _check_sets(alpha, rho, omega)
    sigma = float(alpha @ rho)
    if sigma == 0.0:
        m_hat, t_star = 0.0, math.inf
    elif sigma == 1.0 or omega.max() == 0.0:
        # zero weights never shrink anything: the objective is flat at k
        m_hat, t_star = float(k), 0.0
    else:
        t_star, m_hat = _minimize_dilation(
            lambda t: bound_objective_weighted(alpha, rho, k, t, omega),
            10.0 * math.sqrt(k) / omega.max())
    err = 2.0 / math.sqrt(q * alpha.size) if q else 0.0
    return BoundEvaluation(m_hat=m_hat, t_star=t_star,
                           band_low=m_hat - err, band_high=m_hat)


def separable_objective(nu, alpha, rho, k):
    """Single-variable form of the weighted objective after nu = t * omega."""
    alpha, rho = _check_sets(alpha, rho)
    nu = np.asarray(nu, dtype=float)
    if nu.shape != alpha.shape:
        raise DomainError("nu must match alpha in length")
    if np.any(nu < 0):
        raise DomainError("nu must be nonnegative")
    c = chi_norm_const(k)
    total = 0.0
    for v, a, r in zip(nu, alpha, rho):
        total += r * (a * (v * v + k) + (1.0 - a) / c * tail_moment2(v, k))
    return total


def per_set_bound(alpha_i, rho_i, k):
    """Infimum of one separable term; returns (value, minimizing nu)."""
    if not 0.0 <= alpha_i <= 1.0 or not rho_i > 0:
        raise DomainError("need alpha in [0,1] and rho > 0")
    if alpha_i == 0.0:
        return 0.0, math.inf
    if alpha_i == 1.0:
        return rho_i * k, 0.0
    c = chi_norm_const(k)

    def f(v):
        return rho_i * (alpha_i * (v * v + k)
                        + (1.0 - alpha_i) / c * tail_moment2(v, k))

    nu, val = _minimize_dilation(f, 10.0 * math.sqrt(k))
    return val, nu


def minimize_separable(alpha, rho, k):
    """Coordinate-wise infimum of the separable objective.

    Returns (total, nu_stars); by separability the total equals the
    double infimum over (t, omega) of the weighted objective.
    """
    alpha, rho = _check_sets(alpha, rho)
    vals, nus = [], []
    for a, r in zip(alpha, rho):
        v, nu = per_set_bound(a, r, k)
        vals.append(v)
        nus.append(nu)
    return float(sum(vals)), np.array(nus)


def measurement_thresholds(delta, n, eta):
    """Success/failure measurement thresholds around a statistical dimension.

    Returns (delta + r, delta - r) with r = sqrt(8 log(4/eta) n): at or
    above the first, recovery succeeds with probability >= 1 - eta; at or
    below the second it fails with probability >= 1 - eta.
    """
    if not 0.0 <= delta <= n:
        raise DomainError(f"delta={delta} outside [0, n]")
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"tolerance eta={eta} outside (0, 1]")
    radical = math.sqrt(8.0 * math.log(4.0 / eta) * n)
    return delta + radical, delta - radical


def required_measurements(delta, n, eta):
    """Measurement count guaranteeing recovery with probability 1 - eta."""
    hi, _ = measurement_thresholds(delta, n, eta)
    return int(min(max(math.ceil(hi), 1), n))
