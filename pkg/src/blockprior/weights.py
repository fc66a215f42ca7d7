"""Optimal per-set weights from prior accuracies, and their sensitivity.

For a set with accuracy alpha and block size k, the optimal weight is the
unique root of

    g(w) = alpha * w - (1 - alpha) * tail_moment1(w, k) / chi_norm_const(k).

g is strictly increasing (the tail moment decreases in w) and g(0) < 0
for alpha < 1, so bisection on a rigorous bracket always terminates; a
Newton polish with the analytic derivative then drives the residual to
~1e-13. The root depends only on (alpha, k), never on the set size.

The sensitivity of the root to the reported accuracy is the magnitude of
the implicit derivative dw/dalpha, evaluated in closed form from the same
tail integrals (weight_sensitivity_at). Note: the published "simplified"
expression for this constant does not agree with its own derivation (it
is off by up to ~70% for k >= 10); this module uses the exact form, which
matches central finite differences of the root to ~1e-8.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnboundedWeightError
from .specfun import chi_norm_const, tail_moment0, tail_moment1

_BISECT_TOL = 1e-6
_RESIDUAL_TOL = 0.5e-13
_MAX_NEWTON = 60


def weight_equation_residual(omega, alpha, k):
    """g(omega); zero exactly at the optimal weight."""
    return alpha * omega - (1.0 - alpha) * tail_moment1(omega, k) / chi_norm_const(k)


def optimal_weight(alpha, k):
    """Unique optimal weight for one prior set with accuracy alpha."""
    if alpha > 1.0:
        raise DomainError(f"accuracy alpha={alpha} exceeds 1")
    if not alpha > 0.0:
        raise UnboundedWeightError(
            f"accuracy alpha={alpha} admits no finite weight (the equation "
            "forces the weight to infinity)")
    if alpha == 1.0:
        return 0.0
    c = chi_norm_const(k)
    ratio = (1.0 - alpha) / alpha

    def g(w):
        return alpha * w - (1.0 - alpha) * tail_moment1(w, k) / c

    lo, hi = 0.0, ratio * tail_moment1(0.0, k) / c + 1.0
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)
    for _ in range(_MAX_NEWTON):
        gw = g(w)
        if abs(gw) <= _RESIDUAL_TOL:
            break
        deriv = alpha + (1.0 - alpha) * tail_moment0(w, k) / c
        step = gw / deriv
        w_new = w - step
        if not lo <= w_new <= hi:
            w_new = 0.5 * (lo + hi)
        if g(w_new) < 0.0:
            lo = w_new
        else:
            hi = w_new
        if w_new == w:
            break
        w = w_new
    return w


@dataclass(frozen=True)
class OptimalWeights:
    """Per-set optimal weights, raw and rescaled to max component 1."""

    omega_raw: tuple
    omega_normalized: tuple
    k: int
    alpha: tuple


def optimal_weights(partition, k, omega_cap=None):
    """Solve the weight equation for every set of a prior partition.

    A set with alpha = 0 has no finite weight: by default this raises
    UnboundedWeightError carrying the set index; passing omega_cap
    substitutes that finite cap instead.
    """
    raw = []
    for i, a in enumerate(partition.alpha):
        try:
            raw.append(optimal_weight(a, k))
        except UnboundedWeightError as exc:
            if omega_cap is None:
                raise UnboundedWeightError(
                    f"set {i} has accuracy 0 and no finite optimal weight; "
                    "drop it or pass omega_cap", set_index=i) from exc
            raw.append(float(omega_cap))
    top = max(raw)
    if top == 0.0:
        normalized = tuple(1.0 for _ in raw)  # all sets fully reliable
    else:
        normalized = tuple(w / top for w in raw)
    return OptimalWeights(omega_raw=tuple(raw), omega_normalized=normalized,
                          k=k, alpha=tuple(partition.alpha))


def weight_sensitivity_at(omega, k):
    """|d omega / d alpha| expressed through the weight itself.

    Exact implicit-derivative form: (M + omega c)^2 / (c K) with
    M = tail_moment1(omega, k), K = int_omega^inf u^k exp(-u^2/2) du and
    c = chi_norm_const(k).
    """
    if not omega >= 0.0:
        raise DomainError(f"weight omega={omega} must be nonnegative")
    c = chi_norm_const(k)
    m1 = tail_moment1(omega, k)
    full_tail = tail_moment0(omega, k + 1)  # integrand power k
    if full_tail == 0.0:
        raise DomainError(f"omega={omega} is too deep in the tail for a finite value")
    return (m1 + omega * c) ** 2 / (c * full_tail)


def weight_sensitivity(alpha, k):
    """Sensitivity of the optimal weight to the reported accuracy."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"sensitivity needs 0 < alpha < 1, got {alpha}")
    return weight_sensitivity_at(optimal_weight(alpha, k), k)
