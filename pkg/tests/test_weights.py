import numpy as np
import pytest

from blockprior import (PriorPartition, chi_norm_const, measurement_bound_weighted,
                        optimal_weight, optimal_weights, separable_objective,
                        tail_moment1, weight_equation_residual,
                        weight_sensitivity, weight_sensitivity_at)
from blockprior.errors import DomainError, UnboundedWeightError

REF_ALPHA = (27 / 50, 9 / 10, 5 / 58)
REF_NORMALIZED = (0.46317, 0.100671, 1.0)


def reference_partition():
    sets = (tuple(range(0, 50)), tuple(range(50, 70)), tuple(range(70, 128)))
    return PriorPartition(q=128, sets=sets, alpha=REF_ALPHA)


def test_fully_reliable_set_is_unpenalized():
    for k in (1, 2, 10, 30):
        assert optimal_weight(1.0, k) == 0.0


def test_reference_weight_triple():
    raw = np.array([optimal_weight(a, 10) for a in REF_ALPHA])
    normalized = raw / raw.max()
    assert np.allclose(normalized, REF_NORMALIZED, atol=5e-5)


def test_weight_equation_residual_random():
    rng = np.random.default_rng(4)
    for _ in range(50):
        alpha = float(rng.uniform(0.005, 1.0))
        k = int(rng.integers(1, 31))
        w = optimal_weight(alpha, k)
        assert abs(weight_equation_residual(w, alpha, k)) <= 1e-12


def test_normalized_weights_for_equal_accuracies_are_ones():
    p = PriorPartition(q=6, sets=((0, 1), (2, 3), (4, 5)), alpha=(0.5, 0.5, 0.5))
    ow = optimal_weights(p, 4)
    assert ow.omega_normalized == (1.0, 1.0, 1.0)
    assert len(set(ow.omega_raw)) == 1


def test_partition_weights_match_scalar_solver():
    ow = optimal_weights(reference_partition(), 10)
    assert np.allclose(ow.omega_normalized, REF_NORMALIZED, atol=5e-5)
    assert max(ow.omega_normalized) == 1.0


def test_scaling_invariance_of_minimized_bound():
    p = reference_partition()
    k, q = 10, 128
    omega = np.array(optimal_weights(p, k).omega_raw)
    base = measurement_bound_weighted(p.alpha, p.rho, k, omega, q=q).m_hat
    scaled = measurement_bound_weighted(p.alpha, p.rho, k, 3.7 * omega, q=q).m_hat
    assert abs(base - scaled) <= 1e-10


def test_weights_do_not_depend_on_set_sizes():
    # same accuracies, different partition geometry
    a = PriorPartition(q=10, sets=(tuple(range(5)), tuple(range(5, 10))),
                       alpha=(0.4, 0.8))
    b = PriorPartition(q=10, sets=(tuple(range(2)), tuple(range(2, 10))),
                       alpha=(0.4, 0.8))
    assert optimal_weights(a, 6).omega_raw == optimal_weights(b, 6).omega_raw


def test_weight_strictly_decreasing_in_accuracy():
    for k in (2, 10, 30):
        grid = np.linspace(0.02, 1.0, 40)
        ws = [optimal_weight(a, k) for a in grid]
        assert all(w1 > w2 for w1, w2 in zip(ws, ws[1:]))
        assert ws[-1] == 0.0


def test_weight_determinism_bitwise():
    assert optimal_weight(0.37, 9) == optimal_weight(0.37, 9)


def test_stationarity_of_separable_objective_at_weights():
    p = reference_partition()
    k = 10
    nu = np.array(optimal_weights(p, k).omega_raw)
    h = 1e-5
    for i in range(p.L):
        up, dn = nu.copy(), nu.copy()
        up[i] += h
        dn[i] -= h
        grad = (separable_objective(up, p.alpha, p.rho, k)
                - separable_objective(dn, p.alpha, p.rho, k)) / (2 * h)
        assert abs(grad) <= 1e-8


def test_zero_accuracy_raises_with_set_index():
    p = PriorPartition(q=4, sets=((0, 1), (2, 3)), alpha=(0.5, 0.0))
    with pytest.raises(UnboundedWeightError) as err:
        optimal_weights(p, 4)
    assert err.value.set_index == 1


def test_zero_accuracy_cap_is_opt_in():
    p = PriorPartition(q=4, sets=((0, 1), (2, 3)), alpha=(0.5, 0.0))
    ow = optimal_weights(p, 4, omega_cap=50.0)
    assert ow.omega_raw[1] == 50.0
    assert ow.omega_normalized[1] == 1.0


def test_weight_domain_errors():
    with pytest.raises(UnboundedWeightError):
        optimal_weight(0.0, 5)
    with pytest.raises(DomainError):
        optimal_weight(1.5, 5)
    with pytest.raises(DomainError):
        weight_sensitivity(1.0, 5)
    with pytest.raises(DomainError):
        weight_sensitivity(0.0, 5)


@pytest.mark.parametrize("k", [2, 10, 30])
@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_sensitivity_matches_finite_difference(alpha, k):
    d = 1e-4
    fd = abs(optimal_weight(alpha + d, k) - optimal_weight(alpha - d, k)) / (2 * d)
    assert weight_sensitivity(alpha, k) == pytest.approx(fd, rel=0.01)


def test_sensitivity_is_the_exposed_weight_level_form():
    for alpha, k in ((0.3, 2), (0.6, 10)):
        w = optimal_weight(alpha, k)
        assert weight_sensitivity(alpha, k) == weight_sensitivity_at(w, k)


def test_sensitivity_steep_below_tenth_then_flat():
    for k in (2, 10, 30):
        steep = weight_sensitivity(0.02, k)
        knee = weight_sensitivity(0.1, k)
        flat1 = weight_sensitivity(0.5, k)
        flat2 = weight_sensitivity(0.9, k)
        assert steep > knee > flat1
        assert steep > 3 * flat1
        assert abs(flat1 - flat2) <= 0.25 * flat1
        # limiting level: the mean of a chi_k variable
        assert flat2 == pytest.approx(tail_moment1(0.0, k) / chi_norm_const(k), rel=0.05)


def test_local_lipschitz_bound_on_weight_map():
    k = 10
    lo, hi = 0.3, 0.34
    grid = np.linspace(lo, hi, 200)
    cmax = max(weight_sensitivity(a, k) for a in grid)
    w = [optimal_weight(a, k) for a in grid]
    for i in range(len(grid)):
        for j in range(i + 1, len(grid)):
            assert abs(w[i] - w[j]) <= cmax * (grid[j] - grid[i]) * (1 + 1e-9)
