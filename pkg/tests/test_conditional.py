import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapley_lg import (GaussianInput, LinearGaussianModel,
                        all_conditional_variances, conditional_variance,
                        generate_random_instance, sample_conditional,
                        total_variance, validate_model)
from shapley_lg import subsets
from shapley_lg.conditional import THREADS_ENV_VAR
from conftest import assert_close


def test_empty_and_full_subsets(correlated_p2):
    assert conditional_variance(correlated_p2, 0) == total_variance(correlated_p2)
    assert conditional_variance(correlated_p2, 3) == 0.0


def test_single_conditioner_schur_value():
    # Y = X1, corr 0.6: conditioning on X2 leaves 1 - 0.6**2.
    model = validate_model([1.0, 0.0], [[1.0, 0.6], [0.6, 1.0]])
    value = conditional_variance(model, subsets.encode([2], 2))
    assert value == pytest.approx(0.64, abs=1e-14)


def test_table_p1():
    model = validate_model([2.0], [[3.0]])
    table = all_conditional_variances(model)
    assert_close(table.values, [12.0, 0.0])
    assert table.var_y == 12.0


def test_table_p2_correlated(correlated_p2):
    table = all_conditional_variances(correlated_p2)
    assert_close(table.values, [3.0, 0.75, 0.75, 0.0], tol=1e-14)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_table_entry_zero_is_total_variance(seed):
    model = generate_random_instance(5, seed)
    table = all_conditional_variances(model)
    assert table.values[0] == total_variance(model)
    assert table.values[-1] == 0.0


@given(st.integers(1, 6), st.integers(0, 5000))
@settings(max_examples=40, deadline=None)
def test_monotone_under_inclusion(p, seed):
    model = generate_random_instance(p, seed)
    table = all_conditional_variances(model)
    for j in range(1 << p):
        for i in range(1, p + 1):
            if not subsets.contains(j, i):
                grown = subsets.with_element(j, i)
                assert table.values[grown] <= table.values[j] + 1e-10


@given(st.integers(1, 6), st.integers(0, 5000),
       st.floats(0.1, 10.0, allow_nan=False))
@settings(max_examples=30, deadline=None)
def test_scale_equivariance(p, seed, c):
    model = generate_random_instance(p, seed)
    scaled = validate_model(c * model.beta, model.gamma)
    for j in (0, 1, (1 << p) - 2):
        assert conditional_variance(scaled, j) == pytest.approx(
            c * c * conditional_variance(model, j), rel=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_factor_and_pseudo_paths_agree(seed):
    model = generate_random_instance(6, seed)
    for j in range(1, (1 << 6) - 1):
        a = conditional_variance(model, j, solver="cholesky")
        b = conditional_variance(model, j, solver="pseudo")
        assert b == pytest.approx(a, rel=1e-10, abs=1e-10 * total_variance(model))


def test_singular_conditioning_block_uses_generalized_inverse():
    # X3 is a copy of X1; conditioning on (X1, X3) is conditioning on X1.
    gamma = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    model = validate_model([1.0, 1.0, 0.0], gamma)
    both = conditional_variance(model, subsets.encode([1, 3], 3))
    one = conditional_variance(model, subsets.encode([1], 3))
    assert both == pytest.approx(1.0, abs=1e-12)
    assert one == pytest.approx(1.0, abs=1e-12)


def test_negative_roundoff_is_clamped_with_warning():
    # Covariance built by hand to be indefinite; bypasses validation on purpose.
    gamma = np.array([[1.0, 2.0], [2.0, 1.0]])
    model = LinearGaussianModel(beta=np.array([1.0, 0.0]), gamma=gamma,
                                mu=np.zeros(2))
    with pytest.warns(RuntimeWarning):
        value = conditional_variance(model, subsets.encode([2], 2))
    assert value == 0.0


def test_monte_carlo_cross_check():
    model = generate_random_instance(4, seed=11)
    inp = GaussianInput(mu=np.zeros(4), gamma=model.gamma)
    n = 200_000
    for mask in (1, 6, 9):
        u = subsets.decode(mask, 4)
        draws = sample_conditional(inp, u, np.zeros(len(u)), n, seed=mask)
        rest = [i - 1 for i in range(1, 5) if i not in u]
        y = draws @ model.beta[rest]
        sample_var = float(np.var(y, ddof=1))
        exact = conditional_variance(model, mask)
        se = exact * np.sqrt(2.0 / (n - 1))
        assert abs(sample_var - exact) <= 3 * se


def test_thread_count_does_not_change_results(monkeypatch):
    model = generate_random_instance(7, seed=3)
    serial = all_conditional_variances(model, threads=1)
    threaded = all_conditional_variances(model, threads=4)
    assert np.array_equal(serial.values, threaded.values)
    monkeypatch.setenv(THREADS_ENV_VAR, "3")
    from_env = all_conditional_variances(model)
    assert np.array_equal(serial.values, from_env.values)


def test_mask_out_of_range_rejected(correlated_p2):
    with pytest.raises(ValueError):
        conditional_variance(correlated_p2, 4)
    with pytest.raises(ValueError):
        conditional_variance(correlated_p2, -1)
