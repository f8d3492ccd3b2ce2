import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cldmd.exceptions import InvalidArgumentError
from cldmd.kernels import (GaussianKernel, KernelOperator, augmented_pair_integrand,
                           eval_scalar, feedback_pair_integrand)

# exp(-1/15) and exp(-25/15), 30-digit mpmath evaluations.
E_1_15 = 0.935506985031617737730433791647
E_25_15 = 0.188875602837561838460556295128

K15 = GaussianKernel(15.0)
OP = KernelOperator.diagonal(K15, 1)

points = arrays(float, 3, elements=st.floats(-10, 10))


def test_self_similarity():
    assert eval_scalar(K15, [0.3, -2.0], [0.3, -2.0]) == 1.0


def test_unit_distance():
    assert abs(eval_scalar(K15, [0, 0], [1, 0]) - E_1_15) <= 1e-15


def test_distance_five():
    assert abs(eval_scalar(K15, [0, 0], [3, 4]) - E_25_15) <= 1e-15


def test_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        eval_scalar(K15, [0, 0], [0, 0, 0])


def test_width_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        GaussianKernel(0.0)


@given(points, points, st.floats(0.1, 100))
def test_scalar_properties(x, y, width):
    k = GaussianKernel(width)
    v = eval_scalar(k, x, y)
    assert v == eval_scalar(k, y, x)
    assert 0 <= v <= 1


def test_gram_psd(rng):
    X = rng.uniform(-2, 2, (40, 2))
    G = K15.matrix(X, X)
    assert np.array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() >= -1e-10 * np.trace(G)


def test_matrix_matches_scalar(rng):
    X, Y = rng.standard_normal((5, 2)), rng.standard_normal((4, 2))
    M = K15.matrix(X, Y)
    for i in range(5):
        for j in range(4):
            assert abs(M[i, j] - eval_scalar(K15, X[i], Y[j])) <= 1e-15


def test_operator_diagonal():
    A = OP.eval_operator([0, 0], [1, 0])
    np.testing.assert_allclose(A, E_1_15 * np.eye(2), rtol=1e-15)
    assert OP.is_diagonal and OP.control_dim == 1


def test_operator_rejects_indefinite():
    with pytest.raises(InvalidArgumentError):
        KernelOperator(K15, 2, np.diag([1.0, -1.0]))


def test_augmented_zero_controls():
    assert augmented_pair_integrand(OP, [0, 0], [0], [1, 0], [0]) == pytest.approx(E_1_15, abs=1e-15)


def test_augmented_same_state():
    assert augmented_pair_integrand(OP, [0.2, 0.1], [1], [0.2, 0.1], [1]) == 2.0


def test_augmented_oracle():
    v = augmented_pair_integrand(OP, [0, 0], [2], [1, 0], [3])
    assert abs(v - 7 * E_1_15) <= 1e-14


def test_augmented_wrong_control_dim():
    with pytest.raises(InvalidArgumentError):
        augmented_pair_integrand(OP, [0, 0], [1, 2], [0, 0], [1])


@given(points.map(lambda a: a[:2]), st.floats(-3, 3), points.map(lambda a: a[:2]), st.floats(-3, 3))
def test_augmented_symmetry(xi, ui, xj, uj):
    a = augmented_pair_integrand(OP, xi, [ui], xj, [uj])
    b = augmented_pair_integrand(OP, xj, [uj], xi, [ui])
    assert a == pytest.approx(b, rel=1e-15, abs=1e-300)


def test_general_path_matches_diagonal(rng):
    general = KernelOperator(K15, 2, np.eye(2))
    for _ in range(20):
        xi, xj = rng.standard_normal(2), rng.standard_normal(2)
        ui, uj = rng.standard_normal(1), rng.standard_normal(1)
        a = augmented_pair_integrand(OP, xi, ui, xj, uj)
        b = augmented_pair_integrand(general, xi, ui, xj, uj)
        assert abs(a - b) <= 1e-14


def test_general_operator_value():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    op = KernelOperator(K15, 2, A)
    v = augmented_pair_integrand(op, [0, 0], [2], [1, 0], [3])
    assert abs(v - E_1_15 * np.array([1, 2]) @ A @ np.array([1, 3])) <= 1e-14


def test_feedback_zero_mu():
    assert feedback_pair_integrand(OP, [1, 0], [0], [0, 0], [5]) == pytest.approx(E_1_15, abs=1e-15)


def test_feedback_coincides_with_augmented(rng):
    xi, xj, ui, uj = rng.standard_normal(2), rng.standard_normal(2), rng.standard_normal(1), rng.standard_normal(1)
    assert feedback_pair_integrand(OP, xi, ui, xj, uj) == augmented_pair_integrand(OP, xi, ui, xj, uj)


def test_feedback_oracle():
    v = feedback_pair_integrand(OP, [1, 0], [-2], [0, 0], [1])
    assert abs(v + E_1_15) <= 1e-14


def test_to_dict():
    assert K15.to_dict() == {"type": "gaussian", "width": 15.0}
    assert OP.to_dict()["type"] == "diagonal"
