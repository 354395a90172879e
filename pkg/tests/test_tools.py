import numpy as np
import numpy.testing as npt
import pytest

from foliapyn.tools import as_columns, lin_fit, max_column_angle, observed_order, singular_values


def test_lin_fit():
    x = np.arange(5.)
    _, y_fit, m, c, std = lin_fit(x, 3 * x + 1)
    npt.assert_allclose([m, c], [3., 1.])
    npt.assert_allclose(y_fit, 3 * x + 1)
    assert std == pytest.approx(0., abs=1e-12)


def test_observed_order():
    spacings = np.array([0.1, 0.05, 0.025])
    assert observed_order(spacings, 7 * spacings ** 2) == pytest.approx(2.)
    with pytest.raises(ValueError):
        observed_order([0.1], [0.01])
    with pytest.raises(ValueError):
        observed_order([0.1, 0.05], [0.01, 0.])


def test_max_column_angle():
    basis = np.array([[1., 0.], [0., 1.], [0., 0.]])
    assert max_column_angle(basis, basis) == pytest.approx(0., abs=1e-12)
    assert max_column_angle(np.array([[1.], [0.], [1.]]), basis) == pytest.approx(np.pi / 4)
    assert max_column_angle(basis, basis[:, :1], dimension=2) == np.pi / 2
    assert max_column_angle(np.zeros((3, 0)), np.zeros((3, 0))) == 0.
    assert max_column_angle(np.zeros((3, 1)), basis) == 0.


def test_max_column_angle_ignores_column_scale():
    # columns spread over 1e-12..1e12 stay exactly inside the plane
    columns = np.array([[1e12, 0.], [1e12, 1e-12], [0., 0.]])
    basis = np.array([[1., 0.], [0., 1.], [0., 0.]])
    assert max_column_angle(columns, basis, dimension=2) == pytest.approx(0., abs=1e-15)


def test_as_columns_and_singular_values():
    columns = as_columns([np.array([1., 0.]), np.array([0., 2.])], 2)
    npt.assert_allclose(singular_values(columns), [2., 1.])
    assert as_columns([], 4).shape == (4, 0)
    assert singular_values(np.zeros((0, 3))).size == 0
    with pytest.raises(ValueError):
        as_columns([np.zeros(3)], 2)
