import numpy as np
import numpy.testing as npt
import pytest

from foliapyn.leaf_complex import (Cochain, LeafGrid, codifferential, dual_grid, exterior_derivative, hodge_star,
                                   inner_product, laplacian, star_codifferential)
from foliapyn.tools import observed_order


def test_cell_counts():
    grid = LeafGrid(2, (5, 7), (0.2, 1 / 7))
    assert [grid.cell_count(k) for k in range(3)] == [35, 70, 35]
    assert [b.axes for b in grid.blocks(1)] == [(0,), (1,)]


def test_non_periodic_cell_counts():
    grid = LeafGrid(2, (5, 4), (1., 1.), periodic=False)
    assert [grid.cell_count(k) for k in range(3)] == [20, 4 * 4 + 5 * 3, 12]
    with pytest.raises(ValueError):
        grid.require_periodic()


@pytest.mark.parametrize('args', [
    (3, (8, 8, 8), (1., 1., 1.)),
    (1, (2,), (0.5,)),
    (1, (8,), (0.,)),
    (2, (8,), (1.,)),
])
def test_invalid_grid(args):
    with pytest.raises(ValueError):
        LeafGrid(*args)


def test_cell_index_wraps_and_clips():
    periodic = LeafGrid(1, (6,), (1.,))
    assert periodic.cell_index(0, (), [[-1], [6]]).tolist() == [5, 0]
    open_grid = LeafGrid(1, (6,), (1.,), periodic=False)
    assert open_grid.cell_index(1, (0,), [[-1], [4], [5]]).tolist() == [-1, 4, -1]


def test_barycenters():
    grid = LeafGrid(2, (4, 4), (0.25, 0.25))
    edges = grid.barycenters(1)
    npt.assert_allclose(edges[0], [0.125, 0.])
    npt.assert_allclose(edges[16], [0., 0.125])
    npt.assert_allclose(grid.barycenters(2)[0], [0.125, 0.125])
    with pytest.raises(ValueError):
        edges[0, 0] = 1.


def test_derivative_of_linear_function_on_open_grid():
    grid = LeafGrid(1, (10,), (0.1,), periodic=False)
    f = Cochain.sample(grid, 0, lambda x: 3 * x[:, 0])
    npt.assert_allclose(exterior_derivative(grid, 0).apply(f), 3.)


@pytest.mark.parametrize('periodic', [True, False])
def test_complex_property(periodic):
    grid = LeafGrid(2, (6, 5), (0.3, 0.2), periodic=periodic)
    d0 = exterior_derivative(grid, 0)
    d1 = exterior_derivative(grid, 1)
    assert (d1 @ d0).norm() <= 1e-12 * d0.norm() * d1.norm()


@pytest.mark.parametrize('grid', [LeafGrid(2, (8, 8), (1 / 8, 1 / 8)), LeafGrid(2, (6, 9), (0.5, 0.1))])
def test_codifferential_is_mass_adjoint(grid):
    rng = np.random.default_rng(1)
    for k in range(2):
        d = exterior_derivative(grid, k)
        delta = codifferential(grid, k)
        for _ in range(100):
            a = rng.standard_normal(grid.cell_count(k))
            b = rng.standard_normal(grid.cell_count(k + 1))
            left = inner_product(grid, k + 1, d.apply(a), b)
            right = inner_product(grid, k, a, delta.apply(b))
            assert abs(left - right) <= 1e-10 * max(1., abs(left))


@pytest.mark.parametrize('n', [8, 64])
def test_circulant_spectrum(n):
    grid = LeafGrid(1, (n,), (1 / n,))
    values = np.linalg.eigvalsh(laplacian(grid, 0).dense())
    expected = np.sort((2 - 2 * np.cos(2 * np.pi * np.arange(n) / n)) * n ** 2)
    npt.assert_allclose(values, expected, rtol=0, atol=1e-10 * expected.max())


def test_refinement_order():
    spacings, errors = [], []
    for n in (16, 32, 64, 128):
        grid = LeafGrid(1, (n,), (1 / n,))
        f = Cochain.sample(grid, 0, lambda x: np.sin(2 * np.pi * x[:, 0]))
        exact = 4 * np.pi ** 2 * f.values
        spacings.append(1 / n)
        errors.append(np.max(np.abs(laplacian(grid, 0).apply(f) - exact)))
    assert observed_order(spacings, errors) >= 1.8


def test_laplacian_factor(torus):
    lap = laplacian(torus, 1)
    factor = lap.factor
    npt.assert_allclose((factor.adjoint() @ factor).dense(), lap.dense(), atol=1e-9 * abs(lap.dense()).max())


def test_hodge_star_ratios():
    grid = LeafGrid(1, (10,), (0.1,))
    npt.assert_allclose(hodge_star(grid, 0).matrix.diagonal(), 0.1)
    npt.assert_allclose(hodge_star(grid, 1).matrix.diagonal(), 10.)


def test_dual_grid_is_shifted(torus):
    dual = dual_grid(torus)
    npt.assert_allclose(dual.origin, (1 / 16, 1 / 16))
    npt.assert_allclose(dual.barycenters(2)[0], torus.barycenters(0)[0] + (1 / 8, 1 / 8))


@pytest.mark.parametrize('p, k, sign', [(1, 0, -1), (2, 0, -1), (2, 1, 1)])
def test_star_codifferential(p, k, sign):
    grid = LeafGrid(p, (6,) * p, (1 / 6,) * p)
    check = star_codifferential(grid, k)
    assert check.residual < 1e-12
    assert check.empirical_sign == sign
    assert check.stated_sign == (-1) ** (p * (k + 1))


def test_cochain_validation(circle):
    with pytest.raises(ValueError):
        Cochain(circle, 0, np.zeros(3))
    c = Cochain.constant(circle, 1, 2.)
    npt.assert_allclose(c.norm(), 2.)
    with pytest.raises(ValueError):
        c.values[0] = 1.
