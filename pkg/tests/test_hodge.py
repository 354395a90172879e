import numpy as np
import numpy.testing as npt
import pytest

from foliapyn.hodge import (CochainComplex, DimensionMismatchError, betti_numbers, coexact_basis, complex_residual,
                            decomposition_errors, euler_characteristic_check, exact_basis, harmonic_basis,
                            hodge_decompose, kernel_basis, transport, verify_block_structure,
                            verify_transport_identities)
from foliapyn.leaf_complex import Cochain, LeafGrid, LinearMap, exterior_derivative
from foliapyn.potential import random_potential
from foliapyn.witten import DeformationContext


def _tamper_d0(k, d):
    if k != 0:
        return d
    matrix = d.matrix.tolil()
    matrix[0, 0] += 0.5 * abs(d.matrix).max()
    return LinearMap(matrix.tocsr(), d.domain_mass, d.codomain_mass)


def test_betti_numbers(circle, torus):
    assert betti_numbers(circle) == (1, 1)
    assert betti_numbers(torus) == (1, 2, 1)


@pytest.mark.parametrize('epsilon', [0.5, 1., 2., 5.])
def test_betti_numbers_are_deformation_invariant(torus, torus_potential, epsilon):
    assert betti_numbers(torus, epsilon, torus_potential) == (1, 2, 1)


def test_betti_numbers_need_a_potential(torus):
    with pytest.raises(ValueError):
        betti_numbers(torus, 1.)


def test_harmonic_basis_of_circle(circle):
    basis = harmonic_basis(circle, 0)
    assert len(basis) == 1
    npt.assert_allclose(np.abs(basis[0].values), 1.)


def test_deformed_harmonic_basis_is_conjugated_constant(circle, cos_potential):
    ctx = DeformationContext(circle, cos_potential, 2.)
    basis = harmonic_basis(ctx, 0)[0].values
    t = ctx.conjugator(0)
    npt.assert_allclose(np.abs(basis) / np.linalg.norm(basis), t / np.linalg.norm(t), atol=1e-12)


def test_basis_dimensions(torus):
    assert exact_basis(torus, 0).shape[1] == 0
    assert exact_basis(torus, 1).shape[1] == torus.cell_count(0) - 1
    assert coexact_basis(torus, 1).shape[1] == torus.cell_count(2) - 1
    assert coexact_basis(torus, 2).shape[1] == 0
    assert kernel_basis(torus, 1).shape[1] == torus.cell_count(0) - 1 + 2


@pytest.mark.parametrize('epsilon', [0., 1., 5.])
@pytest.mark.parametrize('k', [0, 1, 2])
def test_hodge_decomposition(torus, torus_potential, epsilon, k):
    ctx = DeformationContext(torus, torus_potential, epsilon)
    omegas = np.random.default_rng(k).standard_normal((torus.cell_count(k), 20))
    residuals, orthogonality = decomposition_errors(ctx, k, omegas)
    assert residuals.max() <= 1e-10
    assert orthogonality.max() <= 1e-10


def test_hodge_decompose_exact_form(torus):
    f = Cochain.sample(torus, 0, lambda x: np.sin(2 * np.pi * x[:, 0]) * np.cos(2 * np.pi * x[:, 1]))
    df = exterior_derivative(torus, 0).apply(f)
    split = hodge_decompose(torus, 1, df)
    npt.assert_allclose(split.exact.values, df, atol=1e-10 * abs(df).max())
    npt.assert_allclose(split.harmonic.values, 0., atol=1e-10 * abs(df).max())
    npt.assert_allclose(split.coexact.values, 0., atol=1e-10 * abs(df).max())


def test_hodge_decompose_sums_to_input(torus):
    omega = Cochain(torus, 1, np.random.default_rng(3).standard_normal(torus.cell_count(1)))
    split = hodge_decompose(torus, 1, omega)
    npt.assert_allclose(split.harmonic.values + split.exact.values + split.coexact.values, omega.values,
                        atol=1e-10)
    assert split.residual <= 1e-10
    with pytest.raises(ValueError):
        hodge_decompose(torus, 0, omega)


@pytest.mark.parametrize('epsilon', [0., 1., 5.])
@pytest.mark.parametrize('k', [0, 1])
def test_transport_identities(torus, torus_potential, epsilon, k):
    angles = verify_transport_identities(DeformationContext(torus, torus_potential, epsilon), k)
    assert angles.kernel_angle <= 1e-8
    assert angles.image_angle <= 1e-8
    assert angles.kernel_residual <= 1e-10


@pytest.mark.parametrize('epsilon', [8., 10., 12.])
def test_transport_identities_at_large_epsilon(cos_potential, epsilon):
    # T spans e^-12..e^12 at epsilon=12, the identities must still hold to 1e-8
    grid = LeafGrid(1, (128,), (1 / 128,))
    cx = CochainComplex(grid, DeformationContext(grid, cos_potential, epsilon))
    angles = verify_transport_identities(cx, 0)
    assert angles.kernel_angle <= 1e-8
    assert angles.image_angle <= 1e-8
    assert angles.kernel_residual <= 1e-10
    report = verify_block_structure(cx, 1)
    assert report.zero_block_norm <= 1e-10
    assert report.u_min_singular > 0
    assert report.b_min_singular > 0


@pytest.mark.slow
@pytest.mark.parametrize('epsilon', [0., 0.5, 1., 2., 5.])
@pytest.mark.parametrize('seed', [1, 2, 3, 4, 5])
def test_torus_deformation_at_full_resolution(seed, epsilon):
    grid = LeafGrid(2, (16, 16), (1 / 16, 1 / 16))
    cx = CochainComplex(grid, DeformationContext(grid, random_potential(np.random.default_rng(seed), 2), epsilon))
    assert betti_numbers(cx) == (1, 2, 1)
    for k in (0, 1):
        angles = verify_transport_identities(cx, k)
        assert angles.kernel_angle <= 1e-8
        assert angles.image_angle <= 1e-8
        assert angles.kernel_residual <= 1e-10
    for k in (0, 1, 2):
        report = verify_block_structure(cx, k)
        assert report.zero_block_norm <= 1e-10
        assert report.u_min_singular > 0


def test_transport_identities_need_degree_below_top(torus, torus_potential):
    with pytest.raises(ValueError):
        verify_transport_identities(DeformationContext(torus, torus_potential, 1.), 2)


@pytest.mark.parametrize('k', [0, 1, 2])
def test_block_structure(torus, torus_potential, k):
    report = verify_block_structure(DeformationContext(torus, torus_potential, 2.), k)
    assert report.zero_block_norm <= 1e-10
    assert report.u_min_singular > 0
    if k == 0:
        assert report.b_min_singular is None
    else:
        assert report.b_min_singular > 0


def test_block_structure_at_zero_epsilon_is_identity(torus, torus_potential):
    report = verify_block_structure(DeformationContext(torus, torus_potential, 0.), 1)
    assert report.zero_block_norm <= 1e-14
    npt.assert_allclose(report.u_min_singular, 1.)
    npt.assert_allclose(report.b_min_singular, 1.)


def test_block_structure_dimension_mismatch(circle, cos_potential):
    cx = CochainComplex(circle, DeformationContext(circle, cos_potential, 1.))
    cx._base = CochainComplex(circle, tamper=lambda k, d: LinearMap(d.matrix * 0., d.domain_mass, d.codomain_mass))
    with pytest.raises(DimensionMismatchError):
        verify_block_structure(cx, 0)


def test_euler_characteristic(torus, circle):
    for grid in (torus, circle):
        check = euler_characteristic_check(grid)
        assert check.from_betti == check.from_ranks == 0
        assert sum((-1) ** k * n for k, n in enumerate(check.cell_counts)) == 0


def test_complex_residual(torus, torus_potential):
    ctx = DeformationContext(torus, torus_potential, 5.)
    assert complex_residual(ctx, 0) <= 1e-12
    assert complex_residual(ctx, 1) == 0.


def test_tampered_complex_is_detected(torus):
    cx = CochainComplex(torus).tampered(_tamper_d0)
    assert complex_residual(cx, 0) > 1e-3
    omegas = np.random.default_rng(0).standard_normal((torus.cell_count(1), 10))
    _, orthogonality = decomposition_errors(cx, 1, omegas)
    assert orthogonality.max() > 1e-6


def test_transport(circle, cos_potential):
    report = transport(DeformationContext(circle, cos_potential, 1.), 1)
    assert report.singular_values.shape == (1,)
    assert report.min_singular > 0
    with pytest.raises(ValueError):
        transport(circle, 0)


def test_non_periodic_grid_is_rejected():
    with pytest.raises(ValueError):
        betti_numbers(LeafGrid(1, (8,), (1.,), periodic=False))
