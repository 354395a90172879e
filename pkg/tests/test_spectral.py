import numpy as np
import numpy.testing as npt
import pytest
import scipy.sparse as sparse

from foliapyn.leaf_complex import LeafGrid, LinearMap, laplacian
from foliapyn.potential import TrigPotential
from foliapyn.spectral import (AmbiguousKernelError, DENSE_LIMIT, KernelPolicy, cluster_count, kernel_dimension,
                               kernel_vectors, lowest_eigenvalues, numerical_rank, spectral_flow, spectrum_report)
from foliapyn.witten import DeformationContext, witten_laplacian


def test_lowest_eigenvalues(small_circle):
    values = lowest_eigenvalues(laplacian(small_circle, 0), 3)
    expected = np.sort((2 - 2 * np.cos(2 * np.pi * np.arange(8) / 8)) * 64)[:3]
    npt.assert_allclose(values, expected, atol=1e-10 * 256)


def test_lowest_eigenvalues_range(small_circle):
    with pytest.raises(ValueError):
        lowest_eigenvalues(laplacian(small_circle, 0), 9)


@pytest.mark.parametrize('grid, betti', [
    (LeafGrid(1, (64,), (1 / 64,)), (1, 1)),
    (LeafGrid(2, (8, 8), (1 / 8, 1 / 8)), (1, 2, 1)),
    (LeafGrid(2, (6, 9), (0.5, 0.1)), (1, 2, 1)),
])
def test_kernel_dimension(grid, betti):
    reports = [kernel_dimension(laplacian(grid, k)) for k in range(grid.dim_p + 1)]
    assert tuple(r.kernel_dim for r in reports) == betti
    assert all(not r.ambiguous and r.method == 'factored' for r in reports)


def test_iterative_path():
    grid = LeafGrid(2, (48, 48), (1 / 48, 1 / 48))
    assert grid.cell_count(0) > DENSE_LIMIT
    report = kernel_dimension(laplacian(grid, 0))
    assert report.method == 'iterative'
    assert report.kernel_dim == 1
    assert not report.ambiguous
    npt.assert_allclose(report.eigenvalues[1], (2 - 2 * np.cos(2 * np.pi / 48)) * 48 ** 2, rtol=1e-8)


def test_dense_path_on_operator_without_factor(small_circle):
    lap = laplacian(small_circle, 0)
    plain = LinearMap(lap.matrix, lap.domain_mass, lap.codomain_mass)
    report = kernel_dimension(plain)
    assert report.method == 'dense'
    assert report.kernel_dim == 1


def test_asymmetric_operator_is_rejected():
    op = LinearMap(sparse.csr_matrix(np.array([[1., 1.], [0., 1.]])), np.ones(2), np.ones(2))
    with pytest.raises(ValueError, match='not symmetric'):
        lowest_eigenvalues(op, 1)


def test_spectrum_report():
    policy = KernelPolicy.default()
    report = spectrum_report([0., 1e-20, 1., 2.], 2., 'dense', policy)
    assert report.kernel_dim == 2
    assert report.threshold == pytest.approx(2e-10)
    assert report.gap_ratio == pytest.approx(1e20)
    assert not report.ambiguous

    ambiguous = spectrum_report([1e-11, 1e-9, 5e-7], 1., 'dense', policy)
    assert ambiguous.kernel_dim == 1
    assert ambiguous.gap_ratio == pytest.approx(100.)
    assert ambiguous.ambiguous

    empty = spectrum_report([0., 0.], 0., 'dense', policy)
    assert empty.kernel_dim == 2
    assert not empty.ambiguous


def test_factored_floor_is_used():
    policy = KernelPolicy.default()
    report = spectrum_report([1e-20, 1.], 1., 'factored', policy)
    assert report.kernel_dim == 0
    assert report.threshold == pytest.approx(1e-24)


def test_incomplete_window_is_ambiguous():
    report = spectrum_report([0., 0., 0.], 1., 'iterative', KernelPolicy.default(), complete=False, dimension=100)
    assert report.kernel_dim == 3
    assert report.ambiguous


def test_ambiguous_kernel_error():
    report = spectrum_report([1e-11, 1e-9, 5e-7], 1., 'dense', KernelPolicy.default())
    error = AmbiguousKernelError([report])
    assert error.reports == [report]
    assert '100' in str(error)


def test_kernel_vectors_are_mass_orthonormal(torus):
    lap = laplacian(torus, 1)
    report, basis = kernel_vectors(lap)
    assert basis.shape == (torus.cell_count(1), 2)
    gram = basis.T @ (torus.mass(1)[:, None] * basis)
    npt.assert_allclose(gram, np.eye(2), atol=1e-10)
    npt.assert_allclose(lap.matrix @ basis, 0., atol=1e-8)


def test_numerical_rank():
    assert numerical_rank([1., 1e-13, 0.5]) == 2
    assert numerical_rank([]) == 0
    assert numerical_rank([0., 0.]) == 0


@pytest.mark.parametrize('k', [0, 1])
def test_semiclassical_cluster(cos_potential, k):
    grid = LeafGrid(1, (128,), (1 / 128,))
    for epsilon in (8., 10.):
        report = kernel_dimension(witten_laplacian(DeformationContext(grid, cos_potential, epsilon), k))
        count, gap = cluster_count(report)
        assert count == 1
        # the cluster is the roundoff level kernel, cut off from the rest by the floor
        assert gap == np.inf
        assert not report.ambiguous


def test_cluster_count_finds_low_lying_eigenvalues():
    report = spectrum_report(np.array([0., 1e-6, 2e-6, 1., 2., 3.]), 3., 'dense', KernelPolicy.default())
    assert report.kernel_dim == 1
    assert cluster_count(report) == (3, pytest.approx(1e-6 ** -1 / 2))


def test_kernel_cut_moves_to_a_clear_gap_above_the_floor():
    policy = KernelPolicy.default()
    report = spectrum_report([1e-11, 2e-10, 1., 2.], 1., 'dense', policy)
    assert report.kernel_dim == 2
    assert report.threshold == pytest.approx(2e-10)
    assert report.gap_ratio == pytest.approx(5e9)
    assert not report.ambiguous

    # the largest gap wins, even between two candidates
    report = spectrum_report([1e-11, 2e-10, 5e-9, 1.], 1., 'dense', policy)
    assert report.kernel_dim == 3
    assert report.gap_ratio == pytest.approx(2e8)

    # a clear gap at the floor keeps small nonzero eigenvalues out of the kernel
    report = spectrum_report([1e-32, 5e-22, 1e-16], 1., 'factored', policy)
    assert report.kernel_dim == 1
    assert report.threshold == pytest.approx(1e-24)

    # candidates are only looked for close above the floor
    report = spectrum_report([0., 1e-6, 1.], 1., 'dense', policy)
    assert report.kernel_dim == 1
    assert report.threshold == pytest.approx(1e-10)


def test_cluster_of_roundoff_kernel_has_infinite_gap():
    policy = KernelPolicy.default()
    report = spectrum_report([0., 1., 2., 3.], 3., 'dense', policy)
    assert cluster_count(report) == (1, np.inf)
    trivial = spectrum_report([1., 2., 3.], 3., 'dense', policy)
    assert cluster_count(trivial) == (0, np.inf)
    above_floor = spectrum_report([1e-11, 2e-10, 1., 2.], 1., 'dense', policy)
    assert cluster_count(above_floor) == (2, pytest.approx(5e9))


def test_spectral_flow(circle, cos_potential):
    frame = spectral_flow(circle, cos_potential, [0., 1., 2., 20.], 0, count=4)
    assert list(frame.columns) == ['epsilon', 'degree', 'kernel_dim', 'threshold', 'gap_ratio', 'ambiguous',
                                   'cluster_count', 'cluster_gap_ratio', 'eigenvalues', 'error']
    assert frame['kernel_dim'].tolist()[:3] == [1, 1, 1]
    assert all(len(v) == 4 for v in frame['eigenvalues'][:3])
    assert frame['error'][:3].isna().all()
    assert 'overflow budget' in frame['error'][3]


def test_spectral_flow_rejects_descending(circle, cos_potential):
    with pytest.raises(ValueError):
        spectral_flow(circle, cos_potential, [1., 0.], 0)


def test_zero_potential_spectrum_does_not_move(circle):
    phi = TrigPotential.zero(1)
    frame = spectral_flow(circle, phi, [0., 5.], 1, count=3)
    npt.assert_allclose(frame['eigenvalues'][0], frame['eigenvalues'][1])


def _witten_torus(torus, torus_potential):
    return witten_laplacian(DeformationContext(torus, torus_potential, 2.), 1)


def test_eigenvalues_do_not_depend_on_cell_order(torus, torus_potential):
    lap = _witten_torus(torus, torus_potential)
    n = lap.shape[0]
    order = np.random.default_rng(7).permutation(n)
    reordered = LinearMap(lap.matrix[order][:, order], lap.domain_mass[order], lap.codomain_mass[order])
    expected = lowest_eigenvalues(lap, n)
    npt.assert_allclose(lowest_eigenvalues(reordered, n), expected, atol=1e-10 * expected.max())
    assert kernel_dimension(reordered).kernel_dim == kernel_dimension(lap).kernel_dim == 2


@pytest.mark.parametrize('factor', [1e-3, 2.5, 1e4])
def test_eigenvalues_scale_with_the_operator(torus, torus_potential, factor):
    lap = _witten_torus(torus, torus_potential)
    n = lap.shape[0]
    scaled = LinearMap(factor * lap.matrix, lap.domain_mass, lap.codomain_mass)
    expected = factor * lowest_eigenvalues(lap, n)
    npt.assert_allclose(lowest_eigenvalues(scaled, n), expected, atol=1e-10 * expected.max())
    assert kernel_dimension(scaled).kernel_dim == 2


@pytest.mark.parametrize('with_factor', [True, False])
def test_full_spectrum_sums_to_the_trace(torus, torus_potential, with_factor):
    lap = _witten_torus(torus, torus_potential)
    if not with_factor:
        lap = LinearMap(lap.matrix, lap.domain_mass, lap.codomain_mass)
    values = lowest_eigenvalues(lap, lap.shape[0])
    assert values.sum() == pytest.approx(lap.symmetrized().diagonal().sum(), rel=1e-10)
