"""Hodge theory of a (deformed) leafwise complex.

Every computation here works in orthonormal coordinates ``x_s = M^1/2 x``,
where mass orthogonal projections become Euclidean ones. Bases returned to
callers are converted back to cochain values and are mass orthonormal.

The harmonic, exact and coexact parts of a cochain are computed as three
independent projections, onto the kernel of the Laplacian, the image of
``d^{k-1}`` and the image of ``delta^k``. Their orthogonality and the
residual of their sum are therefore genuine checks of the complex.
"""

import logging
from collections import namedtuple

import numpy as np
import scipy.linalg

from .leaf_complex import Cochain, LeafGrid, assemble_laplacian, exterior_derivative
from .spectral import AmbiguousKernelError, KernelPolicy, kernel_dimension, kernel_vectors, numerical_rank
from .tools import max_column_angle, singular_values
from .witten import DeformationContext, DimensionMismatchError, deformed_differential, kernel_transport

log = logging.getLogger(__name__)

__all__ = ['AmbiguousKernelError', 'DimensionMismatchError', 'CochainComplex', 'HodgeSplit', 'TransportAngles',
           'BlockReport', 'harmonic_basis', 'exact_basis', 'coexact_basis', 'kernel_basis', 'hodge_decompose',
           'decomposition_errors', 'betti_numbers', 'verify_transport_identities', 'verify_block_structure',
           'euler_characteristic_check', 'complex_residual']

HodgeSplit = namedtuple('HodgeSplit', ['harmonic', 'exact', 'coexact', 'residual', 'orthogonality'])

TransportAngles = namedtuple('TransportAngles', ['kernel_angle', 'image_angle', 'kernel_residual'])

BlockReport = namedtuple('BlockReport', ['degree', 'epsilon', 'zero_block_norm', 'u_min_singular',
                                         'b_min_singular', 'dims'])

EulerCheck = namedtuple('EulerCheck', ['from_betti', 'from_ranks', 'cell_counts'])


class CochainComplex(object):
    """Uniform view of a leaf complex, deformed or not.

    :param grid: The leaf grid.
    :param context: Optional :class:`~foliapyn.witten.DeformationContext`.
    :param tamper: Optional callable ``(k, LinearMap) -> LinearMap`` applied to
                   every differential. Used to inject faults in self checks.
    """

    def __init__(self, grid, context=None, tamper=None):
        grid.require_periodic()
        self._grid = grid
        self._context = context
        self._tamper = tamper
        self._differentials = {}
        self._svds = {}
        self._harmonic = {}
        self._base = None

    @staticmethod
    def of(source):
        if isinstance(source, CochainComplex):
            return source
        if isinstance(source, DeformationContext):
            return CochainComplex(source.grid, source)
        if isinstance(source, LeafGrid):
            return CochainComplex(source)
        raise ValueError('Cannot build a cochain complex from {}'.format(type(source).__name__))

    @property
    def grid(self):
        return self._grid

    @property
    def context(self):
        return self._context

    @property
    def dim_p(self):
        return self._grid.dim_p

    @property
    def epsilon(self):
        return self._context.epsilon if self._context is not None else 0.

    def tampered(self, tamper):
        return CochainComplex(self._grid, self._context, tamper)

    def undeformed(self):
        if self._context is None:
            return self
        if self._base is None:
            self._base = CochainComplex(self._grid, None, self._tamper)
        return self._base

    def differential(self, k):
        """``d^k`` (deformed if the complex has a context), ``None`` outside
        ``0 <= k < p``."""
        if not 0 <= k < self.dim_p:
            return None
        if k not in self._differentials:
            if self._context is not None:
                d = deformed_differential(self._context, k)
            else:
                d = exterior_derivative(self._grid, k)
            if self._tamper is not None:
                d = self._tamper(k, d)
            self._differentials[k] = d
        return self._differentials[k]

    def laplacian(self, k):
        return assemble_laplacian(self.differential(k), self.differential(k - 1))

    def singular_decomposition(self, k):
        """SVD of ``d^k`` in orthonormal coordinates, cached."""
        if k not in self._svds:
            self._svds[k] = scipy.linalg.svd(self.differential(k).symmetrized().toarray(), full_matrices=True)
        return self._svds[k]

    def kernel_vectors(self, k, policy):
        """Spectrum report and kernel basis of the Laplacian, cached per policy."""
        if (k, policy) not in self._harmonic:
            self._harmonic[(k, policy)] = kernel_vectors(self.laplacian(k), policy)
        return self._harmonic[(k, policy)]

    def conjugator(self, k):
        if self._context is None:
            return np.ones(self._grid.cell_count(k))
        return self._context.conjugator(k)

    def sqrt_mass(self, k):
        return np.sqrt(self._grid.mass(k))


def _check_degree(cx, k):
    if not 0 <= k <= cx.dim_p:
        raise ValueError('Degree {} out of range 0..{}'.format(k, cx.dim_p))


def _rank(s, policy):
    return numerical_rank(s, policy)


def _harmonic_sym(cx, k, policy):
    report, basis = cx.kernel_vectors(k, policy)
    if report.ambiguous:
        raise AmbiguousKernelError([report])
    return report, basis * cx.sqrt_mass(k)[:, None]


def _exact_sym(cx, k, policy):
    n = cx.grid.cell_count(k)
    if cx.differential(k - 1) is None:
        return np.zeros((n, 0))
    u, s, _ = cx.singular_decomposition(k - 1)
    return u[:, :_rank(s, policy)]


def _coexact_sym(cx, k, policy):
    n = cx.grid.cell_count(k)
    if cx.differential(k) is None:
        return np.zeros((n, 0))
    _, s, vt = cx.singular_decomposition(k)
    return vt[:_rank(s, policy)].T


def _kernel_sym(cx, k, policy):
    n = cx.grid.cell_count(k)
    if cx.differential(k) is None:
        return np.eye(n)
    _, s, vt = cx.singular_decomposition(k)
    return vt[_rank(s, policy):].T


def _to_cochains(cx, k, sym):
    values = sym / cx.sqrt_mass(k)[:, None]
    return [Cochain(cx.grid, k, values[:, i]) for i in range(values.shape[1])]


def harmonic_basis(source, k, policy=None):
    """Mass orthonormal basis of the kernel of the (Witten) Laplacian.

    :param source: :class:`~foliapyn.leaf_complex.LeafGrid`,
                   :class:`~foliapyn.witten.DeformationContext` or
                   :class:`CochainComplex`.
    :return: List of :class:`~foliapyn.leaf_complex.Cochain`.
    :raises AmbiguousKernelError: When the spectrum does not separate the
                                  kernel.
    """
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    _check_degree(cx, k)
    _, sym = _harmonic_sym(cx, k, policy)
    return _to_cochains(cx, k, sym)


def exact_basis(source, k, policy=None):
    """Mass orthonormal basis of the image of ``d^{k-1}`` as array of cochain
    values, shape ``(n_k, rank)``."""
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    _check_degree(cx, k)
    return _exact_sym(cx, k, policy) / cx.sqrt_mass(k)[:, None]


def coexact_basis(source, k, policy=None):
    """Mass orthonormal basis of the image of ``delta^k``, shape ``(n_k, rank)``."""
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    _check_degree(cx, k)
    return _coexact_sym(cx, k, policy) / cx.sqrt_mass(k)[:, None]


def kernel_basis(source, k, policy=None):
    """Mass orthonormal basis of the kernel of ``d^k``, shape ``(n_k, dim)``."""
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    _check_degree(cx, k)
    return _kernel_sym(cx, k, policy) / cx.sqrt_mass(k)[:, None]


def _project(bases, x):
    """Harmonic, exact and coexact parts of the columns of ``x``, with the
    relative residuals and orthogonality defects per column."""
    parts = [basis @ (basis.T @ x) for basis in bases]
    norms = np.linalg.norm(x, axis=0)
    safe = np.where(norms > 0, norms, 1.)
    residuals = np.linalg.norm(x - sum(parts), axis=0) / safe
    overlaps = [np.abs(np.sum(parts[i] * parts[j], axis=0)) for i, j in ((0, 1), (0, 2), (1, 2))]
    orthogonality = np.max(overlaps, axis=0) / safe ** 2
    residuals[norms == 0] = 0.
    orthogonality[norms == 0] = 0.
    return parts, residuals, orthogonality


def _bases(cx, k, policy):
    return _harmonic_sym(cx, k, policy)[1], _exact_sym(cx, k, policy), _coexact_sym(cx, k, policy)


def hodge_decompose(source, k, omega, policy=None):
    """Split a k-cochain into harmonic, exact and coexact parts.

    :param omega: :class:`~foliapyn.leaf_complex.Cochain` or array of values.
    :return: :class:`HodgeSplit` with the three parts as cochains, the
             relative residual ``|omega - h - e - c| / |omega|`` and the
             largest relative pairwise inner product of the parts.
    """
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    _check_degree(cx, k)
    if isinstance(omega, Cochain) and omega.degree != k:
        raise ValueError('Degree mismatch: expected {}-cochain, got degree {}'.format(k, omega.degree))
    values = np.asarray(getattr(omega, 'values', omega), dtype=float)
    if values.shape != (cx.grid.cell_count(k),):
        raise ValueError('Cochain needs {} values, got {}'.format(cx.grid.cell_count(k), values.size))

    sqrt_mass = cx.sqrt_mass(k)
    parts, residuals, orthogonality = _project(_bases(cx, k, policy), (sqrt_mass * values)[:, None])
    harmonic, exact, coexact = (Cochain(cx.grid, k, part[:, 0] / sqrt_mass) for part in parts)
    return HodgeSplit(harmonic, exact, coexact, float(residuals[0]), float(orthogonality[0]))


def decomposition_errors(source, k, omegas, policy=None):
    """Residuals and orthogonality defects of the Hodge decomposition of many
    cochains at once.

    :param omegas: Array of shape ``(n_k, count)``, one cochain per column.
    :return: Tuple of two arrays of length ``count``.
    """
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    _check_degree(cx, k)
    omegas = np.asarray(omegas, dtype=float)
    if omegas.ndim != 2 or omegas.shape[0] != cx.grid.cell_count(k):
        raise ValueError('Need cochains as columns of a ({}, count) array, got {}'.format(
            cx.grid.cell_count(k), omegas.shape))
    _, residuals, orthogonality = _project(_bases(cx, k, policy), cx.sqrt_mass(k)[:, None] * omegas)
    return residuals, orthogonality


def betti_numbers(source, epsilon=0., potential=None, placement=None, policy=None, **kwargs):
    """Dimensions of the kernels of the Laplacians in every degree.

    :param source: A leaf grid, a deformation context or a complex. A grid
                   combined with ``epsilon > 0`` needs a ``potential``.
    :return: Tuple of integers, one per degree.
    :raises AmbiguousKernelError: Listing the ambiguous reports.
    """
    policy = policy or KernelPolicy.default()
    if isinstance(source, LeafGrid) and (epsilon > 0 or potential is not None):
        if potential is None:
            raise ValueError('A potential is needed for epsilon={}'.format(epsilon))
        source = DeformationContext(source, potential, epsilon, placement, **kwargs)
    cx = CochainComplex.of(source)
    reports = [kernel_dimension(cx.laplacian(k), policy) for k in range(cx.dim_p + 1)]
    ambiguous = [r for r in reports if r.ambiguous]
    if ambiguous:
        raise AmbiguousKernelError(ambiguous)
    betti = tuple(r.kernel_dim for r in reports)
    log.info('Betti numbers at epsilon={}: {}'.format(cx.epsilon, betti))
    return betti


def verify_transport_identities(source, k, policy=None):
    """Check that ``T^k`` carries ``Ker d^k`` onto ``Ker d_eps^k`` and
    ``T^{k+1}`` carries ``Im d^k`` onto ``Im d_eps^k``.

    The image is spanned by the columns ``T^{k+1} d^k e_i``. These are exact
    up to rounding in every entry, however far ``T`` is from the identity, and
    each one is compared with ``Im d_eps^k`` relative to its own norm. An
    orthonormal basis of ``Im d^k`` scaled by ``T`` would instead amplify its
    rounding by the condition number of ``T``.

    :param source: Deformation context or deformed complex.
    :return: :class:`TransportAngles` with the largest angle between a
             transported vector and the deformed subspace (``pi/2`` on
             dimension mismatch) and the largest relative residual
             ``|d_eps T v| / (|d_eps| |T v|)`` over the kernel basis.
    """
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    if not 0 <= k < cx.dim_p:
        raise ValueError('Transport identities need degree in 0..{}, got {}'.format(cx.dim_p - 1, k))
    base = cx.undeformed()

    base_kernel = _kernel_sym(base, k, policy)
    kernel = cx.conjugator(k)[:, None] * base_kernel
    kernel_angle = max_column_angle(kernel, _kernel_sym(cx, k, policy), base_kernel.shape[1])
    generators = cx.conjugator(k + 1)[:, None] * base.differential(k).symmetrized().toarray()
    rank = _exact_sym(base, k + 1, policy).shape[1]
    image_angle = max_column_angle(generators, _exact_sym(cx, k + 1, policy), rank)

    d = cx.differential(k).symmetrized().toarray()
    scale = np.linalg.norm(d, 2)
    residual = 0.
    for v in kernel.T:
        norm = np.linalg.norm(v)
        if norm > 0 and scale > 0:
            residual = max(residual, np.linalg.norm(d @ v) / (scale * norm))
    angles = TransportAngles(kernel_angle, image_angle, float(residual))
    log.debug('Transport identities at epsilon={}, degree {}: {}'.format(cx.epsilon, k, angles))
    return angles


def verify_block_structure(source, k, policy=None):
    """Block structure of ``T^k`` relative to the Hodge decompositions.

    With harmonic bases ``H``, ``H_eps`` and exact bases ``E``, ``E_eps``
    (all orthonormal) the blocks are ``U = H_eps* T H``, ``Z = H_eps* T E``
    and ``B = E_eps* T E``. ``Z`` vanishes, ``U`` and ``B`` are invertible.

    :return: :class:`BlockReport`; ``zero_block_norm`` is relative to
             ``max(T)``; ``b_min_singular`` is ``None`` when there are no
             exact k-cochains.
    :raises DimensionMismatchError: When harmonic or exact spaces differ in
                                    dimension.
    """
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    _check_degree(cx, k)
    base = cx.undeformed()

    _, harmonic = _harmonic_sym(base, k, policy)
    _, harmonic_eps = _harmonic_sym(cx, k, policy)
    exact = _exact_sym(base, k, policy)
    exact_eps = _exact_sym(cx, k, policy)
    dims = {'harmonic': [harmonic.shape[1], harmonic_eps.shape[1]], 'exact': [exact.shape[1], exact_eps.shape[1]]}
    if harmonic.shape[1] != harmonic_eps.shape[1] or exact.shape[1] != exact_eps.shape[1]:
        raise DimensionMismatchError('Degree {} at epsilon={}: dimensions differ {}'.format(k, cx.epsilon, dims),
                                     dims)

    t = cx.conjugator(k)[:, None]
    u = harmonic_eps.T @ (t * harmonic)
    z = harmonic_eps.T @ (t * exact)
    b = exact_eps.T @ (t * exact)
    t_norm = float(np.max(t))
    zero_block = float(np.linalg.norm(z, 2) / t_norm) if z.size else 0.
    u_sv = singular_values(u)
    b_sv = singular_values(b)
    report = BlockReport(k, cx.epsilon, zero_block, float(u_sv.min()) if u_sv.size else None,
                         float(b_sv.min()) if b_sv.size else None, dims)
    log.debug('Block structure: {}'.format(report))
    return report


def euler_characteristic_check(source, policy=None):
    """Euler characteristic from Betti numbers and from ranks of the
    differentials (rank-nullity), which must agree."""
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    betti = betti_numbers(cx, policy=policy)
    counts = [cx.grid.cell_count(k) for k in range(cx.dim_p + 1)]
    ranks = [_rank(cx.singular_decomposition(k)[1], policy)
             for k in range(cx.dim_p)]
    from_ranks = 0
    for k, n in enumerate(counts):
        kernel = n - (ranks[k] if k < cx.dim_p else 0)
        image = ranks[k - 1] if k > 0 else 0
        from_ranks += (-1) ** k * (kernel - image)
    from_betti = sum((-1) ** k * b for k, b in enumerate(betti))
    return EulerCheck(from_betti, from_ranks, counts)


def complex_residual(source, k):
    """``|d^{k+1} d^k| / (|d^{k+1}| |d^k|)`` in Frobenius norms; 0 when the
    composition leaves the complex."""
    cx = CochainComplex.of(source)
    first = cx.differential(k)
    second = cx.differential(k + 1)
    if first is None or second is None:
        return 0.
    scale = first.norm() * second.norm()
    if scale == 0:
        return 0.
    return float((second @ first).norm() / scale)


def transport(source, k, policy=None):
    """:func:`~foliapyn.witten.kernel_transport` on numerically computed
    harmonic bases."""
    policy = policy or KernelPolicy.default()
    cx = CochainComplex.of(source)
    if cx.context is None:
        raise ValueError('Kernel transport needs a deformation context')
    basis = harmonic_basis(cx.undeformed(), k, policy)
    deformed = harmonic_basis(cx, k, policy)
    return kernel_transport(cx.context, k, basis, deformed)

