"""Symmetric eigenvalue computation and the kernel dimension policy.

Laplacians are self adjoint in their mass inner product. They are brought to
a symmetric matrix by the similarity ``M^1/2 A M^-1/2`` before solving.

Three paths are used:

* ``factored``: the operator carries a factor ``F`` with ``A = F* F``; the
  eigenvalues are the squared singular values of ``F``. This resolves kernel
  eigenvalues down to about ``1e-30`` relative and is the default for
  Laplacians of dimension up to :data:`DENSE_LIMIT`.
* ``dense``: :func:`scipy.linalg.eigh` for other small operators.
* ``iterative``: shift-invert Lanczos (:func:`scipy.sparse.linalg.eigsh`)
  with a seeded start vector above :data:`DENSE_LIMIT`.

A kernel dimension is never silently guessed: every count comes with the gap
ratio between the first eigenvalue above the cut and the last one below, and
is flagged ambiguous when that ratio is too small.
"""

import logging
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg

from .witten import DeformationContext, OVERFLOW_BUDGET_DEFAULT, witten_laplacian

log = logging.getLogger(__name__)

#: Largest dimension solved with dense linear algebra
DENSE_LIMIT = 2000

#: Relative tolerance on the asymmetry of the symmetrized operator
SYMMETRY_TOLERANCE = 1e-10

KERNEL_FLOOR_DEFAULT = 1e-10
FACTORED_FLOOR_DEFAULT = 1e-24
MIN_GAP_RATIO_DEFAULT = 1e3
CLUSTER_RATIO_DEFAULT = 1e2
WINDOW_DEFAULT = 16
SEED_DEFAULT = 0


class KernelPolicy(namedtuple('KernelPolicy', ['floor', 'factored_floor', 'min_gap_ratio', 'cluster_ratio',
                                               'window', 'seed'])):
    """Decision policy for numerical kernels.

    :ivar floor: Relative cut for eigenvalues from direct eigen solves.
    :ivar factored_floor: Relative cut for squared singular values.
    :ivar min_gap_ratio: Gap ratio below which a count is ambiguous.
    :ivar cluster_ratio: Ratio that separates a low lying cluster.
    :ivar window: Number of eigenvalues computed on the iterative path.
    :ivar seed: Seed for iterative start vectors.
    """

    @staticmethod
    def default():
        return KernelPolicy(KERNEL_FLOOR_DEFAULT, FACTORED_FLOOR_DEFAULT, MIN_GAP_RATIO_DEFAULT,
                            CLUSTER_RATIO_DEFAULT, WINDOW_DEFAULT, SEED_DEFAULT)

    @property
    def rank_cut(self):
        """Relative singular value cut matching :attr:`factored_floor`."""
        return float(np.sqrt(self.factored_floor))


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple
    kernel_dim: int
    threshold: float
    gap_ratio: float
    ambiguous: bool
    method: str = 'dense'
    scale: float = 0.
    dimension: int = 0
    extras: dict = field(default_factory=dict, compare=False)

    def as_dict(self, limit=None):
        eigenvalues = list(self.eigenvalues)
        if limit is not None:
            eigenvalues = eigenvalues[:limit]
        return {
            'eigenvalues': eigenvalues,
            'kernel_dim': self.kernel_dim,
            'threshold': self.threshold,
            'gap_ratio': self.gap_ratio,
            'ambiguous': self.ambiguous,
            'method': self.method,
            'scale': self.scale,
            'dimension': self.dimension,
        }


class AmbiguousKernelError(ValueError):
    """Raised when a kernel dimension is requested but the spectrum does not
    separate the kernel clearly."""

    def __init__(self, reports):
        reports = list(reports)
        ratios = ', '.join('{:.3g}'.format(r.gap_ratio) for r in reports)
        super().__init__('Ambiguous kernel dimension, gap ratios: {}'.format(ratios))
        self.reports = reports


class EigensolverError(RuntimeError):
    """Raised when the iterative eigensolver does not converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


def _symmetric(op):
    """Symmetrized matrix of a self adjoint map, checked for symmetry."""
    if op.shape[0] != op.shape[1]:
        raise ValueError('Operator must be square, got shape {}'.format(op.shape))
    matrix = sparse.csr_matrix(op.symmetrized())
    if matrix.nnz:
        asymmetry = abs(matrix - matrix.T).max()
        size = abs(matrix).max()
        if asymmetry > SYMMETRY_TOLERANCE * size:
            raise ValueError('Operator is not symmetric: asymmetry {:.3e} relative to {:.3e}'.format(asymmetry, size))
    return matrix


def _factored(op):
    factor = op.factor.symmetrized().toarray()
    n = op.shape[0]
    if factor.shape[0] >= n:
        _, s, vt = scipy.linalg.svd(factor, full_matrices=False)
    else:
        _, s, vt = scipy.linalg.svd(factor, full_matrices=True)
        s = np.concatenate([s, np.zeros(n - s.size)])
    values = s ** 2
    order = np.argsort(values, kind='stable')
    return values[order], vt[order].T


def _dense(op):
    matrix = _symmetric(op).toarray()
    return scipy.linalg.eigh(matrix)


def _iterative(op, m, seed, vectors):
    matrix = _symmetric(op)
    n = matrix.shape[0]
    norm = float(sparse.linalg.norm(matrix, 1))
    if norm == 0:
        values = np.zeros(m)
        return (values, np.eye(n, m)) if vectors else (values, None)
    rng = np.random.default_rng(seed)
    # A negative shift keeps the shifted PSD operator definite
    sigma = -1e-6 * norm
    try:
        result = sparse.linalg.eigsh(matrix, k=m, sigma=sigma, which='LM', v0=rng.standard_normal(n),
                                     return_eigenvectors=vectors)
    except sparse.linalg.ArpackNoConvergence as e:
        log.error('Eigensolver did not converge: {}'.format(e))
        raise EigensolverError('Shift-invert Lanczos did not converge for {} eigenvalues of a {}x{} operator'.format(
            m, n, n), residuals=getattr(e, 'eigenvalues', None))
    if vectors:
        values, vecs = result
        order = np.argsort(values)
        return values[order], vecs[:, order]
    return np.sort(result), None


def _largest(op, seed):
    matrix = _symmetric(op)
    if matrix.nnz == 0:
        return 0.
    rng = np.random.default_rng(seed)
    value = sparse.linalg.eigsh(matrix, k=1, which='LA', v0=rng.standard_normal(matrix.shape[0]),
                                return_eigenvectors=False)
    return float(value[0])


def _spectrum(op, policy, count=None, vectors=False):
    """Eigenvalues ascending (and eigenvectors in symmetrized coordinates).

    :return: Tuple ``(values, vectors, method, complete, scale)``.
    """
    n = op.shape[0]
    if n <= DENSE_LIMIT:
        if op.factor is not None:
            values, vecs = _factored(op)
            method = 'factored'
        else:
            values, vecs = _dense(op)
            method = 'dense'
        scale = float(np.max(np.abs(values))) if values.size else 0.
        return values, vecs, method, True, scale
    m = min(count or policy.window, n - 1)
    values, vecs = _iterative(op, m, policy.seed, vectors)
    return values, vecs, 'iterative', False, _largest(op, policy.seed)


def lowest_eigenvalues(op, m, policy=None):
    """The ``m`` smallest eigenvalues of a self adjoint PSD map, ascending.

    :param op: :class:`~foliapyn.leaf_complex.LinearMap`.
    :param m: Number of eigenvalues, ``1 <= m <= dim``.
    :param policy: :class:`KernelPolicy`, supplies the iterative seed.
    :return: numpy array of length ``m``.
    """
    policy = policy or KernelPolicy.default()
    n = op.shape[0]
    if not 1 <= m <= n:
        raise ValueError('Number of eigenvalues must be in 1..{}, got {}'.format(n, m))
    values, _, _, _, _ = _spectrum(op, policy, count=m)
    return np.asarray(values[:m])


def spectrum_report(values, scale, method, policy, complete=True, dimension=None):
    """Apply the kernel policy to computed eigenvalues.

    The cut starts at ``floor * scale``, where the floor depends on how the
    eigenvalues were computed. Eigenvalues above the floor but less than
    ``min_gap_ratio`` times it are kernel candidates: when the relative gap
    above a candidate reaches ``min_gap_ratio`` and is the largest relative
    gap in that range (the gap at the floor included), the cut moves up to
    that candidate. Within the first ``window`` eigenvalues only.

    The gap ratio is the first eigenvalue above the cut divided by the last
    eigenvalue below it (or by the cut when the kernel is trivial).
    """
    values = np.asarray(values, dtype=float)
    dimension = values.size if dimension is None else dimension
    if scale <= 0:
        return SpectrumReport(tuple(values.tolist()), dimension, 0., np.inf, False, method, 0., dimension)
    floor = policy.factored_floor if method == 'factored' else policy.floor
    threshold = floor * scale
    kernel_dim = int(np.count_nonzero(values <= threshold))

    best = _gap_above(values, kernel_dim, threshold)
    ceiling = threshold * policy.min_gap_ratio
    cut = kernel_dim
    for i in range(kernel_dim, min(values.size - 1, policy.window)):
        if values[i] > ceiling:
            break
        ratio = values[i + 1] / values[i]
        if ratio >= policy.min_gap_ratio and ratio > best:
            best, cut = ratio, i + 1
    if cut > kernel_dim:
        log.debug('Kernel cut moved from {:.3g} to {:.3g} by a gap of {:.3g}'.format(threshold, values[cut - 1], best))
        threshold, kernel_dim = float(values[cut - 1]), cut

    if kernel_dim < values.size:
        gap_ratio = _gap_above(values, kernel_dim, threshold)
    elif complete:
        gap_ratio = np.inf
    else:
        # every eigenvalue in the window lies below the cut
        gap_ratio = 1.
    ambiguous = bool(gap_ratio < policy.min_gap_ratio)
    return SpectrumReport(tuple(values.tolist()), kernel_dim, threshold, float(gap_ratio), ambiguous, method,
                          float(scale), dimension)


def _gap_above(values, kernel_dim, threshold):
    if kernel_dim >= values.size:
        return np.inf
    below = abs(values[kernel_dim - 1]) if kernel_dim else threshold
    return values[kernel_dim] / below if below > 0 else np.inf


def kernel_dimension(op, policy=None):
    """Numerical kernel dimension of a self adjoint PSD map.

    :return: :class:`SpectrumReport`.
    """
    policy = policy or KernelPolicy.default()
    values, _, method, complete, scale = _spectrum(op, policy)
    report = spectrum_report(values, scale, method, policy, complete, op.shape[0])
    log.debug('Kernel dimension {} (gap ratio {:.3g}, {})'.format(report.kernel_dim, report.gap_ratio, method))
    return report


def kernel_vectors(op, policy=None):
    """Kernel dimension and a basis of the numerical kernel.

    :return: Tuple of :class:`SpectrumReport` and an array of shape
             ``(n, kernel_dim)`` whose columns are mass orthonormal.
    """
    policy = policy or KernelPolicy.default()
    values, vecs, method, complete, scale = _spectrum(op, policy, vectors=True)
    report = spectrum_report(values, scale, method, policy, complete, op.shape[0])
    basis = vecs[:, :report.kernel_dim] / np.sqrt(op.domain_mass)[:, None]
    return report, basis


def numerical_rank(singular_values, policy=None):
    """Number of singular values above ``rank_cut * max``."""
    policy = policy or KernelPolicy.default()
    singular_values = np.asarray(singular_values, dtype=float)
    if singular_values.size == 0 or singular_values.max() == 0:
        return 0
    return int(np.count_nonzero(singular_values > policy.rank_cut * singular_values.max()))


def cluster_count(report, policy=None):
    """Size of the low lying cluster of a spectrum.

    Above the kernel, among the lowest ``window`` eigenvalues, the largest
    ratio of consecutive eigenvalues is searched. When it reaches
    ``cluster_ratio`` the cluster ends there; otherwise the cluster is the
    kernel itself. The gap ratio of a kernel at or below the floor (or of an
    empty one) is ``inf``.

    :return: Tuple ``(count, gap_ratio)``.
    """
    policy = policy or KernelPolicy.default()
    kd = report.kernel_dim
    values = np.asarray(report.eigenvalues[:max(policy.window, kd + 2)], dtype=float)
    if kd >= values.size or report.scale <= 0:
        return kd, np.inf
    ratios = values[kd + 1:] / values[kd:-1]
    if ratios.size and ratios.max() >= policy.cluster_ratio:
        i = int(np.argmax(ratios))
        return kd + i + 1, float(ratios[i])
    floor = policy.factored_floor if report.method == 'factored' else policy.floor
    if kd == 0 or values[kd - 1] <= floor * report.scale:
        return kd, np.inf
    return kd, float(values[kd] / values[kd - 1])


def spectral_flow(grid, potential, epsilons, k, placement=None, policy=None, count=8,
                  overflow_budget=OVERFLOW_BUDGET_DEFAULT):
    """Kernel dimension and low lying spectrum of the Witten Laplacian along
    an ascending list of epsilons.

    Errors for a single epsilon (overflow budget, eigensolver) are recorded in
    the ``error`` column; the sweep continues.

    :return: :class:`pandas.DataFrame` with one row per epsilon and the
             columns ``epsilon``, ``degree``, ``kernel_dim``, ``threshold``,
             ``gap_ratio``, ``ambiguous``, ``cluster_count``,
             ``cluster_gap_ratio``, ``eigenvalues`` and ``error``.
    """
    policy = policy or KernelPolicy.default()
    epsilons = [float(e) for e in epsilons]
    if not epsilons:
        raise ValueError('Need at least one epsilon')
    if any(b < a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError('Epsilons must be ascending, got {}'.format(epsilons))
    rows = []
    for epsilon in epsilons:
        row = {'epsilon': epsilon, 'degree': k, 'kernel_dim': None, 'threshold': np.nan, 'gap_ratio': np.nan,
               'ambiguous': None, 'cluster_count': None, 'cluster_gap_ratio': np.nan, 'eigenvalues': (),
               'error': None}
        try:
            ctx = DeformationContext(grid, potential, epsilon, placement, overflow_budget)
            report = kernel_dimension(witten_laplacian(ctx, k), policy)
            clusters, cluster_gap = cluster_count(report, policy)
            row.update(kernel_dim=report.kernel_dim, threshold=report.threshold, gap_ratio=report.gap_ratio,
                       ambiguous=report.ambiguous, cluster_count=clusters, cluster_gap_ratio=cluster_gap,
                       eigenvalues=tuple(report.eigenvalues[:count]))
        except (ValueError, EigensolverError) as e:
            log.warning('Spectral flow at epsilon={}, degree {} failed: {}'.format(epsilon, k, e))
            row['error'] = str(e)
        rows.append(row)
    return pd.DataFrame(rows, columns=['epsilon', 'degree', 'kernel_dim', 'threshold', 'gap_ratio', 'ambiguous',
                                       'cluster_count', 'cluster_gap_ratio', 'eigenvalues', 'error'])
