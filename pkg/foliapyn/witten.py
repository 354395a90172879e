"""Witten deformation of a leafwise complex.

The deformation by a potential ``phi`` and a parameter ``epsilon >= 0``
conjugates the leafwise differential with the multiplication operators

    T^k = exp(-epsilon * phi)   (sampled at k-cell barycenters),

that is ``d_eps^k = T^{k+1} d^k (T^k)^-1``. On a closed leaf ``T^k`` carries
the kernel and image of ``d^k`` onto those of ``d_eps^k``, which is why the
deformed and undeformed Laplacians have kernels of equal dimension.

A leaf sits in the ambient chart at transverse position ``v``; the potential
is evaluated at ``(h, v + slope * h_0)``. The slope is zero for product
foliations and equals the rotation number for suspensions.
"""

import logging
from collections import namedtuple

import numpy as np
import scipy.sparse as sparse

from .leaf_complex import LinearMap, assemble_laplacian, exterior_derivative
from .tools import as_columns, singular_values

log = logging.getLogger(__name__)

#: Largest admissible epsilon * (max(phi) - min(phi)) over the cell barycenters
OVERFLOW_BUDGET_DEFAULT = 30.

TransportReport = namedtuple('TransportReport', ['operator', 'singular_values', 'min_singular'])


class OverflowBudgetError(ValueError):
    """Raised when ``epsilon * range(phi)`` exceeds the overflow budget."""

    def __init__(self, value, budget):
        super().__init__('epsilon * range(phi) = {:.6g} exceeds the overflow budget {:.6g}'.format(value, budget))
        self.value = value
        self.budget = budget


class DimensionMismatchError(ValueError):
    """Raised when a deformed and an undeformed space that must have equal
    dimension do not."""

    def __init__(self, message, dims):
        super().__init__(message)
        self.dims = dims


class LeafPlacement(namedtuple('LeafPlacement', ['transverse', 'slope'])):
    """Position of a leaf chart in the ambient chart."""

    @staticmethod
    def at(transverse, slope=None):
        transverse = tuple(float(v) for v in np.atleast_1d(transverse))
        if slope is None:
            slope = (0.,) * len(transverse)
        slope = tuple(float(s) for s in np.atleast_1d(slope))
        if len(slope) != len(transverse):
            raise ValueError('Slope needs {} entries, got {}'.format(len(transverse), len(slope)))
        return LeafPlacement(transverse, slope)

    def ambient(self, coords):
        """Ambient coordinates ``(h, v)`` of leaf points ``h``."""
        coords = np.asarray(coords, dtype=float)
        if not self.transverse:
            return coords
        v = np.array(self.transverse) + np.outer(coords[:, 0], np.array(self.slope))
        return np.hstack([coords, v])


class DeformationContext(object):
    """A leaf grid deformed by a potential.

    :param grid: The :class:`~foliapyn.leaf_complex.LeafGrid`.
    :param potential: The :class:`~foliapyn.potential.TrigPotential` phi.
    :param epsilon: Deformation parameter, ``epsilon >= 0``.
    :param placement: Leaf placement, defaults to transverse position 0.
    :param overflow_budget: Bound on ``epsilon * range(phi)``.
    :param center: Subtract the mean of phi over the vertices. This changes
                   every ``T^k`` by the same positive scalar.
    """

    def __init__(self, grid, potential, epsilon, placement=None, overflow_budget=OVERFLOW_BUDGET_DEFAULT,
                 center=True):
        epsilon = float(epsilon)
        if not np.isfinite(epsilon) or epsilon < 0:
            raise ValueError('epsilon must be a non negative real, got {}'.format(epsilon))
        if potential.leaf_dim != grid.dim_p:
            raise ValueError('Potential has leaf dimension {}, grid has {}'.format(potential.leaf_dim, grid.dim_p))
        if placement is None:
            placement = LeafPlacement.at((0.,) * potential.transverse_dim)
        if len(placement.transverse) != potential.transverse_dim:
            raise ValueError('Placement has {} transverse coordinates, potential expects {}'.format(
                len(placement.transverse), potential.transverse_dim))

        samples = {k: potential.value(placement.ambient(grid.barycenters(k))) for k in range(grid.dim_p + 1)}
        everything = np.concatenate(list(samples.values()))
        spread = float(everything.max() - everything.min())
        if epsilon * spread > overflow_budget:
            raise OverflowBudgetError(epsilon * spread, overflow_budget)
        offset = float(np.mean(samples[0])) if center else 0.

        self._grid = grid
        self._potential = potential
        self._epsilon = epsilon
        self._placement = placement
        self._offset = offset
        self._exponents = {k: -epsilon * (s - offset) for k, s in samples.items()}
        self._conjugators = {k: np.exp(e) for k, e in self._exponents.items()}
        for k, t in self._conjugators.items():
            if not np.all(np.isfinite(t)) or np.any(t <= 0):
                raise OverflowBudgetError(epsilon * spread, overflow_budget)
        log.debug('Deformation context epsilon={}, range(phi)={:.4g}, offset={:.4g}'.format(epsilon, spread, offset))

    @property
    def grid(self):
        return self._grid

    @property
    def potential(self):
        return self._potential

    @property
    def epsilon(self):
        return self._epsilon

    @property
    def placement(self):
        return self._placement

    @property
    def offset(self):
        """Constant subtracted from phi before exponentiation."""
        return self._offset

    def conjugator(self, k):
        """Diagonal of ``T^k`` as array."""
        return self._conjugators[k]

    def exponent(self, k):
        """``-epsilon * (phi - offset)`` at the k-cell barycenters."""
        return self._exponents[k]

    def undeformed(self):
        return DeformationContext(self._grid, self._potential, 0., self._placement)


def conjugation_operator(ctx, k):
    """Multiplication by ``exp(-epsilon * phi)`` on k-cochains."""
    grid = ctx.grid
    if not 0 <= k <= grid.dim_p:
        raise ValueError('Degree {} out of range 0..{}'.format(k, grid.dim_p))
    return LinearMap(sparse.diags(ctx.conjugator(k)).tocsr(), grid.mass(k), grid.mass(k))


def deformed_differential(ctx, k):
    """``d_eps^k = T^{k+1} d^k (T^k)^-1``."""
    d = exterior_derivative(ctx.grid, k)
    matrix = sparse.diags(ctx.conjugator(k + 1)) @ d.matrix @ sparse.diags(1. / ctx.conjugator(k))
    return LinearMap(matrix, d.domain_mass, d.codomain_mass)


def deformed_differential_direct(ctx, k):
    """``d_eps^k`` from its defining formula ``exp(-eps phi) d (exp(eps phi) .)``
    evaluated entry by entry.

    Independent of :func:`deformed_differential`; both must agree.
    """
    d = exterior_derivative(ctx.grid, k).matrix.tocoo()
    data = d.data * np.exp(ctx.exponent(k + 1)[d.row] - ctx.exponent(k)[d.col])
    matrix = sparse.coo_matrix((data, (d.row, d.col)), shape=d.shape).tocsr()
    return LinearMap(matrix, ctx.grid.mass(k), ctx.grid.mass(k + 1))


def deformed_adjoint(ctx, k):
    """Mass adjoint of ``d_eps^k``, equal to ``(T^k)^-1 delta^k T^{k+1}``."""
    return deformed_differential(ctx, k).adjoint()


def witten_laplacian(ctx, k):
    """Witten tangential Laplacian ``d_eps* d_eps + d_eps d_eps*`` on k-cochains."""
    p = ctx.grid.dim_p
    if not 0 <= k <= p:
        raise ValueError('Degree {} out of range 0..{}'.format(k, p))
    up = deformed_differential(ctx, k) if k < p else None
    down = deformed_differential(ctx, k - 1) if k > 0 else None
    return assemble_laplacian(up, down)


def kernel_transport(ctx, k, harmonic_basis, deformed_harmonic_basis):
    """Matrix of ``Q_eps T^k`` restricted to the harmonic k-cochains.

    Both bases must be mass orthonormal. The entry ``(i, j)`` is
    ``<b_eps_i, T^k b_j>``.

    :return: :class:`TransportReport` with the map, its singular values and
             the smallest singular value.
    """
    grid = ctx.grid
    n = grid.cell_count(k)
    basis = as_columns(harmonic_basis, n)
    deformed = as_columns(deformed_harmonic_basis, n)
    if basis.shape[1] != deformed.shape[1]:
        raise DimensionMismatchError('Harmonic spaces of degree {} have dimensions {} (undeformed) and {} '
                                     '(deformed)'.format(k, basis.shape[1], deformed.shape[1]),
                                     (basis.shape[1], deformed.shape[1]))
    mass = grid.mass(k)
    matrix = deformed.T @ (mass[:, None] * ctx.conjugator(k)[:, None] * basis)
    sv = singular_values(matrix)
    unit = np.ones(matrix.shape[0])
    operator = LinearMap(sparse.csr_matrix(matrix), unit, unit)
    return TransportReport(operator, sv, float(sv.min()) if sv.size else np.inf)
