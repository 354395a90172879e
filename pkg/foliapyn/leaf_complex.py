"""Discrete leafwise de Rham complex on a single leaf.

A leaf is modelled as a structured grid of dimension 1 (circle) or 2 (torus)
with constant spacings. A k-cell is identified by the set of axes it extends
along (its *axes*) and by a multi index. Cells of equal degree are grouped in
blocks, one block per axes tuple, in lexicographic order of the axes tuple;
cells inside a block are numbered in C order of their multi index. For
``p = 2`` the 1-cells are therefore all x-edges followed by all y-edges.

Cochains hold point values of forms at cell barycenters. The exterior
derivative is the signed incidence matrix scaled by ``1/h`` along each axis and
the L² structure is mass lumped: every k-cell carries the weight ``prod(h)``,
so the inner product of two cochains approximates the integral of the
pointwise product of the forms over the leaf.

An example::

    from foliapyn.leaf_complex import LeafGrid, laplacian

    grid = LeafGrid(1, (64,), (1 / 64,))
    lap = laplacian(grid, 0)
    print(lap.matrix.shape)

This prints ``(64, 64)``.
"""

import itertools
import logging
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg

log = logging.getLogger(__name__)

#: Minimum number of vertices along each axis
MIN_SIZE = 3

#: Leaf dimensions supported
LEAF_DIMENSIONS = (1, 2)

CellBlock = namedtuple('CellBlock', ['axes', 'shape', 'offset', 'count'])

StarCheck = namedtuple('StarCheck', ['empirical_sign', 'stated_sign', 'residual'])


class LeafGrid(object):
    """A discretized compact leaf: structured grid of dimension 1 or 2.

    :param dim_p: Leaf dimension, 1 or 2.
    :param sizes: Number of vertices per axis, each at least 3.
    :param spacings: Grid step per axis, positive.
    :param periodic: Single flag or one flag per axis. Defaults to ``True``.
    :param origin: Chart coordinates of vertex 0. Defaults to the origin.
    """

    def __init__(self, dim_p, sizes, spacings, periodic=True, origin=None):
        if dim_p not in LEAF_DIMENSIONS:
            raise ValueError('Leaf dimension must be 1 or 2, got {}'.format(dim_p))
        sizes = tuple(int(n) for n in np.atleast_1d(sizes))
        spacings = tuple(float(h) for h in np.atleast_1d(spacings))
        if len(sizes) != dim_p or len(spacings) != dim_p:
            raise ValueError('Need {} sizes and spacings, got {} and {}'.format(dim_p, len(sizes), len(spacings)))
        if any(n < MIN_SIZE for n in sizes):
            raise ValueError('Grid sizes must be at least {}, got {}'.format(MIN_SIZE, sizes))
        if any(not np.isfinite(h) or h <= 0 for h in spacings):
            raise ValueError('Grid spacings must be positive, got {}'.format(spacings))
        if isinstance(periodic, (bool, np.bool_)):
            periodic = (bool(periodic),) * dim_p
        periodic = tuple(bool(f) for f in periodic)
        if len(periodic) != dim_p:
            raise ValueError('Need {} periodic flags, got {}'.format(dim_p, len(periodic)))
        if origin is None:
            origin = (0.,) * dim_p
        origin = tuple(float(o) for o in np.atleast_1d(origin))
        if len(origin) != dim_p:
            raise ValueError('Need {} origin coordinates, got {}'.format(dim_p, len(origin)))

        self._dim_p = dim_p
        self._sizes = sizes
        self._spacings = spacings
        self._periodic = periodic
        self._origin = origin

        self._blocks = {}
        for k in range(dim_p + 1):
            blocks = []
            offset = 0
            for axes in itertools.combinations(range(dim_p), k):
                shape = tuple(n if (periodic[a] or a not in axes) else n - 1 for a, n in enumerate(sizes))
                count = int(np.prod(shape))
                blocks.append(CellBlock(axes, shape, offset, count))
                offset += count
            self._blocks[k] = tuple(blocks)

        self._barycenters = {}
        for k, blocks in self._blocks.items():
            parts = []
            for block in blocks:
                index = np.indices(block.shape).reshape(dim_p, -1).T.astype(float)
                shift = np.array([0.5 if a in block.axes else 0. for a in range(dim_p)])
                parts.append(np.array(origin) + (index + shift) * np.array(spacings))
            self._barycenters[k] = np.vstack(parts)
            self._barycenters[k].setflags(write=False)

        log.debug('Built leaf grid p={}, sizes={}, spacings={}, periodic={}'.format(
            dim_p, sizes, spacings, periodic))

    def __repr__(self):
        return 'LeafGrid(dim_p={}, sizes={}, spacings={}, periodic={})'.format(
            self._dim_p, self._sizes, self._spacings, self._periodic)

    @property
    def dim_p(self):
        """Leaf dimension."""
        return self._dim_p

    @property
    def sizes(self):
        return self._sizes

    @property
    def spacings(self):
        return self._spacings

    @property
    def periodic(self):
        return self._periodic

    @property
    def origin(self):
        return self._origin

    @property
    def fully_periodic(self):
        return all(self._periodic)

    def require_periodic(self):
        """Raise :class:`ValueError` unless every axis is periodic.

        Spectral computations (kernels, Betti numbers) are only meaningful on
        closed leaves.
        """
        if not self.fully_periodic:
            raise ValueError('Spectral use requires a fully periodic grid, got periodic={}'.format(self._periodic))

    def _check_degree(self, k):
        if not 0 <= k <= self._dim_p:
            raise ValueError('Degree {} out of range 0..{}'.format(k, self._dim_p))

    def blocks(self, k):
        """Cell blocks of degree ``k``, in storage order."""
        self._check_degree(k)
        return self._blocks[k]

    def cell_count(self, k):
        self._check_degree(k)
        return sum(b.count for b in self._blocks[k])

    def barycenters(self, k):
        """Barycenter coordinates of all k-cells as array of shape ``(n_k, p)``."""
        self._check_degree(k)
        return self._barycenters[k]

    def mass(self, k):
        """Mass weights of the k-cells (mass lumped L² inner product)."""
        self._check_degree(k)
        return np.full(self.cell_count(k), float(np.prod(self._spacings)))

    def cell_index(self, k, axes, multi_index):
        """Flat storage indices of cells of degree ``k`` extending along
        ``axes`` with the given multi indices.

        Periodic axes wrap around. Indices out of range on a non periodic axis
        map to ``-1``.

        :param multi_index: Integer array of shape ``(m, p)``.
        :return: Integer array of shape ``(m,)``.
        """
        axes = tuple(axes)
        block = next((b for b in self.blocks(k) if b.axes == axes), None)
        if block is None:
            raise ValueError('No {}-cells along axes {}'.format(k, axes))
        index = np.array(multi_index, dtype=int, copy=True).reshape(-1, self._dim_p)
        valid = np.ones(len(index), dtype=bool)
        for a in range(self._dim_p):
            if self._periodic[a]:
                index[:, a] = np.mod(index[:, a], block.shape[a])
            else:
                valid &= (index[:, a] >= 0) & (index[:, a] < block.shape[a])
        flat = np.full(len(index), -1, dtype=int)
        if valid.any():
            flat[valid] = block.offset + np.ravel_multi_index(tuple(index[valid].T), block.shape)
        return flat

    def cell_volumes(self, k):
        """Volume (length, area) of the k-cells; vertices have volume 1."""
        parts = []
        for block in self.blocks(k):
            volume = float(np.prod([self._spacings[a] for a in block.axes]))
            parts.append(np.full(block.count, volume))
        return np.concatenate(parts)


def build_leaf_grid(dim_p, sizes, spacings, periodic_flags=True):
    """Build a :class:`LeafGrid`.

    :param dim_p: Leaf dimension, 1 or 2.
    :param sizes: Vertex counts per axis.
    :param spacings: Grid steps per axis.
    :param periodic_flags: Periodicity per axis.
    :return: The grid.
    """
    return LeafGrid(dim_p, sizes, spacings, periodic_flags)


def dual_grid(grid):
    """The dual grid of a periodic grid: same sizes and spacings, origin
    shifted by half a step along every axis."""
    grid.require_periodic()
    origin = tuple(o + h / 2 for o, h in zip(grid.origin, grid.spacings))
    return LeafGrid(grid.dim_p, grid.sizes, grid.spacings, True, origin)


@dataclass(frozen=True, eq=False)
class Cochain:
    """A discrete k-form: one real value per k-cell of a grid."""
    grid: LeafGrid
    degree: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).ravel()
        expected = self.grid.cell_count(self.degree)
        if values.shape != (expected,):
            raise ValueError('Cochain of degree {} needs {} values, got {}'.format(self.degree, expected, values.size))
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @staticmethod
    def sample(grid, k, func):
        """Sample a function of chart coordinates at the k-cell barycenters.

        :param func: Callable receiving an array of shape ``(n_k, p)``.
        """
        return Cochain(grid, k, func(grid.barycenters(k)))

    @staticmethod
    def constant(grid, k, value=1.):
        return Cochain(grid, k, np.full(grid.cell_count(k), float(value)))

    def norm(self):
        return np.sqrt(inner_product(self.grid, self.degree, self, self))


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Sparse matrix between cochain spaces with the mass weights of its
    domain and codomain.

    ``factor`` optionally holds a map ``F`` with ``A = F* F``. It lets the
    spectral module compute eigenvalues of Laplacians as squared singular
    values.
    """
    matrix: sparse.csr_matrix
    domain_mass: np.ndarray
    codomain_mass: np.ndarray
    factor: object = None

    def __post_init__(self):
        matrix = sparse.csr_matrix(self.matrix, dtype=float)
        domain_mass = np.asarray(self.domain_mass, dtype=float).ravel()
        codomain_mass = np.asarray(self.codomain_mass, dtype=float).ravel()
        if matrix.shape != (codomain_mass.size, domain_mass.size):
            raise ValueError('Matrix shape {} does not fit masses ({}, {})'.format(
                matrix.shape, codomain_mass.size, domain_mass.size))
        if np.any(domain_mass <= 0) or np.any(codomain_mass <= 0):
            raise ValueError('Mass weights must be strictly positive')
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'domain_mass', domain_mass)
        object.__setattr__(self, 'codomain_mass', codomain_mass)

    @property
    def shape(self):
        return self.matrix.shape

    def adjoint(self):
        """Mass weighted transpose ``M_dom^-1 A^T M_cod``."""
        matrix = sparse.diags(1. / self.domain_mass) @ self.matrix.T @ sparse.diags(self.codomain_mass)
        return LinearMap(matrix, self.codomain_mass, self.domain_mass)

    def apply(self, values):
        if isinstance(values, Cochain):
            values = values.values
        return self.matrix @ np.asarray(values, dtype=float)

    def __matmul__(self, other):
        if not isinstance(other, LinearMap):
            return NotImplemented
        if self.shape[1] != other.shape[0] or not np.allclose(self.domain_mass, other.codomain_mass):
            raise ValueError('Cannot compose maps of shapes {} and {}'.format(self.shape, other.shape))
        return LinearMap(self.matrix @ other.matrix, other.domain_mass, self.codomain_mass)

    def __add__(self, other):
        if not isinstance(other, LinearMap):
            return NotImplemented
        if self.shape != other.shape:
            raise ValueError('Cannot add maps of shapes {} and {}'.format(self.shape, other.shape))
        return LinearMap(self.matrix + other.matrix, self.domain_mass, self.codomain_mass)

    def symmetrized(self):
        """Matrix in orthonormal coordinates, ``M_cod^1/2 A M_dom^-1/2``.

        For a self adjoint map the result is a symmetric matrix.
        """
        return sparse.diags(np.sqrt(self.codomain_mass)) @ self.matrix @ sparse.diags(1. / np.sqrt(self.domain_mass))

    def dense(self):
        return self.matrix.toarray()

    def norm(self):
        """Frobenius norm of the matrix."""
        return float(sparse.linalg.norm(self.matrix)) if self.matrix.nnz else 0.


def _check_range(grid, k, low, high, what):
    if not low <= k <= high:
        raise ValueError('{} needs degree in {}..{}, got {}'.format(what, low, high, k))


def _orientation(axes, a):
    return -1. if sum(1 for s in axes if s < a) % 2 else 1.


def exterior_derivative(grid, k):
    """Discrete exterior derivative ``d^k`` from k- to (k+1)-cochains.

    A k-cell along axes ``S`` at index ``i`` lies in the boundary of the
    (k+1)-cells along ``S + {a}`` at indices ``i`` and ``i - e_a``. The
    entries are ``-s/h_a`` and ``+s/h_a`` with ``s`` the sign of moving axis
    ``a`` into position within ``S``.

    :param grid: The leaf grid.
    :param k: Degree, ``0 <= k < p``.
    :return: :class:`LinearMap` of shape ``(n_{k+1}, n_k)``.
    """
    _check_range(grid, k, 0, grid.dim_p - 1, 'Exterior derivative')
    p = grid.dim_p
    rows, cols, vals = [], [], []
    for block in grid.blocks(k):
        index = np.indices(block.shape).reshape(p, -1).T
        source = block.offset + np.arange(block.count)
        for a in range(p):
            if a in block.axes:
                continue
            target_axes = tuple(sorted(block.axes + (a,)))
            scale = _orientation(block.axes, a) / grid.spacings[a]
            for shift, sign in ((0, -1.), (-1, 1.)):
                target_index = index.copy()
                target_index[:, a] += shift
                target = grid.cell_index(k + 1, target_axes, target_index)
                keep = target >= 0
                rows.append(target[keep])
                cols.append(source[keep])
                vals.append(np.full(int(keep.sum()), sign * scale))
    shape = (grid.cell_count(k + 1), grid.cell_count(k))
    matrix = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)
    matrix = matrix.tocsr()
    matrix.eliminate_zeros()
    return LinearMap(matrix, grid.mass(k), grid.mass(k + 1))


def codifferential(grid, k):
    """Codifferential ``delta^k``, the mass adjoint of ``d^k``.

    Operates on (k+1)-cochains and returns k-cochains.
    """
    _check_range(grid, k, 0, grid.dim_p - 1, 'Codifferential')
    return exterior_derivative(grid, k).adjoint()


def _star_ratios(grid, k):
    ratios = []
    for block in grid.blocks(k):
        dual = np.prod([grid.spacings[a] for a in range(grid.dim_p) if a not in block.axes])
        primal = np.prod([grid.spacings[a] for a in block.axes])
        ratios.append(np.full(block.count, dual / primal))
    return np.concatenate(ratios)


def hodge_star(grid, k):
    """Diagonal Hodge star on k-cochains.

    The entry of a k-cell is the volume of its dual (p-k)-cell divided by its
    own volume, vertices having volume 1. The dual cell of a k-cell is stored
    at the index of the k-cell.
    """
    _check_range(grid, k, 0, grid.dim_p, 'Hodge star')
    matrix = sparse.diags(_star_ratios(grid, k)).tocsr()
    return LinearMap(matrix, grid.mass(k), grid.mass(k))


def integration_weights(grid, k):
    """Weights turning point values of k-forms into integrals over k-cells."""
    return grid.cell_volumes(k)


def _parity(sequence):
    inversions = sum(1 for i, j in itertools.combinations(range(len(sequence)), 2) if sequence[i] > sequence[j])
    return -1. if inversions % 2 else 1.


def _dual_identification(grid, dual, k):
    """Signed permutation sending primal k-cells to dual (p-k)-cells sharing
    their barycenter."""
    p = grid.dim_p
    rows, cols, vals = [], [], []
    for block in grid.blocks(k):
        complement = tuple(a for a in range(p) if a not in block.axes)
        index = np.indices(block.shape).reshape(p, -1).T
        dual_index = index - np.array([0 if a in block.axes else 1 for a in range(p)])
        rows.append(dual.cell_index(p - k, complement, dual_index))
        cols.append(block.offset + np.arange(block.count))
        vals.append(np.full(block.count, _parity(block.axes + complement)))
    n = grid.cell_count(k)
    return sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()


def star_codifferential(grid, k):
    """Cross check of the codifferential against the star formula
    ``* d *`` built on the dual grid.

    Integrated cochains of degree k+1 are carried to the dual grid by the
    Hodge star, differentiated with the integer incidence of the dual grid and
    carried back. The result ``C`` is compared with the mass adjoint
    ``delta^k``. The empirical sign ``s`` minimizes ``|s C - delta|``; the
    stated sign is ``(-1)^(p (k+1))``.

    :return: :class:`StarCheck` with the empirical sign, the stated sign and
             the relative residual ``|s C - delta| / |delta|``.
    """
    _check_range(grid, k, 0, grid.dim_p - 1, 'Star codifferential')
    p = grid.dim_p
    dual = dual_grid(grid)

    dual_d = exterior_derivative(dual, p - k - 1)
    weights_in = integration_weights(dual, p - k - 1)
    weights_out = integration_weights(dual, p - k)
    incidence = sparse.diags(weights_out) @ dual_d.matrix @ sparse.diags(1. / weights_in)
    incidence = sparse.csr_matrix(incidence)
    incidence.data = np.rint(incidence.data)

    to_dual_upper = _dual_identification(grid, dual, k + 1)
    to_dual_lower = _dual_identification(grid, dual, k)
    composed = (sparse.diags(1. / integration_weights(grid, k))
                @ sparse.diags(1. / _star_ratios(grid, k))
                @ to_dual_lower.T @ incidence @ to_dual_upper
                @ sparse.diags(_star_ratios(grid, k + 1))
                @ sparse.diags(integration_weights(grid, k + 1)))
    composed = composed.toarray()

    delta = codifferential(grid, k).dense()
    scale = np.linalg.norm(delta)
    plus = np.linalg.norm(composed - delta)
    minus = np.linalg.norm(composed + delta)
    empirical = 1 if plus <= minus else -1
    check = StarCheck(empirical, (-1) ** (p * (k + 1)), min(plus, minus) / scale)
    log.info('Star formula check p={}, k={}: empirical sign {}, stated sign {}, residual {:.3e}'.format(
        p, k, check.empirical_sign, check.stated_sign, check.residual))
    return check


def assemble_laplacian(up, down):
    """Assemble ``A* A + B B*`` from the differential ``A`` leaving degree k
    and the differential ``B`` entering degree k.

    Either may be ``None`` at the ends of the complex. The result carries the
    factor ``F = [A; B*]`` with ``Laplacian = F* F``.
    """
    if up is None and down is None:
        raise ValueError('Need at least one differential to build a Laplacian')
    terms = []
    blocks = []
    masses = []
    if up is not None:
        terms.append(up.adjoint() @ up)
        blocks.append(up.matrix)
        masses.append(up.codomain_mass)
        mass = up.domain_mass
    if down is not None:
        down_adjoint = down.adjoint()
        terms.append(down @ down_adjoint)
        blocks.append(down_adjoint.matrix)
        masses.append(down_adjoint.codomain_mass)
        mass = down.codomain_mass
    matrix = terms[0].matrix
    for term in terms[1:]:
        matrix = matrix + term.matrix
    factor = LinearMap(sparse.vstack(blocks).tocsr(), mass, np.concatenate(masses))
    return LinearMap(matrix, mass, mass, factor)


def laplacian(grid, k):
    """Hodge Laplacian ``delta d + d delta`` on k-cochains."""
    _check_range(grid, k, 0, grid.dim_p, 'Laplacian')
    up = exterior_derivative(grid, k) if k < grid.dim_p else None
    down = exterior_derivative(grid, k - 1) if k > 0 else None
    return assemble_laplacian(up, down)


def inner_product(grid, k, a, b):
    """Mass weighted inner product of two k-cochains.

    :param a: :class:`Cochain` or array of values.
    :param b: :class:`Cochain` or array of values.
    :return: ``sum(mass * a * b)``.
    """
    for c in (a, b):
        if isinstance(c, Cochain) and c.degree != k:
            raise ValueError('Degree mismatch: expected {}-cochain, got degree {}'.format(k, c.degree))
    a = np.asarray(getattr(a, 'values', a), dtype=float)
    b = np.asarray(getattr(b, 'values', b), dtype=float)
    mass = grid.mass(k)
    if a.shape != mass.shape or b.shape != mass.shape:
        raise ValueError('Cochains must have {} values, got {} and {}'.format(mass.size, a.size, b.size))
    return float(np.sum(mass * a * b))
