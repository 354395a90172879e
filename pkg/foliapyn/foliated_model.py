"""Model measured foliations.

Four kinds of model are supported:

* ``product``: the product of a closed leaf (circle or torus) with a
  transversal torus. Every sampled leaf is the same grid, placed at its
  transverse position.
* ``suspension``: the suspension of a rational rotation ``r = a/b`` of the
  circle. Every leaf closes up after ``b`` turns around the fiber and is a
  circle of ``b * fiber`` vertices.
* ``chart``: a non periodic window of leaf coordinates with sampled
  transverse positions, for the tangential Morse scan only.
* ``kronecker``: the linear foliation of the 2-torus of slope ``alpha``. Its
  leaves are dense for irrational ``alpha`` and no leaf grid exists; its
  tangential complex is treated globally on the torus in the frequency domain
  (:func:`kronecker_tangential_complex`).

The transverse measure is a set of positive weights on the sampled leaves,
summing to 1. Measured dimensions are weighted sums of leafwise kernel
dimensions.
"""

import logging
from collections import namedtuple
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .leaf_complex import LeafGrid, laplacian
from .morse_scan import Chart
from .spectral import AmbiguousKernelError, KernelPolicy, kernel_dimension
from .witten import DeformationContext, LeafPlacement, OVERFLOW_BUDGET_DEFAULT, witten_laplacian

log = logging.getLogger(__name__)

PRODUCT = 'product'
SUSPENSION = 'suspension'
CHART = 'chart'
KRONECKER = 'kronecker'
KINDS = (PRODUCT, SUSPENSION, CHART, KRONECKER)

#: Tolerance on the total transverse measure
WEIGHT_SUM_TOLERANCE = 1e-12

#: Modes with ``|m + alpha n|`` not above this count as resonant
KRONECKER_TOLERANCE = 1e-12

MIN_KRONECKER_RESOLUTION = 8

Leaf = namedtuple('Leaf', ['grid', 'weight', 'placement'])


def uniform_weights(count):
    """Uniform transverse measure on ``count`` leaves."""
    if count < 1:
        raise ValueError('Need at least one leaf, got {}'.format(count))
    return np.full(count, 1. / count)


def _check_weights(weights, count):
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.size != count:
        raise ValueError('Need {} weights, got {}'.format(count, weights.size))
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise ValueError('Weights must be strictly positive, got {}'.format(weights))
    if abs(weights.sum() - 1.) > WEIGHT_SUM_TOLERANCE:
        raise ValueError('Weights must sum to 1 within {}, sum is {!r}'.format(WEIGHT_SUM_TOLERANCE, weights.sum()))
    return weights


class FoliationSpec(object):
    """Description of a model measured foliation.

    Use the constructors :meth:`product`, :meth:`suspension`, :meth:`chart`
    and :meth:`kronecker`.
    """

    def __init__(self, kind, **params):
        if kind not in KINDS:
            raise ValueError('Unknown foliation kind {}, expected one of {}'.format(kind, KINDS))
        self._kind = kind
        self._params = params

    def __repr__(self):
        return 'FoliationSpec({}, {})'.format(self._kind, self._params)

    def __getattr__(self, name):
        params = self.__dict__.get('_params', {})
        if name in params:
            return params[name]
        raise AttributeError(name)

    @property
    def kind(self):
        return self._kind

    @property
    def params(self):
        return dict(self._params)

    @staticmethod
    def product(leaf_dim, sizes, spacings=None, samples=1, transverse_dim=1, weights=None):
        """Product of a closed leaf with a transversal torus.

        :param samples: Sampled leaves per transverse axis, at positions
                        ``j / samples``.
        :param spacings: Grid steps; default to ``1 / size`` (unit leaf).
        """
        sizes = tuple(int(n) for n in np.atleast_1d(sizes))
        if spacings is None:
            spacings = tuple(1. / n for n in sizes)
        spacings = tuple(float(h) for h in np.atleast_1d(spacings))
        if samples < 1:
            raise ValueError('Need at least one transversal sample, got {}'.format(samples))
        if transverse_dim < 0:
            raise ValueError('Transverse dimension must not be negative, got {}'.format(transverse_dim))
        axis = [j / samples for j in range(samples)]
        positions = [tuple(v) for v in np.array(np.meshgrid(*([axis] * transverse_dim), indexing='ij'))
                     .reshape(transverse_dim, -1).T] if transverse_dim else [()]
        weights = _check_weights(uniform_weights(len(positions)) if weights is None else weights, len(positions))
        # validate the leaf grid early
        LeafGrid(leaf_dim, sizes, spacings)
        return FoliationSpec(PRODUCT, leaf_dim=leaf_dim, sizes=sizes, spacings=spacings, samples=positions,
                             transverse_dim=transverse_dim, weights=weights)

    @staticmethod
    def suspension(rotation, fiber, samples=1, weights=None):
        """Suspension of the rotation of the circle by ``rotation``.

        :param rotation: Exact rational, a :class:`fractions.Fraction`, an
                         integer or a string like ``'1/3'``.
        :param fiber: Vertices per turn around the fiber circle.
        """
        if isinstance(rotation, str):
            rotation = Fraction(rotation)
        if isinstance(rotation, (float, np.floating)):
            raise ValueError('Suspension rotation {!r} must be an exact rational: only rational rotations give '
                             'compact leaves; use a kronecker model for irrational slopes'.format(rotation))
        if not isinstance(rotation, (int, Fraction)):
            raise ValueError('Suspension rotation must be an exact rational, got {!r}'.format(rotation))
        rotation = Fraction(rotation)
        if fiber < 3:
            raise ValueError('Fiber resolution must be at least 3, got {}'.format(fiber))
        if samples < 1:
            raise ValueError('Need at least one transversal sample, got {}'.format(samples))
        weights = _check_weights(uniform_weights(samples) if weights is None else weights, samples)
        return FoliationSpec(SUSPENSION, rotation=rotation, fiber=int(fiber), samples=int(samples), weights=weights,
                             transverse_dim=1)

    @staticmethod
    def chart(bounds, samples, weights=None):
        """Non periodic window of leaf coordinates for the Morse scan.

        :param bounds: ``(lower, upper)`` per leaf axis.
        :param samples: Transverse coordinates of the sampled leaves.
        """
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if not bounds or len(bounds) > 2 or any(hi <= lo for lo, hi in bounds):
            raise ValueError('Chart needs 1 or 2 increasing bounds, got {}'.format(bounds))
        samples = [tuple(float(c) for c in np.atleast_1d(v)) for v in samples]
        if not samples:
            raise ValueError('Need at least one transversal sample')
        weights = _check_weights(uniform_weights(len(samples)) if weights is None else weights, len(samples))
        return FoliationSpec(CHART, bounds=bounds, samples=samples, weights=weights, leaf_dim=len(bounds),
                             transverse_dim=len(samples[0]))

    @staticmethod
    def kronecker(alpha, resolution):
        alpha = float(alpha)
        resolutions = tuple(int(n) for n in np.atleast_1d(resolution))
        if any(n < MIN_KRONECKER_RESOLUTION for n in resolutions):
            raise ValueError('Kronecker resolution must be at least {}, got {}'.format(
                MIN_KRONECKER_RESOLUTION, resolutions))
        return FoliationSpec(KRONECKER, alpha=alpha, resolution=resolutions)

    @property
    def leaf_dimension(self):
        if self._kind == SUSPENSION:
            return 1
        if self._kind == KRONECKER:
            return 1
        return self._params['leaf_dim']

    def as_dict(self):
        out = {'kind': self._kind}
        for key, value in sorted(self._params.items()):
            if isinstance(value, np.ndarray):
                value = value.tolist()
            elif isinstance(value, Fraction):
                value = str(value)
            out[key] = value
        return out


@dataclass(frozen=True)
class LeafField:
    """Sampled leaves with their transverse weights."""
    leaves: tuple
    provenance: FoliationSpec

    @property
    def dim_p(self):
        return self.leaves[0].grid.dim_p

    @property
    def weights(self):
        return np.array([leaf.weight for leaf in self.leaves])


@dataclass(frozen=True, eq=False)
class ScanModel:
    """Chart model: a window of leaf coordinates with weighted transverse
    samples and no leaf grids. Only the tangential Morse scan runs on it."""
    chart: Chart
    samples: tuple
    weights: np.ndarray
    provenance: FoliationSpec
    leaves: tuple = ()

    @property
    def dim_p(self):
        return self.chart.dim


def instantiate_model(spec):
    """Build the sampled leaves of a model foliation.

    :return: :class:`LeafField`, or :class:`ScanModel` for a chart model.
    :raises ValueError: For kronecker models, which have no leaf grids.
    """
    if spec.kind == PRODUCT:
        grid = LeafGrid(spec.leaf_dim, spec.sizes, spec.spacings)
        leaves = tuple(Leaf(grid, float(w), LeafPlacement.at(v)) for v, w in zip(spec.samples, spec.weights))
    elif spec.kind == SUSPENSION:
        turns = spec.rotation.denominator
        grid = LeafGrid(1, (turns * spec.fiber,), (1. / spec.fiber,))
        slope = float(spec.rotation)
        leaves = tuple(Leaf(grid, float(w), LeafPlacement.at((j / (spec.samples * turns),), (slope,)))
                       for j, w in enumerate(spec.weights))
    elif spec.kind == CHART:
        log.info('Instantiated chart model with {} transversal samples'.format(len(spec.samples)))
        return ScanModel(Chart(spec.bounds, False), tuple(spec.samples), np.asarray(spec.weights, dtype=float), spec)
    else:
        raise ValueError('A kronecker model has dense leaves; use kronecker_tangential_complex')
    log.info('Instantiated {} model with {} leaves'.format(spec.kind, len(leaves)))
    return LeafField(leaves, spec)


def leaf_kernel_reports(field, k, epsilon=0., potential=None, policy=None, overflow_budget=OVERFLOW_BUDGET_DEFAULT):
    """Spectrum report of the (Witten) Laplacian of degree ``k`` on every leaf."""
    policy = policy or KernelPolicy.default()
    if epsilon > 0 and potential is None:
        raise ValueError('A potential is needed for epsilon={}'.format(epsilon))
    if not field.leaves:
        raise ValueError('A {} model has no leaf grids'.format(field.provenance.kind))
    reports = []
    for leaf in field.leaves:
        leaf.grid.require_periodic()
        if potential is None:
            op = laplacian(leaf.grid, k)
        else:
            ctx = DeformationContext(leaf.grid, potential, epsilon, leaf.placement, overflow_budget)
            op = witten_laplacian(ctx, k)
        reports.append(kernel_dimension(op, policy))
    return reports


def lambda_dimension(field, k, epsilon=0., potential=None, policy=None, overflow_budget=OVERFLOW_BUDGET_DEFAULT):
    """Measured dimension ``sum_j w_j dim Ker Delta_eps^k(L_j)``.

    :raises AmbiguousKernelError: Carrying the per-leaf reports when any leaf
                                  is ambiguous.
    """
    reports = leaf_kernel_reports(field, k, epsilon, potential, policy, overflow_budget)
    if any(r.ambiguous for r in reports):
        raise AmbiguousKernelError(reports)
    return float(sum(leaf.weight * r.kernel_dim for leaf, r in zip(field.leaves, reports)))


def lambda_euler_characteristic(field, epsilon=0., potential=None, policy=None,
                                overflow_budget=OVERFLOW_BUDGET_DEFAULT):
    return float(sum((-1) ** k * lambda_dimension(field, k, epsilon, potential, policy, overflow_budget)
                     for k in range(field.dim_p + 1)))


@dataclass(frozen=True, eq=False)
class KroneckerComplex:
    """Tangential derivative of the Kronecker foliation of slope ``alpha`` on
    the ``N x N`` torus, diagonal in Fourier modes."""
    alpha: float
    resolution: int
    modes: np.ndarray
    symbols: np.ndarray
    kernel_dim: int
    cokernel_dim: int
    smallest_divisor: float

    def apply(self, values):
        """Apply ``d/dx + alpha d/dy`` to samples ``values[i, j]`` at
        ``(i / N, j / N)`` spectrally."""
        values = np.asarray(values, dtype=float)
        n = self.resolution
        if values.shape != (n, n):
            raise ValueError('Samples need shape {}, got {}'.format((n, n), values.shape))
        m = np.fft.fftfreq(n, 1. / n)
        symbol = 2j * np.pi * (m[:, None] + self.alpha * m[None, :])
        return np.real(np.fft.ifft2(symbol * np.fft.fft2(values)))

    def as_dict(self):
        return {
            'alpha': self.alpha,
            'resolution': self.resolution,
            'kernel_dim': self.kernel_dim,
            'cokernel_dim': self.cokernel_dim,
            'smallest_divisor': self.smallest_divisor,
        }


def kronecker_tangential_complex(alpha, n):
    """Degree 0 to 1 tangential complex of the Kronecker foliation.

    Mode ``(m, n)`` is multiplied by ``2 pi i (m + alpha n)`` for
    ``-N/2 < m, n <= N/2``. Kernel and cokernel are spanned by the modes with
    ``|m + alpha n| <= 1e-12``; the smallest nonzero ``|m + alpha n|`` is the
    small divisor diagnostic.
    """
    n = int(n)
    if n < MIN_KRONECKER_RESOLUTION:
        raise ValueError('Kronecker resolution must be at least {}, got {}'.format(MIN_KRONECKER_RESOLUTION, n))
    alpha = float(alpha)
    axis = np.arange(-n // 2 + 1, n // 2 + 1)
    m, k = np.meshgrid(axis, axis, indexing='ij')
    divisors = np.abs(m + alpha * k)
    resonant = divisors <= KRONECKER_TOLERANCE
    kernel = int(np.count_nonzero(resonant))
    smallest = float(divisors[~resonant].min())
    log.info('Kronecker complex alpha={}, N={}: kernel {}, smallest divisor {:.3e}'.format(alpha, n, kernel, smallest))
    return KroneckerComplex(alpha, n, np.stack([m, k], axis=-1), 2j * np.pi * (m + alpha * k), kernel, kernel,
                            smallest)
