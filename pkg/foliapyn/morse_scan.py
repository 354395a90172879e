"""Tangential singularities of a function on a foliated chart.

The chart has leaf coordinates ``h`` (``p`` of them) and transverse
coordinates ``v``; the leaves are the slices ``v = const``. A tangential
singularity is a point where the leafwise gradient ``d_F f`` vanishes. It is
Morse when the tangential Hessian is nonsingular, its index being the number
of negative Hessian eigenvalues, and birth-death when the Hessian has a one
dimensional kernel along which the third derivative does not vanish.

Singularities are found leaf by leaf: seeds on a regular grid of the leaf are
refined with Newton's method on ``d_F f`` with ``v`` frozen. Near double
roots Newton converges linearly with ratio 1/2; two consecutive step ratios
close to 1/2 double the next step, which restores fast convergence.

An example::

    from foliapyn.morse_scan import Chart, find_tangential_singularities
    from foliapyn.potential import PolyTerm, TrigPotential

    f = TrigPotential(1, 1, polynomial=[PolyTerm(1 / 3, (3, 0)), PolyTerm(-1, (1, 1))])
    report = find_tangential_singularities(f, Chart(((-2, 2),), False), [(-0.5,), (0,), (0.5,)])
    print(report.counts)

This prints ``[(0, 0), (0, 0), (1, 1)]``; the birth-death point at ``v = 0`` is
neither of index 0 nor 1.
"""

import itertools
import logging
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SEED_RESOLUTION_DEFAULT = 32
MIN_SEED_RESOLUTION = 8
NEWTON_RESIDUAL_DEFAULT = 1e-10
DEDUP_RADIUS_DEFAULT = 1e-6
NONDEGENERATE_DEFAULT = 1e-8
CUBIC_DEFAULT = 1e-8
NEWTON_MAX_ITERATIONS = 100
NEWTON_STOP = 1e-14

MORSE = 'Morse'
BIRTH_DEATH = 'BirthDeath'
DEGENERATE = 'Degenerate'

GOOD = 'good'
GOOD_ALMOST_MORSE = 'good almost Morse'
INDETERMINATE = 'indeterminate'
NOT_GOOD = 'not good'

ScanTolerances = namedtuple('ScanTolerances', ['residual', 'dedup_radius', 'nondegenerate', 'cubic',
                                               'max_iterations'])
ScanTolerances.__new__.__defaults__ = (NEWTON_RESIDUAL_DEFAULT, DEDUP_RADIUS_DEFAULT, NONDEGENERATE_DEFAULT,
                                       CUBIC_DEFAULT, NEWTON_MAX_ITERATIONS)

TransversalityCertificate = namedtuple('TransversalityCertificate', ['h', 'v', 'sigma_min', 'transverse'])

MorseCheck = namedtuple('MorseCheck', ['passed', 'weak', 'strong', 'euler', 'violated'])

AuditReport = namedtuple('AuditReport', ['degenerate_leaf_fraction', 'flagged', 'verdict'])


class DegenerateLeafError(ValueError):
    """Raised when Morse inequalities are requested for leaves carrying non
    Morse singularities."""

    def __init__(self, samples):
        super().__init__('Leaves at {} carry degenerate singularities; use almost_morse_audit'.format(samples))
        self.samples = samples


class Classification(namedtuple('Classification', ['kind', 'index'])):
    """Type of a tangential singularity; ``index`` is ``None`` unless Morse."""

    def __str__(self):
        if self.kind == MORSE:
            return 'Morse({})'.format(self.index)
        return self.kind

    @property
    def is_morse(self):
        return self.kind == MORSE


class Chart(namedtuple('Chart', ['bounds', 'periodic'])):
    """Box of leaf coordinates; periodic charts are tori of the given box."""

    @staticmethod
    def unit(leaf_dim):
        return Chart(((0., 1.),) * leaf_dim, True)

    @property
    def dim(self):
        return len(self.bounds)

    @property
    def lower(self):
        return np.array([b[0] for b in self.bounds], dtype=float)

    @property
    def width(self):
        return np.array([b[1] - b[0] for b in self.bounds], dtype=float)

    def wrap(self, h):
        if not self.periodic:
            return h
        wrapped = self.lower + np.mod(h - self.lower, self.width)
        return np.where(wrapped >= self.lower + self.width, wrapped - self.width, wrapped)

    def contains(self, h, slack=1e-12):
        if self.periodic:
            return np.ones(np.shape(h)[:-1], dtype=bool)
        lower = self.lower - slack * self.width
        upper = self.lower + (1 + slack) * self.width
        return np.all((h >= lower) & (h <= upper), axis=-1)

    def distance(self, a, b):
        delta = np.abs(np.asarray(a) - np.asarray(b))
        if self.periodic:
            delta = np.minimum(delta, self.width - delta)
        return np.linalg.norm(delta, axis=-1)

    def seeds(self, resolution):
        axes = []
        for lower, upper in self.bounds:
            axes.append(np.linspace(lower, upper, resolution, endpoint=not self.periodic))
        return np.array(list(itertools.product(*axes)), dtype=float)


@dataclass
class SingularPoint:
    h: tuple
    v: tuple
    classification: Classification
    hessian_eigenvalues: tuple
    newton_residual: float

    def as_dict(self):
        return {
            'h': list(self.h),
            'v': list(self.v),
            'classification': str(self.classification),
            'index': self.classification.index,
            'hessian_eigenvalues': list(self.hessian_eigenvalues),
            'newton_residual': self.newton_residual,
        }


@dataclass
class MorseReport:
    samples: list
    points: list
    counts: list
    degenerate_leaf_fraction: float
    warnings: list = field(default_factory=list)

    def flagged(self):
        """Indices of samples whose leaf carries a non Morse point."""
        return [i for i, pts in enumerate(self.points) if any(not pt.classification.is_morse for pt in pts)]


def _ambient(f, h, v):
    h = np.atleast_2d(np.asarray(h, dtype=float))
    v = np.broadcast_to(np.asarray(v, dtype=float), (h.shape[0], f.transverse_dim))
    return np.hstack([h, v])


def _check_point(f, point, chart):
    point = np.asarray(point, dtype=float).ravel()
    if point.size != f.dim:
        raise ValueError('Point needs {} coordinates, got {}'.format(f.dim, point.size))
    if chart is not None and not chart.contains(point[:f.leaf_dim]):
        raise ValueError('Point {} lies outside the chart {}'.format(point, chart.bounds))
    return point.reshape(1, -1)


def leafwise_gradient(f, point, chart=None):
    """Leafwise differential ``d_F f`` at a point ``(h, v)``."""
    return f.leaf_gradient(_check_point(f, point, chart))[0]


def tangential_hessian(f, point, chart=None):
    """Tangential Hessian ``d_F^2 f`` at a point ``(h, v)``."""
    return f.leaf_hessian(_check_point(f, point, chart))[0]


def classify_singularity(f, point, tolerances=None):
    """Classify a tangential singularity.

    Morse when the smallest absolute Hessian eigenvalue exceeds
    ``nondegenerate * scale``; the scale is the largest of the norms of the
    Hessian, of ``f_hv`` and of the leafwise third derivatives. Otherwise
    birth-death when the Hessian kernel is one dimensional and the third
    derivative along it exceeds ``cubic``, else degenerate.

    :return: Tuple of :class:`Classification` and the Hessian eigenvalues.
    """
    tol = tolerances or ScanTolerances()
    point = np.asarray(point, dtype=float).reshape(1, -1)
    hessian = f.leaf_hessian(point)[0]
    mixed = f.mixed_hessian(point)[0]
    third = f.leaf_third(point)[0]
    eigenvalues, vectors = np.linalg.eigh(hessian)
    scale = max(np.linalg.norm(hessian, 2), np.linalg.norm(mixed, 2) if mixed.size else 0.,
                np.linalg.norm(third.ravel()), np.finfo(float).tiny)
    small = np.abs(eigenvalues) <= tol.nondegenerate * scale
    if not small.any():
        return Classification(MORSE, int(np.count_nonzero(eigenvalues < 0))), eigenvalues
    if np.count_nonzero(small) == 1:
        u = vectors[:, np.flatnonzero(small)[0]]
        cubic = np.einsum('ijk,i,j,k->', third, u, u, u)
        if abs(cubic) > tol.cubic:
            return Classification(BIRTH_DEATH, None), eigenvalues
    return Classification(DEGENERATE, None), eigenvalues


def _newton(f, seeds, v, chart, tol):
    x = seeds.copy()
    n = len(x)
    active = np.ones(n, dtype=bool)
    previous = np.full(n, np.nan)
    streak = np.zeros(n, dtype=int)
    max_step = 0.25 * chart.width.max()
    for _ in range(tol.max_iterations):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        points = _ambient(f, x[idx], v)
        gradient = f.leaf_gradient(points)
        converged = np.linalg.norm(gradient, axis=1) <= NEWTON_STOP
        active[idx[converged]] = False
        idx, gradient, points = idx[~converged], gradient[~converged], points[~converged]
        if idx.size == 0:
            break
        hessian = f.leaf_hessian(points)
        step = -np.einsum('nij,nj->ni', np.linalg.pinv(hessian, rcond=1e-14), gradient)
        size = np.linalg.norm(step, axis=1)
        ratio = size / previous[idx]
        linear = (ratio > 0.4) & (ratio < 0.6)
        streak[idx] = np.where(linear, streak[idx] + 1, 0)
        accelerate = streak[idx] >= 2
        step[accelerate] *= 2
        streak[idx[accelerate]] = 0
        size = np.linalg.norm(step, axis=1)
        clip = size > max_step
        step[clip] *= (max_step / size[clip])[:, None]
        previous[idx] = size
        x[idx] = chart.wrap(x[idx] + step)
        stalled = size <= 1e-16 * (1 + np.linalg.norm(x[idx], axis=1))
        active[idx[stalled]] = False
        if not chart.periodic:
            # far outside the chart Newton no longer tracks a root of interest
            away = ~chart.contains(x[idx], slack=1.)
            active[idx[away]] = False
    residual = np.linalg.norm(f.leaf_gradient(_ambient(f, x, v)), axis=1)
    return x, residual


def _deduplicate(chart, roots, residuals, radius):
    order = np.lexsort((np.arange(len(roots)), residuals))
    kept = []
    for i in order:
        if all(chart.distance(roots[i], roots[j]) > radius for j in kept):
            kept.append(i)
    kept.sort(key=lambda i: tuple(np.round(roots[i], 12)))
    return kept


def _in_cell(chart, root, lower, upper, slack=1e-9):
    root = np.asarray(root, dtype=float)
    if chart.periodic:
        root = np.where(root < lower - slack, root + chart.width, root)
    return bool(np.all((root >= lower - slack) & (root <= upper + slack)))


def _sign_change_warnings(f, chart, seeds, resolution, v, roots):
    """Warnings for seed cells in which every component of ``d_F f`` changes
    sign between the cell corners while no root was found in the cell.

    On one dimensional leaves such a sign change certifies a root; on higher
    dimensional leaves it marks a cell that very likely holds one.
    """
    p = chart.dim
    gradient = f.leaf_gradient(_ambient(f, seeds, v)).reshape((resolution,) * p + (p,))
    lowest, highest = gradient.copy(), gradient.copy()
    for offsets in itertools.product((0, 1), repeat=p):
        corner = gradient
        for axis, offset in enumerate(offsets):
            if offset:
                corner = np.roll(corner, -1, axis=axis)
        lowest = np.minimum(lowest, corner)
        highest = np.maximum(highest, corner)
    changes = np.all((lowest < 0) & (highest > 0), axis=-1)
    if not chart.periodic:
        # the last cell along each axis would wrap around
        changes = changes[(slice(0, -1),) * p]
    step = chart.width / (resolution if chart.periodic else resolution - 1)

    warnings = []
    for index in np.argwhere(changes):
        lower = chart.lower + index * step
        upper = lower + step
        if any(_in_cell(chart, root, lower, upper) for root in roots):
            continue
        cell = ' x '.join('[{:.6g}, {:.6g}]'.format(a, b) for a, b in zip(lower, upper))
        message = 'No root found for sign change of d_F f in {} at v={}'.format(cell, v)
        log.warning(message)
        warnings.append(message)
    return warnings


def find_tangential_singularities(f, chart=None, transversal_samples=((),), seed_resolution=SEED_RESOLUTION_DEFAULT,
                                  tolerances=None):
    """Find and classify all tangential singularities on sampled leaves.

    :param f: :class:`~foliapyn.potential.TrigPotential`.
    :param chart: :class:`Chart` of leaf coordinates. Defaults to the periodic
                  unit box, which needs a periodic ``f``.
    :param transversal_samples: Transverse coordinates ``v`` of the leaves.
    :param seed_resolution: Seeds per leaf axis, at least 8.
    :param tolerances: :class:`ScanTolerances`.
    :return: :class:`MorseReport`.
    """
    tol = tolerances or ScanTolerances()
    p = f.leaf_dim
    chart = chart or Chart.unit(p)
    if chart.dim != p:
        raise ValueError('Chart has {} axes, potential has leaf dimension {}'.format(chart.dim, p))
    if chart.periodic and not f.periodic:
        raise ValueError('A periodic chart needs a periodic potential')
    if seed_resolution < MIN_SEED_RESOLUTION:
        raise ValueError('Seed resolution must be at least {}, got {}'.format(MIN_SEED_RESOLUTION, seed_resolution))
    samples = [tuple(float(c) for c in np.atleast_1d(v)) for v in transversal_samples]
    if not samples:
        raise ValueError('Need at least one transversal sample')
    for v in samples:
        if len(v) != f.transverse_dim:
            raise ValueError('Transversal sample {} needs {} coordinates'.format(v, f.transverse_dim))
    if f.is_zero:
        raise ValueError('identically-critical function: every point is a tangential singularity')

    seeds = chart.seeds(seed_resolution)
    all_points, counts, warnings = [], [], []
    for v in samples:
        seed_points = _ambient(f, seeds, v)
        if (np.max(np.abs(f.leaf_gradient(seed_points))) <= tol.residual
                and np.max(np.abs(f.leaf_hessian(seed_points))) <= tol.residual):
            raise ValueError('identically-critical function on the leaf v={}'.format(v))

        roots, residuals = _newton(f, seeds, v, chart, tol)
        accepted = (residuals <= tol.residual) & chart.contains(roots)
        roots, residuals = roots[accepted], residuals[accepted]
        kept = _deduplicate(chart, roots, residuals, tol.dedup_radius)

        points = []
        for i in kept:
            point = np.concatenate([roots[i], v])
            classification, eigenvalues = classify_singularity(f, point, tol)
            points.append(SingularPoint(tuple(roots[i].tolist()), v, classification, tuple(eigenvalues.tolist()),
                                        float(residuals[i])))
        warnings.extend(_sign_change_warnings(f, chart, seeds, seed_resolution, v, roots[kept]))

        count = [0] * (p + 1)
        for pt in points:
            if pt.classification.is_morse:
                count[pt.classification.index] += 1
        all_points.append(points)
        counts.append(tuple(count))
        log.info('Leaf v={}: {} tangential singularities, Morse counts {}'.format(v, len(points), tuple(count)))

    flagged = sum(1 for pts in all_points if any(not pt.classification.is_morse for pt in pts))
    return MorseReport(samples, all_points, counts, flagged / len(samples), warnings)


def transversality_check(f, report):
    """Rank certificates of ``[f_hh | f_hv]`` at every reported point.

    The certificate is the smallest singular value of the ``p x (p+q)``
    matrix. ``transverse`` is ``None`` for non Morse points; for Morse points
    it is ``True`` when the Hessian is nonsingular and the certificate is
    positive.

    :return: One list of :class:`TransversalityCertificate` per leaf.
    """
    certificates = []
    for points in report.points:
        leaf = []
        for pt in points:
            ambient = np.concatenate([pt.h, pt.v]).reshape(1, -1)
            matrix = np.hstack([f.leaf_hessian(ambient)[0], f.mixed_hessian(ambient)[0]])
            sigma = float(np.linalg.svd(matrix, compute_uv=False).min())
            transverse = None
            if pt.classification.is_morse:
                transverse = bool(sigma > 0 and min(abs(e) for e in pt.hessian_eigenvalues) > 0)
            leaf.append(TransversalityCertificate(pt.h, pt.v, sigma, transverse))
        certificates.append(leaf)
    return certificates


def check_morse_counts(counts, betti):
    """Weak and strong Morse inequalities and the Euler characteristic
    equality for one leaf.

    :param counts: Morse counts ``m_0..m_p``.
    :param betti: Betti numbers ``b_0..b_p``.
    :return: :class:`MorseCheck`; ``violated`` lists the degrees whose weak or
             strong inequality fails.
    """
    counts = [int(m) for m in counts]
    betti = [int(b) for b in betti]
    if len(counts) != len(betti):
        raise ValueError('Counts {} and Betti numbers {} differ in length'.format(counts, betti))
    weak = [m >= b for m, b in zip(counts, betti)]
    strong = []
    for k in range(len(counts)):
        alternating = sum((-1) ** (k - i) * (counts[i] - betti[i]) for i in range(k + 1))
        strong.append(alternating >= 0)
    euler = sum((-1) ** k * m for k, m in enumerate(counts)) == sum((-1) ** k * b for k, b in enumerate(betti))
    violated = [k for k in range(len(counts)) if not (weak[k] and strong[k])]
    return MorseCheck(bool(all(weak) and all(strong) and euler), weak, strong, euler, violated)


def morse_inequalities(report, betti):
    """Morse inequalities on every leaf of a scan.

    :raises DegenerateLeafError: When a leaf carries non Morse points.
    :return: List of :class:`MorseCheck`, one per leaf.
    """
    flagged = report.flagged()
    if flagged:
        raise DegenerateLeafError([report.samples[i] for i in flagged])
    return [check_morse_counts(counts, betti) for counts in report.counts]


def almost_morse_audit(f, transversal_samples, chart=None, seed_resolution=SEED_RESOLUTION_DEFAULT,
                       tolerances=None, report=None):
    """Audit whether non Morse leaves are rare and of birth-death type.

    Verdicts: ``good`` when every sampled leaf is Morse; ``good almost
    Morse`` when all flagged points are birth-death and flagged samples are
    isolated; ``indeterminate`` when flagged samples are adjacent;
    ``not good`` when some point is degenerate beyond birth-death or every
    sample (of several) is flagged.

    :return: :class:`AuditReport`; ``flagged`` lists ``(v, points)`` pairs.
    """
    if report is None:
        report = find_tangential_singularities(f, chart, transversal_samples, seed_resolution, tolerances)
    indices = report.flagged()
    flagged = [(report.samples[i], [pt for pt in report.points[i] if not pt.classification.is_morse])
               for i in indices]
    n = len(report.samples)
    if not indices:
        verdict = GOOD
    elif any(pt.classification.kind == DEGENERATE for _, pts in flagged for pt in pts):
        verdict = NOT_GOOD
    elif n > 1 and len(indices) == n:
        verdict = NOT_GOOD
    elif any(b - a == 1 for a, b in zip(indices, indices[1:])):
        verdict = INDETERMINATE
    else:
        verdict = GOOD_ALMOST_MORSE
    log.info('Almost Morse audit: {} of {} leaves flagged, verdict {}'.format(len(indices), n, verdict))
    return AuditReport(report.degenerate_leaf_fraction, flagged, verdict)
