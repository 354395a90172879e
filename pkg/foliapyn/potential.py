"""Analytic potentials on chart coordinates.

A potential is a finite sum of trigonometric terms

    c * prod_i g_i(2 pi m_i x_i),   g_i in {cos, sin}, m_i integer,

and polynomial terms ``c * prod_i x_i^e_i``. Coordinates are ordered leaf
coordinates ``h`` first, then transverse coordinates ``v``. Every partial
derivative is evaluated in closed form, which is what the Morse scan and the
conjugation operators rely on.

An example::

    from foliapyn.potential import TrigPotential, TrigTerm

    phi = TrigPotential(1, trig=[TrigTerm(1., (1,), ('cos',))])
    print(phi.value([[0.5]]))

This prints ``[-1.]``.
"""

import logging
import math
from collections import namedtuple

import numpy as np

log = logging.getLogger(__name__)

TRIG_PHASES = ('cos', 'sin')

#: Default number of terms of a random potential
RANDOM_TERMS_DEFAULT = 2
#: Default maximal absolute frequency of a random potential
RANDOM_MAX_FREQUENCY_DEFAULT = 3

TrigTerm = namedtuple('TrigTerm', ['coefficient', 'frequencies', 'phases'])
PolyTerm = namedtuple('PolyTerm', ['coefficient', 'exponents'])


def _trig_derivative(phase, omega, x, order):
    # d^r/dx^r g(omega x) = omega^r * g_r(omega x), g_r cycling with period 4
    arg = omega * x
    r = order % 4
    if phase == 'cos':
        base = (np.cos(arg), -np.sin(arg), -np.cos(arg), np.sin(arg))[r]
    else:
        base = (np.sin(arg), np.cos(arg), -np.sin(arg), -np.cos(arg))[r]
    if order == 0:
        return base
    return omega ** order * base


def _poly_derivative(exponent, x, order):
    if order > exponent:
        return np.zeros_like(x)
    return math.perm(exponent, order) * x ** (exponent - order)


class TrigPotential(object):
    """Finite trigonometric/polynomial sum with exact derivatives.

    :param leaf_dim: Number of leaf coordinates ``h``.
    :param transverse_dim: Number of transverse coordinates ``v``.
    :param trig: Sequence of :class:`TrigTerm`.
    :param polynomial: Sequence of :class:`PolyTerm`.
    """

    def __init__(self, leaf_dim, transverse_dim=0, trig=(), polynomial=()):
        if leaf_dim < 1:
            raise ValueError('Leaf dimension must be positive, got {}'.format(leaf_dim))
        if transverse_dim < 0:
            raise ValueError('Transverse dimension must not be negative, got {}'.format(transverse_dim))
        self._leaf_dim = int(leaf_dim)
        self._transverse_dim = int(transverse_dim)
        n = self._leaf_dim + self._transverse_dim

        self._trig = []
        for term in trig:
            term = TrigTerm(*term)
            frequencies = tuple(int(m) for m in term.frequencies)
            phases = tuple(str(g) for g in term.phases)
            if len(frequencies) != n or len(phases) != n:
                raise ValueError('Trigonometric term needs {} frequencies and phases, got {}'.format(n, term))
            if any(g not in TRIG_PHASES for g in phases):
                raise ValueError('Phases must be one of {}, got {}'.format(TRIG_PHASES, phases))
            if any(m != f for m, f in zip(frequencies, term.frequencies)):
                raise ValueError('Frequencies must be integers, got {}'.format(term.frequencies))
            self._trig.append(TrigTerm(float(term.coefficient), frequencies, phases))

        self._poly = []
        for term in polynomial:
            term = PolyTerm(*term)
            exponents = tuple(int(e) for e in term.exponents)
            if len(exponents) != n or any(e < 0 for e in exponents):
                raise ValueError('Polynomial term needs {} non negative exponents, got {}'.format(n, term))
            self._poly.append(PolyTerm(float(term.coefficient), exponents))

    def __repr__(self):
        return 'TrigPotential(leaf_dim={}, transverse_dim={}, trig={}, polynomial={})'.format(
            self._leaf_dim, self._transverse_dim, self._trig, self._poly)

    @property
    def leaf_dim(self):
        return self._leaf_dim

    @property
    def transverse_dim(self):
        return self._transverse_dim

    @property
    def dim(self):
        return self._leaf_dim + self._transverse_dim

    @property
    def trig_terms(self):
        return tuple(self._trig)

    @property
    def poly_terms(self):
        return tuple(self._poly)

    @property
    def periodic(self):
        """``True`` if the potential is 1-periodic in every coordinate, which
        holds when all polynomial terms are constants."""
        return all(not any(t.exponents) for t in self._poly)

    @property
    def is_zero(self):
        return all(t.coefficient == 0 for t in self._trig) and all(t.coefficient == 0 for t in self._poly)

    def _points(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1) if points.size == self.dim else points.reshape(-1, 1)
        if points.shape[-1] != self.dim:
            raise ValueError('Points need {} coordinates, got shape {}'.format(self.dim, points.shape))
        return points

    def derivative(self, points, orders):
        """Partial derivative of the given orders.

        :param points: Array of shape ``(..., dim)``.
        :param orders: Derivative order per coordinate.
        :return: Array of shape ``(...)``.
        """
        points = self._points(points)
        orders = tuple(int(r) for r in orders)
        if len(orders) != self.dim or any(r < 0 for r in orders):
            raise ValueError('Need {} non negative orders, got {}'.format(self.dim, orders))
        total = np.zeros(points.shape[:-1])
        for term in self._trig:
            product = np.full(points.shape[:-1], term.coefficient)
            for i, (m, g, r) in enumerate(zip(term.frequencies, term.phases, orders)):
                product = product * _trig_derivative(g, 2 * np.pi * m, points[..., i], r)
            total = total + product
        for term in self._poly:
            product = np.full(points.shape[:-1], term.coefficient)
            for i, (e, r) in enumerate(zip(term.exponents, orders)):
                product = product * _poly_derivative(e, points[..., i], r)
            total = total + product
        return total

    def value(self, points):
        return self.derivative(points, (0,) * self.dim)

    def _unit(self, *axes):
        orders = [0] * self.dim
        for a in axes:
            orders[a] += 1
        return orders

    def leaf_gradient(self, points):
        """Tangential differential ``d_F f``, shape ``(..., p)``."""
        p = self._leaf_dim
        return np.stack([self.derivative(points, self._unit(i)) for i in range(p)], axis=-1)

    def leaf_hessian(self, points):
        """Tangential Hessian ``d_F^2 f``, shape ``(..., p, p)``."""
        p = self._leaf_dim
        rows = [np.stack([self.derivative(points, self._unit(i, j)) for j in range(p)], axis=-1) for i in range(p)]
        return np.stack(rows, axis=-2)

    def mixed_hessian(self, points):
        """Mixed second derivatives ``f_hv``, shape ``(..., p, q)``."""
        p, q = self._leaf_dim, self._transverse_dim
        if q == 0:
            return np.zeros(self._points(points).shape[:-1] + (p, 0))
        rows = [np.stack([self.derivative(points, self._unit(i, p + j)) for j in range(q)], axis=-1)
                for i in range(p)]
        return np.stack(rows, axis=-2)

    def leaf_third(self, points):
        """Tangential third derivatives, shape ``(..., p, p, p)``."""
        p = self._leaf_dim
        out = np.empty(self._points(points).shape[:-1] + (p, p, p))
        for i in range(p):
            for j in range(p):
                for k in range(p):
                    out[..., i, j, k] = self.derivative(points, self._unit(i, j, k))
        return out

    def as_dict(self):
        return {
            'leaf_dim': self._leaf_dim,
            'transverse_dim': self._transverse_dim,
            'trig': [[t.coefficient, list(t.frequencies), list(t.phases)] for t in self._trig],
            'polynomial': [[t.coefficient, list(t.exponents)] for t in self._poly],
        }

    @staticmethod
    def constant(leaf_dim, transverse_dim, value):
        n = leaf_dim + transverse_dim
        return TrigPotential(leaf_dim, transverse_dim, trig=[TrigTerm(value, (0,) * n, ('cos',) * n)])

    @staticmethod
    def zero(leaf_dim, transverse_dim=0):
        return TrigPotential(leaf_dim, transverse_dim)


def random_potential(rng, leaf_dim, transverse_dim=0, terms=RANDOM_TERMS_DEFAULT,
                     max_frequency=RANDOM_MAX_FREQUENCY_DEFAULT):
    """Draw a random trigonometric potential.

    Frequencies are uniform integers in ``[-max_frequency, max_frequency]``
    (not all zero), phases uniform in cos/sin, coefficients uniform in
    ``[-1, 1]``.

    :param rng: A :class:`numpy.random.Generator`.
    :return: :class:`TrigPotential`.
    """
    if terms < 1:
        raise ValueError('Need at least one term, got {}'.format(terms))
    if max_frequency < 1:
        raise ValueError('Maximal frequency must be at least 1, got {}'.format(max_frequency))
    n = leaf_dim + transverse_dim
    trig = []
    for _ in range(terms):
        frequencies = rng.integers(-max_frequency, max_frequency + 1, size=n)
        while not np.any(frequencies[:leaf_dim]):
            frequencies = rng.integers(-max_frequency, max_frequency + 1, size=n)
        # sin(0 x) vanishes, so zero frequencies always use cos
        phases = tuple(TRIG_PHASES[i] if m else 'cos' for i, m in zip(rng.integers(0, 2, size=n), frequencies))
        coefficient = float(rng.uniform(-1., 1.))
        trig.append(TrigTerm(coefficient, tuple(int(m) for m in frequencies), phases))
    potential = TrigPotential(leaf_dim, transverse_dim, trig=trig)
    log.info('Drew random potential {}'.format(potential))
    return potential
