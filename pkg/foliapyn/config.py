"""Run configuration files.

A configuration is an INI file read with :mod:`configparser`. Every value is
a JSON literal; plain words are accepted as strings. Unknown sections and
keys are rejected.

An example::

    [model]
    kind = product
    leaf_dim = 2
    sizes = [16, 16]
    samples = 5

    [potential]
    random_terms = 2

    [run]
    epsilons = [0, 0.5, 1, 2, 5]
    seed = 7

The ``[tolerances]`` section overrides any entry of :class:`Tolerances`.
"""

import configparser
import json
import logging
import pathlib
from fractions import Fraction

import numpy as np

from .foliated_model import CHART, KINDS, KRONECKER, PRODUCT, SUSPENSION, FoliationSpec
from .morse_scan import (CUBIC_DEFAULT, DEDUP_RADIUS_DEFAULT, NEWTON_MAX_ITERATIONS, NEWTON_RESIDUAL_DEFAULT,
                         NONDEGENERATE_DEFAULT, SEED_RESOLUTION_DEFAULT, ScanTolerances)
from .potential import RANDOM_MAX_FREQUENCY_DEFAULT, RANDOM_TERMS_DEFAULT, PolyTerm, TrigPotential, TrigTerm, \
    random_potential
from .spectral import (CLUSTER_RATIO_DEFAULT, FACTORED_FLOOR_DEFAULT, KERNEL_FLOOR_DEFAULT, MIN_GAP_RATIO_DEFAULT,
                       WINDOW_DEFAULT, KernelPolicy)
from .witten import OVERFLOW_BUDGET_DEFAULT

log = logging.getLogger(__name__)

GOLDEN_RATIO = (1 + 5 ** 0.5) / 2

SEED_DEFAULT = 0
EIGENVALUE_COUNT_DEFAULT = 8
HODGE_SAMPLES_DEFAULT = 100
OUTPUT_DIR_DEFAULT = 'reports'

DECOMPOSITION_TOLERANCE_DEFAULT = 1e-10
ANGLE_TOLERANCE_DEFAULT = 1e-8
BLOCK_TOLERANCE_DEFAULT = 1e-10
COMPLEX_TOLERANCE_DEFAULT = 1e-12
ADJOINT_TOLERANCE_DEFAULT = 1e-10

SECTIONS = {
    'model': ('kind', 'leaf_dim', 'sizes', 'spacings', 'samples', 'transverse_dim', 'weights', 'rotation', 'fiber',
              'bounds', 'alpha', 'resolution'),
    'potential': ('trig', 'polynomial', 'random_terms', 'random_max_frequency'),
    'run': ('epsilons', 'degrees', 'eigenvalue_count', 'hodge_samples', 'seed', 'output_dir'),
    'tolerances': ('overflow_budget', 'kernel_floor', 'factored_floor', 'min_gap_ratio', 'cluster_ratio', 'window',
                   'decomposition', 'angle', 'block', 'complex', 'adjoint', 'newton_residual', 'dedup_radius',
                   'nondegenerate', 'cubic', 'max_iterations', 'seed_resolution'),
}


class ConfigError(ValueError):
    """Raised for invalid configuration files."""


class Tolerances:
    """Every tolerance used by the commands, with its default."""

    def __init__(self):
        self.overflow_budget = OVERFLOW_BUDGET_DEFAULT
        self.kernel_floor = KERNEL_FLOOR_DEFAULT
        self.factored_floor = FACTORED_FLOOR_DEFAULT
        self.min_gap_ratio = MIN_GAP_RATIO_DEFAULT
        self.cluster_ratio = CLUSTER_RATIO_DEFAULT
        self.window = WINDOW_DEFAULT

        self.decomposition = DECOMPOSITION_TOLERANCE_DEFAULT
        self.angle = ANGLE_TOLERANCE_DEFAULT
        self.block = BLOCK_TOLERANCE_DEFAULT
        self.complex = COMPLEX_TOLERANCE_DEFAULT
        self.adjoint = ADJOINT_TOLERANCE_DEFAULT

        self.newton_residual = NEWTON_RESIDUAL_DEFAULT
        self.dedup_radius = DEDUP_RADIUS_DEFAULT
        self.nondegenerate = NONDEGENERATE_DEFAULT
        self.cubic = CUBIC_DEFAULT
        self.max_iterations = NEWTON_MAX_ITERATIONS
        self.seed_resolution = SEED_RESOLUTION_DEFAULT

    @staticmethod
    def load(values):
        """Tolerances with the given overrides.

        :param values: Mapping of tolerance name to value.
        """
        instance = Tolerances()
        for key, value in values.items():
            if not hasattr(instance, key):
                raise ConfigError('Unknown tolerance {}'.format(key))
            default = getattr(instance, key)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                raise ConfigError('Tolerance {} must be a positive number, got {!r}'.format(key, value))
            setattr(instance, key, type(default)(value))
        return instance

    def as_dict(self):
        return dict(sorted(vars(self).items()))

    def kernel_policy(self, seed=SEED_DEFAULT):
        return KernelPolicy(self.kernel_floor, self.factored_floor, self.min_gap_ratio, self.cluster_ratio,
                            self.window, seed)

    def scan_tolerances(self):
        return ScanTolerances(self.newton_residual, self.dedup_radius, self.nondegenerate, self.cubic,
                              self.max_iterations)


class RunConfig:
    """A validated run configuration."""

    def __init__(self, model, potential, epsilons, degrees, eigenvalue_count, hodge_samples, seed, output_dir,
                 tolerances, source=None):
        self.model = model
        self.potential = potential
        self.epsilons = epsilons
        self.degrees = degrees
        self.eigenvalue_count = eigenvalue_count
        self.hodge_samples = hodge_samples
        self.seed = seed
        self.output_dir = output_dir
        self.tolerances = tolerances
        self.source = source

    @property
    def policy(self):
        return self.tolerances.kernel_policy(self.seed)

    def degree_list(self, dim_p):
        if self.degrees is None:
            return list(range(dim_p + 1))
        for k in self.degrees:
            if not 0 <= k <= dim_p:
                raise ConfigError('Degree {} out of range 0..{}'.format(k, dim_p))
        return list(self.degrees)

    def as_dict(self):
        return {
            'model': self.model.as_dict(),
            'potential': self.potential.as_dict() if self.potential is not None else None,
            'epsilons': list(self.epsilons),
            'degrees': list(self.degrees) if self.degrees is not None else None,
            'eigenvalue_count': self.eigenvalue_count,
            'hodge_samples': self.hodge_samples,
            'seed': self.seed,
        }


def _value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip()


def _read_sections(parser):
    if parser.defaults():
        raise ConfigError('Unknown keys in DEFAULT section: {}'.format(sorted(parser.defaults())))
    sections = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError('Unknown section [{}], expected one of {}'.format(name, sorted(SECTIONS)))
        values = {}
        for key, raw in parser.items(name):
            if key not in SECTIONS[name]:
                raise ConfigError('Unknown key {} in section [{}]'.format(key, name))
            values[key] = _value(raw)
        sections[name] = values
    return sections


def _int(values, key, default=None, minimum=None):
    value = values.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError('{} must be an integer, got {!r}'.format(key, value))
    if minimum is not None and value < minimum:
        raise ConfigError('{} must be at least {}, got {}'.format(key, minimum, value))
    return value


def _require(values, key, section):
    if key not in values:
        raise ConfigError('Missing key {} in section [{}]'.format(key, section))
    return values[key]


def _alpha(value):
    if isinstance(value, str):
        if value.lower() == 'golden':
            return GOLDEN_RATIO
        try:
            return float(Fraction(value))
        except ValueError:
            raise ConfigError('Invalid alpha {!r}'.format(value))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError('Invalid alpha {!r}'.format(value))
    return float(value)


def _model(values):
    kind = _require(values, 'kind', 'model')
    if kind not in KINDS:
        raise ConfigError('Unknown model kind {!r}, expected one of {}'.format(kind, KINDS))
    allowed = {
        PRODUCT: {'kind', 'leaf_dim', 'sizes', 'spacings', 'samples', 'transverse_dim', 'weights'},
        SUSPENSION: {'kind', 'rotation', 'fiber', 'samples', 'weights'},
        CHART: {'kind', 'bounds', 'samples', 'weights'},
        KRONECKER: {'kind', 'alpha', 'resolution'},
    }[kind]
    extra = sorted(set(values) - allowed)
    if extra:
        raise ConfigError('Keys {} do not apply to a {} model'.format(extra, kind))
    try:
        if kind == PRODUCT:
            return FoliationSpec.product(_int(values, 'leaf_dim', 1, 1), _require(values, 'sizes', 'model'),
                                         values.get('spacings'), _int(values, 'samples', 1, 1),
                                         _int(values, 'transverse_dim', 1, 0), values.get('weights'))
        if kind == SUSPENSION:
            rotation = _require(values, 'rotation', 'model')
            if isinstance(rotation, float):
                raise ConfigError('Suspension rotation {!r} must be an exact rational such as "1/3"; use a '
                                  'kronecker model for irrational slopes'.format(rotation))
            return FoliationSpec.suspension(Fraction(str(rotation)), _int(values, 'fiber', 32, 3),
                                            _int(values, 'samples', 1, 1), values.get('weights'))
        if kind == CHART:
            samples = _require(values, 'samples', 'model')
            if not isinstance(samples, list):
                raise ConfigError('Chart samples must be a list of transverse coordinates')
            return FoliationSpec.chart(_require(values, 'bounds', 'model'), samples, values.get('weights'))
        return FoliationSpec.kronecker(_alpha(_require(values, 'alpha', 'model')),
                                       values.get('resolution', [16, 32, 64]))
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError('Invalid [model] section: {}'.format(e))


def _transverse_dim(model):
    return 0 if model.kind == KRONECKER else model.transverse_dim


def _potential(values, model, seed):
    if values is None:
        return None
    if model.kind == KRONECKER:
        raise ConfigError('A kronecker model takes no potential')
    leaf_dim = model.leaf_dimension
    transverse_dim = _transverse_dim(model)
    trig = values.get('trig', [])
    polynomial = values.get('polynomial', [])
    try:
        if trig or polynomial:
            if 'random_terms' in values or 'random_max_frequency' in values:
                raise ConfigError('Give either explicit or random potential terms, not both')
            return TrigPotential(leaf_dim, transverse_dim, trig=[TrigTerm(*t) for t in trig],
                                 polynomial=[PolyTerm(*t) for t in polynomial])
        rng = np.random.default_rng(seed)
        return random_potential(rng, leaf_dim, transverse_dim,
                                _int(values, 'random_terms', RANDOM_TERMS_DEFAULT, 1),
                                _int(values, 'random_max_frequency', RANDOM_MAX_FREQUENCY_DEFAULT, 1))
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError('Invalid [potential] section: {}'.format(e))


def _epsilons(values):
    epsilons = values.get('epsilons', [0.])
    if not isinstance(epsilons, list) or not epsilons:
        raise ConfigError('epsilons must be a non empty list, got {!r}'.format(epsilons))
    if any(isinstance(e, bool) or not isinstance(e, (int, float)) for e in epsilons):
        raise ConfigError('epsilons must be numbers, got {!r}'.format(epsilons))
    epsilons = [float(e) for e in epsilons]
    if any(e < 0 for e in epsilons):
        raise ConfigError('epsilons must not be negative, got {}'.format(epsilons))
    if any(b <= a for a, b in zip(epsilons, epsilons[1:])):
        raise ConfigError('epsilons must be strictly ascending, got {}'.format(epsilons))
    return tuple(epsilons)


def parse_config(text, seed=None, output_dir=None, source=None):
    """Parse and validate configuration text.

    :param seed: Overrides ``[run] seed``.
    :param output_dir: Overrides ``[run] output_dir``.
    :return: :class:`RunConfig`.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source or '<config>')
    except configparser.Error as e:
        raise ConfigError('Cannot parse configuration: {}'.format(e))
    sections = _read_sections(parser)
    if 'model' not in sections:
        raise ConfigError('Missing section [model]')

    run = sections.get('run', {})
    if seed is None:
        seed = _int(run, 'seed', SEED_DEFAULT, 0)
    tolerances = Tolerances.load(sections.get('tolerances', {}))
    model = _model(sections['model'])
    potential = _potential(sections.get('potential'), model, seed)
    degrees = run.get('degrees')
    if degrees is not None and (not isinstance(degrees, list) or any(not isinstance(k, int) for k in degrees)):
        raise ConfigError('degrees must be a list of integers, got {!r}'.format(degrees))
    if output_dir is None:
        output_dir = run.get('output_dir', OUTPUT_DIR_DEFAULT)

    config = RunConfig(model, potential, _epsilons(run),
                       tuple(degrees) if degrees is not None else None,
                       _int(run, 'eigenvalue_count', EIGENVALUE_COUNT_DEFAULT, 1),
                       _int(run, 'hodge_samples', HODGE_SAMPLES_DEFAULT, 1),
                       seed, pathlib.Path(output_dir), tolerances, source)
    log.info('Loaded configuration {}: {} model, epsilons {}'.format(source, model.kind, list(config.epsilons)))
    return config


def load_config(path, seed=None, output_dir=None):
    """Read a configuration file.

    :param path: Path-like object.
    :return: :class:`RunConfig`.
    """
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError('Cannot read configuration {}: {}'.format(path, e))
    return parse_config(text, seed, output_dir, str(path))
