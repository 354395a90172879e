"""Commands and their machine readable reports.

Every command takes a :class:`~foliapyn.config.RunConfig`, writes its report
files to the configured output directory and returns a
:class:`CommandResult`. Exit codes are

* 0: every checked claim holds,
* 1: operational error (invalid config, ambiguous kernel, overflow budget,
  eigensolver failure); ``error.json`` describes it,
* 2: a mathematical claim fails on the instance.

JSON reports are UTF-8 with sorted keys; non finite numbers are written as
the strings ``"inf"``, ``"-inf"`` and ``"nan"``. Spectra are written as CSV
with CRLF line endings. Reports carry no timestamps, so identical
configurations and seeds give byte identical files.
"""

import json
import logging
import math
import pathlib
from collections import namedtuple
from fractions import Fraction

import numpy as np
import pandas as pd

from . import __version__, githash
from .config import ConfigError
from .foliated_model import CHART, KRONECKER, PRODUCT, instantiate_model, kronecker_tangential_complex, \
    leaf_kernel_reports
from .hodge import (CochainComplex, betti_numbers, complex_residual, decomposition_errors, transport,
                    verify_block_structure, verify_transport_identities)
from .leaf_complex import LeafGrid
from .morse_scan import Chart, almost_morse_audit, find_tangential_singularities, morse_inequalities, \
    transversality_check
from .potential import TrigPotential
from .spectral import AmbiguousKernelError, EigensolverError, spectral_flow
from .witten import DeformationContext, DimensionMismatchError, OverflowBudgetError

log = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_CLAIM = 2

CSV_FLOAT_FORMAT = '%.17g'

CommandResult = namedtuple('CommandResult', ['exit_code', 'files'])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(obj, (Fraction, pathlib.PurePath)):
        return str(obj)
    return obj


def generator_info():
    return {'name': 'foliapyn', 'version': __version__, 'githash': githash()}


def write_json(path, payload):
    """Write a report as UTF-8 JSON with sorted keys.

    :return: The path written.
    """
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False, ensure_ascii=False)
    with path.open('w', encoding='utf-8', newline='\n') as f:
        f.write(text + '\n')
    log.info('Wrote report {}'.format(path))
    return path


def write_csv(path, frame):
    """Write a data frame as RFC 4180 CSV (CRLF line endings)."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, header=True, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\r\n',
                 encoding='utf-8')
    log.info('Wrote spectra {}'.format(path))
    return path


def _payload(command, config, **content):
    payload = {
        'command': command,
        'generator': generator_info(),
        'config': config.as_dict(),
        'tolerances': config.tolerances.as_dict(),
    }
    payload.update(content)
    return payload


def _potential(config, dim_p, transverse_dim):
    if config.potential is not None:
        return config.potential
    return TrigPotential.zero(dim_p, transverse_dim)


def _spectral_field(config):
    if config.model.kind in (CHART, KRONECKER):
        raise ConfigError('A {} model has no leaf grids for spectral commands'.format(config.model.kind))
    return instantiate_model(config.model)


def _betti_kronecker(config):
    rows = [kronecker_tangential_complex(config.model.alpha, n).as_dict() for n in config.model.resolution]
    passed = all(r['kernel_dim'] == r['cokernel_dim'] for r in rows)
    return rows, passed


def cmd_betti(config):
    """Measured Betti numbers per epsilon and degree, and their epsilon
    invariance. Writes ``betti.json``."""
    if config.model.kind == KRONECKER:
        rows, passed = _betti_kronecker(config)
        path = write_json(config.output_dir / 'betti.json',
                          _payload('betti', config, kronecker=rows, passed=passed))
        return CommandResult(EXIT_PASS if passed else EXIT_CLAIM, [path])

    field = _spectral_field(config)
    potential = _potential(config, field.dim_p, len(field.leaves[0].placement.transverse))
    policy = config.policy
    degrees = config.degree_list(field.dim_p)
    rows = []
    for epsilon in config.epsilons:
        dims, leaf_dims, leaf_reports = [], [], []
        for k in degrees:
            reports = leaf_kernel_reports(field, k, epsilon, potential, policy, config.tolerances.overflow_budget)
            ambiguous = [r for r in reports if r.ambiguous]
            if ambiguous:
                raise AmbiguousKernelError(ambiguous)
            dims.append(float(sum(leaf.weight * r.kernel_dim for leaf, r in zip(field.leaves, reports))))
            leaf_dims.append([r.kernel_dim for r in reports])
            leaf_reports.append([r.as_dict(limit=config.eigenvalue_count) for r in reports])
        euler = None
        if len(degrees) == field.dim_p + 1:
            euler = float(sum((-1) ** k * d for k, d in zip(degrees, dims)))
        rows.append({'epsilon': epsilon, 'lambda_dimensions': dims, 'lambda_euler_characteristic': euler,
                     'leaf_kernel_dims': leaf_dims, 'leaf_reports': leaf_reports})
        log.info('epsilon={}: measured dimensions {}'.format(epsilon, dims))

    reference = rows[0]
    invariant = all(r['leaf_kernel_dims'] == reference['leaf_kernel_dims']
                    and r['lambda_dimensions'] == reference['lambda_dimensions'] for r in rows)
    path = write_json(config.output_dir / 'betti.json',
                      _payload('betti', config, degrees=degrees, rows=rows, invariant=invariant, passed=invariant))
    return CommandResult(EXIT_PASS if invariant else EXIT_CLAIM, [path])


def cmd_witten_sweep(config):
    """Low lying spectrum of the Witten Laplacian of the first leaf along the
    epsilon list. Writes ``sweep.csv`` and ``sweep_summary.json``."""
    field = _spectral_field(config)
    leaf = field.leaves[0]
    potential = _potential(config, field.dim_p, len(leaf.placement.transverse))
    policy = config.policy
    degrees = config.degree_list(field.dim_p)

    frames = [spectral_flow(leaf.grid, potential, config.epsilons, k, leaf.placement, policy,
                            config.eigenvalue_count, config.tolerances.overflow_budget) for k in degrees]
    flow = pd.concat(frames, ignore_index=True)

    spectra = []
    summary = []
    for row in flow.itertuples(index=False):
        for i, value in enumerate(row.eigenvalues):
            spectra.append((row.epsilon, row.degree, i, value))
        summary.append({'epsilon': row.epsilon, 'degree': int(row.degree),
                        'kernel_dim': None if row.error else int(row.kernel_dim),
                        'cluster_count': None if row.error else int(row.cluster_count),
                        'cluster_gap_ratio': row.cluster_gap_ratio, 'gap_ratio': row.gap_ratio,
                        'threshold': row.threshold, 'ambiguous': row.ambiguous, 'error': row.error})
    spectra = pd.DataFrame(spectra, columns=['epsilon', 'degree', 'eigenvalue_index', 'eigenvalue'])

    errors = [s for s in summary if s['error'] is not None or s['ambiguous']]
    invariant = {}
    for k in degrees:
        dims = {s['kernel_dim'] for s in summary if s['degree'] == k and s['error'] is None}
        invariant[str(k)] = len(dims) <= 1

    morse_counts = None
    if potential.periodic and config.model.kind == PRODUCT and not potential.is_zero:
        try:
            scan = find_tangential_singularities(potential, Chart.unit(field.dim_p), [leaf.placement.transverse],
                                                 config.tolerances.seed_resolution,
                                                 config.tolerances.scan_tolerances())
            morse_counts = list(scan.counts[0]) if not scan.flagged() else None
        except ValueError as e:
            log.warning('Morse counts of the sweep leaf unavailable: {}'.format(e))

    csv_path = write_csv(config.output_dir / 'sweep.csv', spectra)
    passed = not errors and all(invariant.values())
    json_path = write_json(config.output_dir / 'sweep_summary.json',
                           _payload('witten-sweep', config, rows=summary, kernel_invariant=invariant,
                                    morse_counts=morse_counts, leaf_transverse=list(leaf.placement.transverse),
                                    passed=passed))
    files = [csv_path, json_path]
    if errors:
        return CommandResult(EXIT_ERROR, files)
    return CommandResult(EXIT_PASS if passed else EXIT_CLAIM, files)


def cmd_morse_scan(config):
    """Tangential singularities, transversality certificates, Morse
    inequalities and the almost Morse audit. Writes ``morse.json``."""
    f = config.potential
    if f is None:
        raise ConfigError('morse-scan needs a [potential] section')
    model = config.model
    if model.kind == CHART:
        scan = instantiate_model(model)
        chart, samples = scan.chart, scan.samples
    elif model.kind == PRODUCT:
        chart, samples = Chart.unit(model.leaf_dim), model.samples
    else:
        raise ConfigError('morse-scan needs a chart or product model, got {}'.format(model.kind))
    tolerances = config.tolerances.scan_tolerances()
    report = find_tangential_singularities(f, chart, samples, config.tolerances.seed_resolution, tolerances)
    certificates = transversality_check(f, report)
    audit = almost_morse_audit(f, samples, chart, report=report)

    leaves = []
    for v, points, counts, leaf_certificates in zip(report.samples, report.points, report.counts, certificates):
        entries = []
        for pt, certificate in zip(points, leaf_certificates):
            entry = pt.as_dict()
            entry.update(sigma_min=certificate.sigma_min, transverse=certificate.transverse)
            entries.append(entry)
        leaves.append({'v': list(v), 'counts': list(counts), 'points': entries})

    betti = None
    inequalities = None
    inequalities_passed = True
    if model.kind == PRODUCT:
        betti = list(betti_numbers(LeafGrid(model.leaf_dim, model.sizes, model.spacings), policy=config.policy))
        if not report.flagged():
            checks = morse_inequalities(report, betti)
            inequalities = [c._asdict() for c in checks]
            inequalities_passed = all(c.passed for c in checks)

    transversal = all(c.transverse is not False for leaf in certificates for c in leaf)
    passed = transversal and inequalities_passed
    payload = _payload('morse-scan', config, leaves=leaves, degenerate_leaf_fraction=report.degenerate_leaf_fraction,
                       warnings=report.warnings, betti=betti, morse_inequalities=inequalities,
                       almost_morse={'fraction': audit.degenerate_leaf_fraction, 'verdict': audit.verdict,
                                     'flagged': [{'v': list(v), 'points': [p.as_dict() for p in pts]}
                                                 for v, pts in audit.flagged]},
                       all_transversal=transversal, passed=passed)
    path = write_json(config.output_dir / 'morse.json', payload)
    return CommandResult(EXIT_PASS if passed else EXIT_CLAIM, [path])


def _adjoint_residual(cx, k, rng, count):
    d = cx.differential(k)
    if d is None:
        return 0.
    delta = d.adjoint()
    a = rng.standard_normal((d.shape[1], count))
    b = rng.standard_normal((d.shape[0], count))
    left = np.sum(d.codomain_mass[:, None] * (d.matrix @ a) * b, axis=0)
    right = np.sum(d.domain_mass[:, None] * a * (delta.matrix @ b), axis=0)
    norm_a = np.sqrt(np.sum(d.domain_mass[:, None] * a * a, axis=0))
    norm_b = np.sqrt(np.sum(d.codomain_mass[:, None] * b * b, axis=0))
    scale = np.linalg.norm(d.symmetrized().toarray(), 2)
    if scale == 0:
        return 0.
    return float(np.max(np.abs(left - right) / (scale * norm_a * norm_b)))


def cmd_hodge_check(config, complex_factory=None):
    """Hodge decomposition, transport identities and block structure on the
    first leaf for every epsilon and degree. Writes ``hodge.json``.

    :param complex_factory: Optional callable receiving the deformed
                            :class:`~foliapyn.hodge.CochainComplex` and
                            returning the complex to check.
    """
    field = _spectral_field(config)
    leaf = field.leaves[0]
    potential = _potential(config, field.dim_p, len(leaf.placement.transverse))
    policy = config.policy
    tol = config.tolerances
    degrees = config.degree_list(field.dim_p)
    rng = np.random.default_rng(config.seed)
    p = field.dim_p

    rows = []
    for epsilon in config.epsilons:
        ctx = DeformationContext(leaf.grid, potential, epsilon, leaf.placement, tol.overflow_budget)
        cx = CochainComplex.of(ctx)
        if complex_factory is not None:
            cx = complex_factory(cx)
        for k in degrees:
            row = {'epsilon': epsilon, 'degree': k, 'failures': []}
            for name, source in (('undeformed', cx.undeformed()), ('deformed', cx)):
                omegas = rng.standard_normal((leaf.grid.cell_count(k), config.hodge_samples))
                residuals, orthogonality = decomposition_errors(source, k, omegas, policy)
                row['{}_residual'.format(name)] = float(residuals.max())
                row['{}_orthogonality'.format(name)] = float(orthogonality.max())
                if residuals.max() > tol.decomposition:
                    row['failures'].append('{} decomposition residual'.format(name))
                if orthogonality.max() > tol.decomposition:
                    row['failures'].append('{} orthogonality'.format(name))

            row['adjoint_residual'] = _adjoint_residual(cx, k, rng, config.hodge_samples)
            if row['adjoint_residual'] > tol.adjoint:
                row['failures'].append('adjointness')
            row['complex_residual'] = complex_residual(cx, k)
            if row['complex_residual'] > tol.complex:
                row['failures'].append('complex property')

            if k < p:
                angles = verify_transport_identities(cx, k, policy)
                row['transport'] = angles._asdict()
                if angles.kernel_angle > tol.angle or angles.image_angle > tol.angle:
                    row['failures'].append('transport identities')
            try:
                block = verify_block_structure(cx, k, policy)
                row['block'] = block._asdict()
                if block.zero_block_norm > tol.block:
                    row['failures'].append('zero block')
                if block.u_min_singular is not None and block.u_min_singular <= 0:
                    row['failures'].append('U not invertible')
                if block.b_min_singular is not None and block.b_min_singular <= 0:
                    row['failures'].append('B not invertible')
                row['u_singular_values'] = transport(cx, k, policy).singular_values
            except DimensionMismatchError as e:
                row['block'] = {'dims': e.dims, 'error': str(e)}
                row['failures'].append('dimension mismatch')
            row['passed'] = not row['failures']
            if row['failures']:
                log.warning('Hodge check epsilon={}, degree {} failed: {}'.format(epsilon, k, row['failures']))
            rows.append(row)

    passed = all(r['passed'] for r in rows)
    path = write_json(config.output_dir / 'hodge.json',
                      _payload('hodge-check', config, degrees=degrees, rows=rows, passed=passed))
    return CommandResult(EXIT_PASS if passed else EXIT_CLAIM, [path])


COMMANDS = {
    'betti': cmd_betti,
    'witten-sweep': cmd_witten_sweep,
    'morse-scan': cmd_morse_scan,
    'hodge-check': cmd_hodge_check,
}


def write_error(output_dir, command, error):
    payload = {
        'command': command,
        'generator': generator_info(),
        'error': type(error).__name__,
        'message': str(error),
    }
    if isinstance(error, OverflowBudgetError):
        payload.update(value=error.value, budget=error.budget)
    if isinstance(error, AmbiguousKernelError):
        payload['reports'] = [r.as_dict() for r in error.reports]
    return write_json(pathlib.Path(output_dir) / 'error.json', payload)


def run_command(command, config, **kwargs):
    """Run a command, turning operational errors into ``error.json`` and
    exit code 1."""
    try:
        return COMMANDS[command](config, **kwargs)
    except (ValueError, EigensolverError) as e:
        log.exception('{} failed: {}'.format(command, e))
        path = write_error(config.output_dir, command, e)
        return CommandResult(EXIT_ERROR, [path])
