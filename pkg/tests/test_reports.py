import json
import pathlib

import numpy as np
import pytest

from foliapyn import cli
from foliapyn.config import load_config, parse_config
from foliapyn.leaf_complex import LinearMap
from foliapyn.reports import EXIT_CLAIM, EXIT_ERROR, EXIT_PASS, run_command, write_json

CONFIGS = pathlib.Path(__file__).parent.parent / 'configs'

TORUS = """
[model]
kind = product
leaf_dim = 2
sizes = [8, 8]
samples = 2

[potential]
random_terms = 2

[run]
epsilons = [0, 1, 2]
hodge_samples = 10
seed = 3
"""

CIRCLE = """
[model]
kind = product
leaf_dim = 1
sizes = [64]
transverse_dim = 0

[potential]
trig = [[1.0, [1], ["cos"]]]

[run]
epsilons = [0, 1, 2, 4, 8]
eigenvalue_count = 4
"""

PRODUCT_MORSE = """
[model]
kind = product
leaf_dim = 1
sizes = [32]
samples = 10

[potential]
trig = [[2.0, [1, 0], ["cos", "cos"]], [1.0, [1, 1], ["cos", "cos"]]]
"""

BIRTH_DEATH = """
[model]
kind = chart
bounds = [[-1, 1]]
samples = [[-0.5], [0], [0.5]]

[potential]
polynomial = [[0.3333333333333333, [3, 0]], [-1, [1, 1]]]
"""

KRONECKER = """
[model]
kind = kronecker
alpha = golden
resolution = [16, 32, 64]
"""


def _config(text, tmp_path, **kwargs):
    return parse_config(text, output_dir=tmp_path, **kwargs)


def _load(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def _tamper_d0(k, d):
    if k != 0:
        return d
    matrix = d.matrix.tolil()
    matrix[0, 0] += 0.5 * abs(d.matrix).max()
    return LinearMap(matrix.tocsr(), d.domain_mass, d.codomain_mass)


def test_betti_torus(tmp_path):
    result = run_command('betti', _config(TORUS, tmp_path))
    assert result.exit_code == EXIT_PASS
    report = _load(tmp_path / 'betti.json')
    assert report['passed'] and report['invariant']
    assert [row['epsilon'] for row in report['rows']] == [0., 1., 2.]
    for row in report['rows']:
        assert row['lambda_dimensions'] == pytest.approx([1., 2., 1.])
        assert row['leaf_kernel_dims'] == [[1, 1], [2, 2], [1, 1]]
        assert row['lambda_euler_characteristic'] == pytest.approx(0.)
    assert report['tolerances']['kernel_floor'] == 1e-10
    assert report['generator']['name'] == 'foliapyn'


def test_betti_without_potential(tmp_path):
    text = TORUS.replace('[potential]\nrandom_terms = 2\n', '')
    assert run_command('betti', _config(text, tmp_path)).exit_code == EXIT_PASS
    assert _load(tmp_path / 'betti.json')['config']['potential'] is None


def test_betti_kronecker(tmp_path):
    result = run_command('betti', _config(KRONECKER, tmp_path))
    assert result.exit_code == EXIT_PASS
    rows = _load(tmp_path / 'betti.json')['kronecker']
    assert [row['resolution'] for row in rows] == [16, 32, 64]
    assert all(row['kernel_dim'] == row['cokernel_dim'] == 1 for row in rows)


def test_betti_overflow_budget(tmp_path):
    text = TORUS.replace('epsilons = [0, 1, 2]', 'epsilons = [0, 100]')
    result = run_command('betti', _config(text, tmp_path))
    assert result.exit_code == EXIT_ERROR
    error = _load(tmp_path / 'error.json')
    assert error['error'] == 'OverflowBudgetError'
    assert error['budget'] == 30.
    assert 'overflow budget' in error['message']


def test_betti_invariance_failure(tmp_path):
    # a kernel cut far above roundoff counts low lying eigenvalues that move with epsilon
    text = CIRCLE.replace('epsilons = [0, 1, 2, 4, 8]', 'epsilons = [0, 8]')
    text += '\n[tolerances]\nfactored_floor = 0.01\nmin_gap_ratio = 1\n'
    result = run_command('betti', _config(text, tmp_path))
    assert result.exit_code == EXIT_CLAIM
    assert not _load(tmp_path / 'betti.json')['invariant']


def test_witten_sweep(tmp_path):
    result = run_command('witten-sweep', _config(CIRCLE, tmp_path))
    assert result.exit_code == EXIT_PASS
    raw = (tmp_path / 'sweep.csv').read_bytes()
    assert raw.startswith(b'epsilon,degree,eigenvalue_index,eigenvalue\r\n')
    assert raw.count(b'\r\n') == 1 + 5 * 2 * 4
    summary = _load(tmp_path / 'sweep_summary.json')
    assert [row['kernel_dim'] for row in summary['rows']] == [1] * 10
    assert summary['kernel_invariant'] == {'0': True, '1': True}
    assert summary['morse_counts'] == [1, 1]
    assert all(row['error'] is None for row in summary['rows'])


def test_witten_sweep_semiclassical_cluster(tmp_path):
    text = CIRCLE.replace('sizes = [64]', 'sizes = [128]').replace('epsilons = [0, 1, 2, 4, 8]', 'epsilons = [8]')
    assert run_command('witten-sweep', _config(text, tmp_path)).exit_code == EXIT_PASS
    for row in _load(tmp_path / 'sweep_summary.json')['rows']:
        assert row['cluster_count'] == 1
        assert row['cluster_gap_ratio'] == 'inf' or row['cluster_gap_ratio'] >= 100


def test_witten_sweep_records_failing_epsilon(tmp_path):
    text = CIRCLE.replace('epsilons = [0, 1, 2, 4, 8]', 'epsilons = [0, 20]')
    result = run_command('witten-sweep', _config(text, tmp_path))
    assert result.exit_code == EXIT_ERROR
    rows = _load(tmp_path / 'sweep_summary.json')['rows']
    assert rows[0]['error'] is None
    assert 'overflow budget' in rows[1]['error']


def test_morse_scan_product(tmp_path):
    result = run_command('morse-scan', _config(PRODUCT_MORSE, tmp_path))
    assert result.exit_code == EXIT_PASS
    report = _load(tmp_path / 'morse.json')
    assert len(report['leaves']) == 10
    assert all(leaf['counts'] == [1, 1] for leaf in report['leaves'])
    assert all(pt['transverse'] and pt['sigma_min'] > 0 for leaf in report['leaves'] for pt in leaf['points'])
    assert report['betti'] == [1, 1]
    assert all(check['passed'] for check in report['morse_inequalities'])
    assert report['almost_morse']['verdict'] == 'good'


def test_morse_scan_birth_death(tmp_path):
    result = run_command('morse-scan', _config(BIRTH_DEATH, tmp_path))
    assert result.exit_code == EXIT_PASS
    report = _load(tmp_path / 'morse.json')
    assert [len(leaf['points']) for leaf in report['leaves']] == [0, 1, 2]
    assert report['leaves'][1]['points'][0]['classification'] == 'BirthDeath'
    assert report['almost_morse']['verdict'] == 'good almost Morse'
    assert report['morse_inequalities'] is None


def test_morse_scan_needs_potential(tmp_path):
    text = PRODUCT_MORSE.split('[potential]')[0]
    assert run_command('morse-scan', _config(text, tmp_path)).exit_code == EXIT_ERROR
    assert _load(tmp_path / 'error.json')['error'] == 'ConfigError'


def test_morse_scan_identically_critical(tmp_path):
    text = PRODUCT_MORSE.split('[potential]')[0] + '[potential]\ntrig = [[0.0, [1, 0], ["cos", "cos"]]]\n'
    assert run_command('morse-scan', _config(text, tmp_path)).exit_code == EXIT_ERROR
    assert 'identically-critical' in _load(tmp_path / 'error.json')['message']


def test_hodge_check(tmp_path):
    result = run_command('hodge-check', _config(TORUS, tmp_path))
    assert result.exit_code == EXIT_PASS
    report = _load(tmp_path / 'hodge.json')
    assert len(report['rows']) == 3 * 3
    for row in report['rows']:
        assert row['passed'] and not row['failures']
        assert row['deformed_residual'] <= 1e-10
        assert row['block']['u_min_singular'] > 0
        if row['epsilon'] == 0.:
            assert row['block']['zero_block_norm'] <= 1e-12


def test_hodge_check_semiclassical_circle(tmp_path):
    config = load_config(CONFIGS / 'semiclassical_circle.ini', output_dir=tmp_path)
    assert run_command('hodge-check', config).exit_code == EXIT_PASS
    rows = [row for row in _load(tmp_path / 'hodge.json')['rows'] if row['epsilon'] >= 8.]
    assert [row['epsilon'] for row in rows if row['degree'] == 0] == [8., 10., 12.]
    for row in rows:
        assert row['passed']
        if row['degree'] == 0:
            assert row['transport']['image_angle'] <= 1e-8


def test_hodge_check_detects_corrupted_differential(tmp_path):
    text = TORUS.replace('epsilons = [0, 1, 2]', 'epsilons = [0]')
    result = run_command('hodge-check', _config(text, tmp_path),
                         complex_factory=lambda cx: cx.tampered(_tamper_d0))
    assert result.exit_code == EXIT_CLAIM
    report = _load(tmp_path / 'hodge.json')
    assert not report['passed']
    row = next(r for r in report['rows'] if r['degree'] == 1)
    assert 'deformed orthogonality' in row['failures']


def test_spectral_commands_reject_chart_models(tmp_path):
    assert run_command('betti', _config(BIRTH_DEATH, tmp_path)).exit_code == EXIT_ERROR


def test_write_json_non_finite_numbers(tmp_path):
    path = write_json(tmp_path / 'x.json', {'b': np.inf, 'a': (np.float64(1.5), np.int64(2)), 'c': np.nan})
    assert path.read_text(encoding='utf-8') == '{\n  "a": [\n    1.5,\n    2\n  ],\n  "b": "inf",\n  "c": "nan"\n}\n'


@pytest.mark.parametrize('command, text, files', [
    ('betti', TORUS, ['betti.json']),
    ('witten-sweep', CIRCLE, ['sweep.csv', 'sweep_summary.json']),
    ('morse-scan', BIRTH_DEATH, ['morse.json']),
    ('hodge-check', TORUS, ['hodge.json']),
])
def test_cli_is_deterministic(tmp_path, command, text, files):
    config = tmp_path / 'run.ini'
    config.write_text(text, encoding='utf-8')
    for name in ('first', 'second'):
        code = cli.main([command, '--config', str(config), '--out', str(tmp_path / name), '--seed', '5',
                         '--quiet'])
        assert code == EXIT_PASS
    for f in files:
        assert (tmp_path / 'first' / f).read_bytes() == (tmp_path / 'second' / f).read_bytes()


def test_cli_config_error(tmp_path):
    config = tmp_path / 'run.ini'
    config.write_text(TORUS.replace('epsilons = [0, 1, 2]', 'epsilons = []'), encoding='utf-8')
    code = cli.main(['betti', '--config', str(config), '--out', str(tmp_path / 'out'), '--quiet'])
    assert code == EXIT_ERROR
    error = _load(tmp_path / 'out' / 'error.json')
    assert error['error'] == 'ConfigError'
    assert error['command'] == 'betti'


def test_cli_seed_changes_the_potential(tmp_path):
    config = tmp_path / 'run.ini'
    config.write_text(TORUS, encoding='utf-8')
    for seed in ('1', '2'):
        assert cli.main(['betti', '--config', str(config), '--out', str(tmp_path / seed), '--seed', seed,
                         '--quiet']) == EXIT_PASS
    first = _load(tmp_path / '1' / 'betti.json')
    second = _load(tmp_path / '2' / 'betti.json')
    assert first['config']['seed'] == 1
    assert first['config']['potential'] != second['config']['potential']


def test_cli_usage():
    with pytest.raises(SystemExit):
        cli.main(['betti'])
    with pytest.raises(SystemExit):
        cli.main(['plot', '--config', 'x.ini'])
