import pytest

from srv_sim.commands import COMMANDS, RunConfig, cmd_list_scenarios, \
    cmd_matrix, cmd_run, cmd_sweep, read_csv
from srv_sim.errors import ConfigError
from srv_sim.parse_args import parse_args
from srv_sim.pipeline.trace import TRACE_VERSION, read_records
from srv_sim.utils import load_yaml, save_yaml
from test.setup_and_params import SCENARIO_DIR, SMALL_CACHE, setup, shipped

dump_path = setup()


def run_cli(argv):
    args = parse_args(argv)
    return COMMANDS[args.command](RunConfig.from_args(args))


def scenario_file(name):
    return str(SCENARIO_DIR / '{}.yaml'.format(name))


def test_parse_args_run():
    args = parse_args(['run', scenario_file('srv_leak'), '-m', 'vfence',
                       '--emit', 'report', 'csv', '--trials', '3'])
    assert args.command == 'run'
    assert args.mitigation == 'vfence'
    assert args.emit == ['report', 'csv']
    assert args.trials == 3
    assert args.width is None
    config = RunConfig.from_args(args)
    assert config.overrides == {'mitigation': 'vfence', 'trials': 3}


def test_parse_args_wandb_save_path():
    args = parse_args(['sweep', '-o', str(dump_path), '--wandb_project', 'p',
                       '--wandb_run', 'r'])
    config = RunConfig.from_args(args)
    assert config.save_path == dump_path / 'p' / 'r'


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig('run', dump_path, emit=('report', 'pdf'))
    with pytest.raises(ConfigError):
        RunConfig('run', dump_path, overrides={'mitigation': 'retpoline'})
    with pytest.raises(ConfigError):
        RunConfig('matrix', dump_path, mitigations=('none', 'lfence'))
    config = RunConfig('run', dump_path, emit=('report,csv', 'trace'))
    assert config.emit == ('report', 'csv', 'trace')


def test_run_config_applies_overrides():
    config = RunConfig('run', dump_path, overrides={
        'mitigation': 'vfence', 'trials': 5, 'seed': 9, 'jitter': 2,
        'granularity': 4, 'width': 8})
    scenario = config.apply(shipped('srv_leak'))
    assert scenario.core.mitigation == 'vfence'
    assert scenario.core.width == 8
    assert scenario.core.seed == 9
    assert scenario.seed == 9
    assert scenario.n_trials == 5
    assert scenario.timer.jitter_stddev == 2.0
    assert scenario.timer.granularity == 4


def test_cmd_run_writes_artifacts():
    save_path = dump_path / 'cli_run'
    status = run_cli(['run', scenario_file('srv_leak'), '--trials', '2',
                      '--emit', 'report', 'csv', 'trace', 'mld',
                      '-o', str(save_path)])
    assert status == 0
    report = (save_path / 'report.txt').read_text()
    assert report.startswith('# report_v1')
    assert 'accuracy: 1.0000' in report
    results = read_csv(save_path / 'results.csv')
    assert list(results.correct) == [True, True]
    version, records = read_records(save_path / 'trace.jsonl')
    assert version == TRACE_VERSION
    assert {r['trial'] for r in records} == {0, 1}
    version, records = read_records(save_path / 'mld.jsonl')
    assert version == 'mld_v1'
    assert any(r['name'] == 'srv' for r in records)
    run_config = load_yaml(save_path / 'run_config.yaml')
    assert run_config['run']['overrides'] == {'trials': 2}
    assert run_config['scenario']['core']['mitigation'] == 'none'


def test_cmd_run_evict_time_and_amplification():
    save_path = dump_path / 'cli_evict'
    assert run_cli(['run', scenario_file('evict_time'), '--trials', '2',
                    '--emit', 'csv', '-o', str(save_path)]) == 0
    assert list(read_csv(save_path / 'results.csv').columns) == \
        ['seed', 'dependent_ticks']
    save_path = dump_path / 'cli_amplification'
    assert run_cli(['run', scenario_file('replay_amplification'),
                    '--emit', 'report', 'csv', '-o', str(save_path)]) == 0
    assert 'transmissions: 16' in (save_path / 'report.txt').read_text()
    assert len(read_csv(save_path / 'results.csv')) == 16


def test_cmd_run_missing_scenario():
    config = RunConfig('run', dump_path / 'cli_missing',
                       scenario=str(SCENARIO_DIR / 'missing.yaml'))
    assert cmd_run(config) == 2
    assert cmd_run(RunConfig('run', dump_path / 'cli_missing')) == 2


def test_cmd_matrix():
    save_path = dump_path / 'cli_matrix'
    config = RunConfig('matrix', save_path, scenarios=('srv_leak',),
                       mitigations=('none',), overrides={'trials': 2},
                       min_trials=1)
    assert cmd_matrix(config) == 0
    df = read_csv(save_path / 'matrix.csv')
    assert len(df) == 1
    assert df.verdict.iloc[0] == 'leak'
    assert 'srv_leak' in (save_path / 'matrix.txt').read_text()


def test_cmd_matrix_rejects_non_leak_scenarios():
    config = RunConfig('matrix', dump_path / 'cli_matrix_bad',
                       scenarios=('evict_time',), mitigations=('none',))
    assert cmd_matrix(config) == 2


def test_cmd_sweep():
    save_path = dump_path / 'cli_sweep'
    cache_file = dump_path / 'small_cache.yaml'
    save_yaml({'cache': SMALL_CACHE.to_dict()}, cache_file)
    sizes = ['{}KB'.format(1 << i) for i in range(10)]
    config = RunConfig('sweep', save_path, cache_config=str(cache_file),
                       sizes=tuple(sizes))
    assert cmd_sweep(config) == 0
    assert len(read_csv(save_path / 'sweep.csv')) == 10
    assert 'estimated LLC size: 64KB' in \
        (save_path / 'sweep.txt').read_text()


def test_cmd_sweep_bad_sizes():
    save_path = dump_path / 'cli_sweep_bad'
    assert cmd_sweep(RunConfig('sweep', save_path, sizes=())) == 2
    assert cmd_sweep(RunConfig('sweep', save_path,
                               sizes=('1MB', '4KB'))) == 2


def test_cmd_list_scenarios(capsys):
    assert run_cli(['list-scenarios']) == 0
    out = capsys.readouterr().out
    for name in ('srv_leak', 'kumar_fallback', 'spectre_stl', 'evict_time'):
        assert name in out
    assert cmd_list_scenarios(RunConfig('list-scenarios', dump_path)) == 0
