import numpy as np
import pytest

from srv_sim.isa.gadget_parser import parse_gadget
from srv_sim.isa.memory import MemoryImage
from srv_sim.mld.descriptors import BRANCH, DCACHE, SRV, MldPredicate, \
    builtin_predicates, dcache_predicate
from srv_sim.mld.engine import MLD_VERSION, evaluate_mld_hooks, run_with_mlds
from srv_sim.pipeline.config import CoreConfig
from srv_sim.pipeline.core import MicroarchState
from srv_sim.pipeline.runners import build_core
from srv_sim.pipeline.trace import Event, read_records
from test.setup_and_params import SCATTER_UPDATE_TAINT, SEED, random_gadget, \
    scatter_update_memory, scatter_update_program, setup

dump_path = setup()

GUARDED_TEXT = """
array c 4 4
array t 4 4
loop 4:
  t[z] = 1 when c[z] < 1
"""


def test_srv_descriptor_fires_on_tainted_lanes():
    _, report = run_with_mlds(scatter_update_program(),
                              scatter_update_memory(), CoreConfig(), [SRV])
    assert len(report) == len(SCATTER_UPDATE_TAINT)
    assert report.lanes('srv') == SCATTER_UPDATE_TAINT
    assert all(f.detail['kind'] == 'lsq' for f in report)
    assert all(f.detail['hob'] != '0x' + '0' * 16 for f in report)


def test_srv_descriptor_silent_without_conflicts():
    memory = scatter_update_memory(indices=list(range(16)))
    _, report = run_with_mlds(scatter_update_program(), memory,
                              CoreConfig(), [SRV])
    assert len(report) == 0


def test_srv_descriptor_fires_iff_chunk_replays():
    rng = np.random.default_rng(SEED)
    replaying = 0
    for _ in range(2000):
        program, memory = random_gadget(
            rng, trip_count=int(rng.integers(1, 17)))
        result, report = run_with_mlds(program, memory, CoreConfig(), [SRV])
        assert len(result.replay_counts) == 1
        assert (len(report) > 0) == (result.replay_counts[0] >= 1)
        replaying += result.replay_counts[0] >= 1
    # Both sides of the equivalence are exercised
    assert 0 < replaying < 2000


def test_dcache_descriptor_matches_line_history():
    result, report = run_with_mlds(scatter_update_program(),
                                   scatter_update_memory(), CoreConfig(),
                                   [DCACHE])
    seen, expected = set(), 0
    for event in result.trace:
        if event.kind not in ('load', 'store', 'probe'):
            continue
        line = event.address // 64
        expected += line in seen
        seen.add(line)
    assert len(report) == expected
    assert report.counts()['dcache'] == expected


def test_branch_descriptor_fires_on_mispredictions():
    program = parse_gadget(GUARDED_TEXT)
    memory = MemoryImage.for_program(program)
    # Cold counters predict not-taken; the first guard holds
    _, report = run_with_mlds(program, memory, CoreConfig(strategy='scalar'),
                              [BRANCH])
    assert report.lanes('branch') == [0]
    memory.write_element('c', 3, 5)
    _, report = run_with_mlds(program, memory, CoreConfig(strategy='scalar'),
                              [BRANCH])
    assert report.lanes('branch') == [0, 3]


def test_descriptors_do_not_change_the_run():
    program = scatter_update_program()
    memory = scatter_update_memory()
    plain = build_core(CoreConfig()).run(program, memory)
    watched, _ = run_with_mlds(program, memory, CoreConfig(),
                               builtin_predicates(['dcache', 'branch', 'srv']))
    assert watched.final_memory == plain.final_memory
    assert watched.cycles == plain.cycles
    assert [e.kind for e in watched.trace] == [e.kind for e in plain.trace]


def test_custom_predicate():
    program = scatter_update_program()
    memory = scatter_update_memory(values=[10 * i for i in range(16)])
    big_store = MldPredicate('big_store', ('store',),
                             lambda event, state: event.value > 100)
    result, report = run_with_mlds(program, memory, CoreConfig(), [big_store])
    stores = [e for e in result.trace if e.kind == 'store' and e.value > 100]
    assert len(report) == len(stores)
    assert len(report) > 0


def test_run_with_mlds_reuses_core():
    program = scatter_update_program()
    memory = scatter_update_memory()
    core = build_core(CoreConfig())
    _, first = run_with_mlds(program, memory, predicates=[DCACHE], core=core)
    assert core.mld_engine is None
    _, second = run_with_mlds(program, memory, predicates=[DCACHE], core=core)
    # The warm cache turns the first-touch misses into hits
    assert len(second) > len(first)


def test_evaluate_mld_hooks():
    event = Event(5, 'branch', instr_seq=0, lane=2,
                  detail={'predicted': True, 'taken': False})
    state = MicroarchState(None, None, None)
    firings = evaluate_mld_hooks(event, state, [BRANCH, SRV])
    assert len(firings) == 1
    assert firings[0].name == 'branch'
    assert firings[0].tick == 5 and firings[0].lane == 2
    event.detail['taken'] = True
    assert evaluate_mld_hooks(event, state, [BRANCH]) == []


def test_builtin_predicates():
    assert builtin_predicates(['srv', 'dcache']) == [SRV, DCACHE]
    with pytest.raises(KeyError, match='valid names'):
        builtin_predicates(['spectre'])
    assert dcache_predicate(2).name == 'dcache_l2'
    assert dcache_predicate(None).name == 'dcache_any'


def test_report_write():
    _, report = run_with_mlds(scatter_update_program(),
                              scatter_update_memory(), CoreConfig(), [SRV])
    path = dump_path / 'mld.jsonl'
    report.write(path)
    version, records = read_records(path)
    assert version == MLD_VERSION
    assert [r['lane'] for r in records] == [f.lane for f in report]
    assert all(r['name'] == 'srv' for r in records)
