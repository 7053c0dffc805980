import numpy as np
import pytest

from srv_sim.errors import ConfigError, OutOfBounds, ReplayBudgetExceeded, \
    UnsupportedPattern
from srv_sim.isa.gadget_parser import parse_gadget
from srv_sim.isa.interpreter import run_reference
from srv_sim.isa.memory import MemoryImage
from srv_sim.pipeline.config import CoreConfig
from srv_sim.pipeline.predictors import BranchPredictor, MemDepPredictor
from srv_sim.pipeline.runners import build_core, run_ooo_stl, run_scalar, \
    run_srv
from srv_sim.pipeline.trace import TRACE_VERSION, read_records, write_trace
from test.setup_and_params import IDENTITY_TEXT, SCATTER_UPDATE_GROUPS, \
    SCATTER_UPDATE_INDICES, SCATTER_UPDATE_TAINT, TWO_STATEMENT_TEXT, \
    SEED, brute_force_scatter_update, random_gadget, random_index_vectors, \
    scatter_update_memory, scatter_update_program, setup

dump_path = setup()

STALE_READ_TEXT = """
array i 4 8
array p 4 2
array q 4 8
loop 8:
  p[i[z]] = 7
  q[z] = p[0]
"""


def kinds(result):
    return [event.kind for event in result.trace]


def stale_read_memory(program):
    memory = MemoryImage.for_program(program)
    for z in range(7):
        memory.write_element('i', z, 1)
    return memory


def test_scalar_matches_oracle():
    program = scatter_update_program()
    memory = scatter_update_memory()
    result = run_scalar(program, memory)
    assert result.final_memory.array_values('a') == brute_force_scatter_update(
        SCATTER_UPDATE_INDICES, range(16))
    assert result.replay_counts == []
    assert not any(event.transient for event in result.trace)
    assert result.cycles > 0
    # The input image is left untouched
    assert memory.array_values('a') == list(range(16))


def test_srv_scatter_update_replays_once():
    program = scatter_update_program()
    memory = scatter_update_memory()
    result = run_srv(program, memory)
    assert result.replay_counts == [1]
    assert result.replayed_predicates == [[SCATTER_UPDATE_TAINT]]
    assert result.final_memory == run_reference(program, memory)
    assert kinds(result).count('commit') == 1


def test_srv_squashed_lanes_are_transient():
    result = run_srv(scatter_update_program(), scatter_update_memory())
    transient_lanes = {e.lane for e in result.trace
                       if e.kind == 'load' and e.transient}
    assert transient_lanes == set(SCATTER_UPDATE_TAINT)


def test_srv_random_vectors_match_oracle():
    program = scatter_update_program()
    values = [1000 * i for i in range(16)]
    for indices in random_index_vectors(25):
        memory = scatter_update_memory(indices, values)
        result = run_srv(program, memory)
        assert result.final_memory.array_values('a') == \
            brute_force_scatter_update(indices, values)
        assert len(result.replay_counts) == 1
        assert result.replay_counts[0] <= 15
        if not any(i < j for i, j in enumerate(indices)):
            assert result.replay_counts == [0]


def test_srv_swapped_pairs_at_width_four():
    # Lanes 1 and 3 of the first chunk load what lanes 0 and 2 store
    program = scatter_update_program()
    memory = scatter_update_memory([1, 0, 3, 2] * 4)
    expected = run_reference(program, memory)
    replayed = {'erroneous_only': [[1, 3]],
                'erroneous_and_later': [[1, 2, 3], [3]]}
    for policy, predicates in replayed.items():
        result = run_srv(program, memory,
                         CoreConfig(width=4, replay_policy=policy))
        assert result.final_memory == expected
        assert result.replayed_predicates == [predicates, [], [], []]
        assert result.replay_counts == [len(predicates), 0, 0, 0]
        replay_events = [e for e in result.trace if e.kind == 'replay']
        assert len(replay_events) == 4 + len(predicates)
        assert not any(e.transient for e in replay_events)
        squashed = {e.lane for e in result.trace
                    if e.kind == 'load' and e.transient}
        assert squashed == set(predicates[0])


def test_vector_strategies_match_oracle_on_random_gadgets():
    rng = np.random.default_rng(SEED)
    for _ in range(125):
        program, memory = random_gadget(rng)
        expected = run_reference(program, memory)
        for width in (4, 8, 16):
            for strategy in ('srv', 'flexvec', 'scalar_fallback',
                             'vfenced_srv'):
                for policy in ('erroneous_only', 'erroneous_and_later'):
                    config = CoreConfig(width=width, strategy=strategy,
                                        replay_policy=policy)
                    result = run_srv(program, memory, config)
                    assert result.final_memory == expected, \
                        (program.trip_count, width, strategy, policy)
                    assert all(r <= width - 1 for r in result.replay_counts)
                    assert len(result.replay_counts) == \
                        -(-program.trip_count // width)


def test_srv_widths_agree():
    program = scatter_update_program()
    memory = scatter_update_memory()
    expected = run_reference(program, memory)
    for width in (1, 2, 4, 8, 16):
        result = run_srv(program, memory, CoreConfig(width=width))
        assert result.final_memory == expected
        assert len(result.replay_counts) == 16 // width


def test_srv_identity_loop_never_replays():
    program = parse_gadget(IDENTITY_TEXT)
    memory = MemoryImage.for_program(program)
    result = run_srv(program, memory)
    assert result.replay_counts == [0]
    assert result.final_memory == memory


def test_srv_two_statements():
    program = parse_gadget(TWO_STATEMENT_TEXT)
    memory = MemoryImage.for_program(program)
    for z in range(16):
        memory.write_element('b', z, z + 5)
    result = run_srv(program, memory)
    assert result.final_memory == run_reference(program, memory)
    assert result.replay_counts == [0]


def test_srv_erroneous_and_later_policy():
    program = scatter_update_program()
    memory = scatter_update_memory()
    config = CoreConfig(replay_policy='erroneous_and_later')
    result = run_srv(program, memory, config)
    assert result.replayed_predicates[0][0] == list(range(3, 16))
    assert result.final_memory == run_reference(program, memory)


def test_srv_replay_budget():
    with pytest.raises(ReplayBudgetExceeded):
        run_srv(scatter_update_program(), scatter_update_memory(),
                CoreConfig(replay_limit=0))


def test_srv_out_of_bounds_lane_raises_at_commit():
    memory = scatter_update_memory()
    memory.write_element('x', 5, 40)
    with pytest.raises(OutOfBounds):
        run_srv(scatter_update_program(), memory)


def test_run_srv_rejects_scalar_strategy():
    with pytest.raises(UnsupportedPattern):
        run_srv(scatter_update_program(), scatter_update_memory(),
                CoreConfig(strategy='scalar_ooo'))


def test_flexvec_groups():
    program = scatter_update_program()
    memory = scatter_update_memory()
    result = run_srv(program, memory, CoreConfig(strategy='flexvec'))
    groups = [e.detail['lanes'] for e in result.trace
              if e.kind == 'flexvec_group']
    assert groups == SCATTER_UPDATE_GROUPS
    assert result.replay_counts == [0]
    assert result.final_memory == run_reference(program, memory)


def test_scalar_fallback_is_sticky():
    program = scatter_update_program()
    memory = scatter_update_memory()
    core = build_core(CoreConfig(strategy='scalar_fallback'))
    first = core.run(program, memory)
    assert first.fallback
    assert 'fallback' in kinds(first)
    assert first.final_memory == run_reference(program, memory)
    second = core.run(program, memory)
    assert second.fallback
    assert 'srv_start' not in kinds(second)
    assert second.final_memory == first.final_memory


def test_mem_fence_mitigation():
    program = scatter_update_program()
    memory = scatter_update_memory()
    result = run_srv(program, memory, CoreConfig(mitigation='mem_fence'))
    assert kinds(result)[0] == 'fence'
    assert kinds(result).count('fence') >= 2
    assert result.final_memory == run_reference(program, memory)


def test_vfence_mitigation():
    program = scatter_update_program()
    memory = scatter_update_memory()
    result = run_srv(program, memory, CoreConfig(mitigation='vfence'))
    assert 'vfence' in kinds(result)
    assert result.replay_counts == [0]
    assert result.final_memory == run_reference(program, memory)


def test_fence_recompiled_scalar_leaves_vector_code():
    program = scatter_update_program()
    memory = scatter_update_memory()
    result = run_srv(program, memory,
                     CoreConfig(mitigation='fence_recompiled_scalar'))
    assert 'srv_start' not in kinds(result)
    assert kinds(result).count('fence') == 16
    assert result.final_memory == run_reference(program, memory)


def test_visibility_delay_matches_oracle():
    program = scatter_update_program()
    memory = scatter_update_memory()
    result = run_srv(program, memory,
                     CoreConfig(mitigation='visibility_delay'))
    assert result.final_memory == run_reference(program, memory)


def test_ooo_matches_oracle():
    program = scatter_update_program()
    memory = scatter_update_memory()
    result = run_ooo_stl(program, memory)
    assert result.final_memory == run_reference(program, memory)


def test_ooo_final_memory_independent_of_noise():
    program = parse_gadget(TWO_STATEMENT_TEXT)
    memory = MemoryImage.for_program(program)
    for z in range(16):
        memory.write_element('b', z, 3 * z)
    expected = run_reference(program, memory)
    for seed in range(4):
        config = CoreConfig(strategy='scalar_ooo', seed=seed)
        assert run_ooo_stl(program, memory, config).final_memory == expected


def test_ooo_stale_read_is_squashed():
    program = parse_gadget(STALE_READ_TEXT)
    memory = stale_read_memory(program)
    result = run_ooo_stl(program, memory)
    assert result.squash_count == 1
    assert result.final_memory == run_reference(program, memory)
    assert result.final_memory.read_element('q', 7) == 7
    stale = [e for e in result.trace if e.kind == 'load' and e.transient
             and e.lane == 7 and e.instr_seq == 1]
    assert [e.value for e in stale] == [0]
    squash = [e for e in result.trace if e.kind == 'squash']
    assert squash[0].detail['cause'] == 'memory_order'


def test_ooo_in_order_never_bypasses():
    program = parse_gadget(STALE_READ_TEXT)
    memory = stale_read_memory(program)
    config = CoreConfig(strategy='scalar_ooo', mitigation='in_order')
    result = run_ooo_stl(program, memory, config)
    assert result.squash_count == 0
    assert not any(e.transient for e in result.trace)


def test_ooo_untrained_predictor_waits():
    program = parse_gadget(STALE_READ_TEXT)
    memory = stale_read_memory(program)
    config = CoreConfig(strategy='scalar_ooo', mdp_threshold=10)
    result = run_ooo_stl(program, memory, config)
    assert result.squash_count == 0


def test_memdep_predictor():
    predictor = MemDepPredictor(threshold=3)
    pair = (0, 1)
    for _ in range(2):
        predictor.train(pair, aliased=False)
    assert not predictor.predicts_no_alias(pair)
    predictor.train(pair, aliased=False)
    assert predictor.predicts_no_alias(pair)
    predictor.train(pair, aliased=True)
    assert predictor.confidence(pair) == 0


def test_branch_predictor():
    predictor = BranchPredictor(bits=2, init=1)
    assert not predictor.predict(0)
    predictor.update(0, True)
    assert predictor.predict(0)
    for _ in range(5):
        predictor.update(0, True)
    assert predictor.counter(0) == 3
    for _ in range(5):
        predictor.update(0, False)
    assert predictor.counter(0) == 0
    assert predictor.counter(1) == 1


def test_core_config_validation():
    with pytest.raises(ConfigError):
        CoreConfig(width=3)
    with pytest.raises(ConfigError):
        CoreConfig(mitigation='retpoline')
    with pytest.raises(ConfigError):
        CoreConfig(replay_limit=16)
    with pytest.raises(ConfigError):
        CoreConfig.from_dict({'replay_limit': 'two'})
    with pytest.raises(ConfigError):
        CoreConfig.from_dict({'lanes': 16})
    config = CoreConfig.from_dict({'width': 8, 'replay_limit': 2})
    assert config.effective_replay_limit == 2
    assert CoreConfig(width=8).effective_replay_limit == 7


def test_trace_round_trip():
    result = run_srv(scatter_update_program(), scatter_update_memory())
    path = dump_path / 'pipeline_trace.jsonl'
    write_trace(path, result.trace, n_levels=2, extra={'trial': 0})
    version, records = read_records(path)
    assert version == TRACE_VERSION
    assert len(records) == len(result.trace)
    assert all(record['trial'] == 0 for record in records)
    loads = [r for r in records if r['kind'] == 'load']
    assert all(r['level_hit'] in ('L1', 'L2', 'MEM') for r in loads)
    assert any(r.get('transient') for r in loads)
