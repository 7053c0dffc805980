from srv_sim.attacks.amplification import detection_curve, \
    scenario_replay_amplification
from srv_sim.attacks.channel import POC_SECRET, CovertChannel, DecodeResult, \
    reload_decode
from srv_sim.attacks.leaks import LeakResult, run_leak, scenario_spectre_stl, \
    scenario_spectre_v1, scenario_srv_leak
from srv_sim.attacks.matrix import DEFAULT_MATRIX_SCENARIOS, matrix_table, \
    run_matrix
from srv_sim.attacks.scenario import Scenario, load_scenario, \
    shipped_scenarios
from srv_sim.attacks.timing import TimingReport, scenario_evict_time
