from srv_sim.pipeline.config import CoreConfig, Mitigation, MITIGATIONS, \
    STRATEGIES
from srv_sim.pipeline.core import Core, ExecResult, ScalarCore
from srv_sim.pipeline.ooo_stl import OooStlCore
from srv_sim.pipeline.predictors import BranchPredictor, MemDepPredictor
from srv_sim.pipeline.runners import build_core, run_ooo_stl, run_scalar, \
    run_srv
from srv_sim.pipeline.srv import SrvCore
from srv_sim.pipeline.trace import Event, read_records, write_trace
