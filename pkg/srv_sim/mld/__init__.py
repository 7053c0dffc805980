from srv_sim.mld.descriptors import BRANCH, BUILTIN_MLDS, DCACHE, SRV, \
    MldPredicate, builtin_predicates, dcache_predicate, mld_branch, \
    mld_dcache, mld_srv
from srv_sim.mld.engine import MldEngine, MldFiring, MldReport, \
    evaluate_mld_hooks, run_with_mlds
