from srv_sim.isa.gadget_parser import load_gadget, parse_gadget, pretty_print
from srv_sim.isa.interpreter import eval_scalar_iter, run_reference
from srv_sim.isa.layout import AddressMap, layout_memory
from srv_sim.isa.memory import MemoryImage
from srv_sim.isa.program import ArrayDecl, ArrayRead, BinOp, ElementInit, \
    GadgetProgram, Induction, Literal, Param, Probe, Select, Statement, \
    validate_program
