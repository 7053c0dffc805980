"""
Loop IR for gadget programs.

A GadgetProgram is a single counted loop over named, byte-addressed arrays.
Expressions are immutable trees; every array reference names a declared
array, indices are element indices (not byte offsets).
"""

from collections import namedtuple
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

from srv_sim.errors import ValidationError

ELEM_SIZES = (1, 4, 8)
MAX_INDEX_DEPTH = 2
INDUCTION_VAR = 'z'

# Lower binds looser, as in C.
BINARY_OPS = {
    '||': 1,
    '&&': 2,
    '^': 3,
    '==': 4,
    '!=': 4,
    '<': 5,
    '<<': 6,
    '>>': 6,
    '+': 7,
    '-': 7,
    '*': 8,
}
SELECT_PRECEDENCE = 0


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    elem_size: int
    length: int
    linked: Optional[str] = None
    link_offset: int = 0
    readonly: bool = False

    @property
    def footprint(self):
        return self.elem_size * self.length


@dataclass(frozen=True)
class Literal:
    value: int


@dataclass(frozen=True)
class Induction:
    pass


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class ArrayRead:
    array: str
    index: 'Expr'


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: 'Expr'
    rhs: 'Expr'


@dataclass(frozen=True)
class Select:
    cond: 'Expr'
    if_true: 'Expr'
    if_false: 'Expr'


Expr = Union[Literal, Induction, Param, ArrayRead, BinOp, Select]
LEAVES = (Literal, Induction, Param)


@dataclass(frozen=True)
class Statement:
    dst_array: str
    dst_index: Expr
    rhs: Expr
    guard: Optional[Expr] = None


@dataclass(frozen=True)
class ElementInit:
    """Prologue assignment of value to elements [start, stop) of array."""
    array: str
    start: int
    stop: int
    value: int


@dataclass(frozen=True)
class Probe:
    array: str
    index: int


@dataclass(frozen=True)
class GadgetProgram:
    arrays: Tuple[ArrayDecl, ...]
    trip_count: int
    statements: Tuple[Statement, ...]
    params: Tuple[Tuple[str, int], ...] = ()
    prologue: Tuple[ElementInit, ...] = ()
    pre_probes: Tuple[Probe, ...] = ()
    epilogue: Tuple[Probe, ...] = ()
    _arrays_by_name: dict = field(
        default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(
            self, '_arrays_by_name', {a.name: a for a in self.arrays})

    def array(self, name):
        try:
            return self._arrays_by_name[name]
        except KeyError:
            raise ValidationError('array {} is not declared'.format(name))

    def has_array(self, name):
        return name in self._arrays_by_name

    @property
    def param_values(self):
        return dict(self.params)

    def with_params(self, **overrides):
        """Copy of the program with some parameter values replaced."""
        values = dict(self.params)
        for name, value in overrides.items():
            if name not in values:
                raise ValidationError('param {} is not declared'.format(name))
            values[name] = int(value)
        return replace(self, params=tuple(
            (name, values[name]) for name, _ in self.params))

    def with_trip_count(self, trip_count):
        return replace(self, trip_count=trip_count)


FlatNode = namedtuple('FlatNode', 'slot expr children path role')
FlatNode.__doc__ = """One step of a statement in evaluation order.

slot: position of the node in the flattened statement
expr: expression node, or the Statement itself for the final store
children: slots of operand nodes
path: tuple of (slot, required truth) conditions that must hold for the node
    to execute (enclosing guard and select arms)
role: 'guard', 'rhs', 'index' or 'store'
"""


def flatten_statement(stmt):
    """Flatten a statement into the evaluation order shared by every machine.

    Guard operands come first, then the rhs in post-order, then the
    destination index in post-order, then the store. Select conditions are
    evaluated before either arm; nodes inside an arm carry the arm's
    condition in their path, so only the chosen arm ever executes.

    Arguments:
        stmt: Statement to flatten

    Returns:
        List of FlatNode objects; the final node is the store.
    """
    nodes = []

    def visit(expr, path, role):
        if isinstance(expr, ArrayRead):
            children = (visit(expr.index, path, role),)
        elif isinstance(expr, BinOp):
            children = (visit(expr.lhs, path, role),
                        visit(expr.rhs, path, role))
        elif isinstance(expr, Select):
            cond = visit(expr.cond, path, role)
            if_true = visit(expr.if_true, path + ((cond, True),), role)
            if_false = visit(expr.if_false, path + ((cond, False),), role)
            children = (cond, if_true, if_false)
        else:
            children = ()
        nodes.append(FlatNode(len(nodes), expr, children, path, role))
        return len(nodes) - 1

    path = ()
    if stmt.guard is not None:
        guard_slot = visit(stmt.guard, (), 'guard')
        path = ((guard_slot, True),)
    rhs_slot = visit(stmt.rhs, path, 'rhs')
    index_slot = visit(stmt.dst_index, path, 'index')
    nodes.append(
        FlatNode(len(nodes), stmt, (index_slot, rhs_slot), path, 'store'))
    return nodes


def path_holds(path, values):
    """True if every (slot, truth) condition holds for the given slot values."""
    for slot, expected in path:
        if bool(values[slot]) != expected:
            return False
    return True


def apply_binop(op, lhs, rhs):
    """64-bit wrapping semantics for every binary operator of the DSL."""
    if op == '+':
        return (lhs + rhs) & ((1 << 64) - 1)
    if op == '-':
        return (lhs - rhs) & ((1 << 64) - 1)
    if op == '*':
        return (lhs * rhs) & ((1 << 64) - 1)
    if op == '^':
        return lhs ^ rhs
    if op == '<<':
        return (lhs << (rhs % 64)) & ((1 << 64) - 1)
    if op == '>>':
        return lhs >> (rhs % 64)
    if op == '&&':
        return int(bool(lhs) and bool(rhs))
    if op == '||':
        return int(bool(lhs) or bool(rhs))
    if op == '==':
        return int(lhs == rhs)
    if op == '!=':
        return int(lhs != rhs)
    if op == '<':
        return int(lhs < rhs)
    raise ValidationError('unknown operator {}'.format(op))


def iter_expr(expr):
    """Yield every node of an expression tree, pre-order."""
    yield expr
    if isinstance(expr, ArrayRead):
        yield from iter_expr(expr.index)
    elif isinstance(expr, BinOp):
        yield from iter_expr(expr.lhs)
        yield from iter_expr(expr.rhs)
    elif isinstance(expr, Select):
        yield from iter_expr(expr.cond)
        yield from iter_expr(expr.if_true)
        yield from iter_expr(expr.if_false)


def read_depth(expr):
    """Deepest nesting of array reads inside expr."""
    if isinstance(expr, ArrayRead):
        return 1 + read_depth(expr.index)
    if isinstance(expr, BinOp):
        return max(read_depth(expr.lhs), read_depth(expr.rhs))
    if isinstance(expr, Select):
        return max(read_depth(expr.cond), read_depth(expr.if_true),
                   read_depth(expr.if_false))
    return 0


def statement_exprs(stmt):
    exprs = [stmt.rhs, stmt.dst_index]
    if stmt.guard is not None:
        exprs.append(stmt.guard)
    return exprs


def validate_program(program):
    """Check the structural invariants of a program.

    Arguments:
        program: GadgetProgram

    Returns:
        The program, unchanged.

    Raises:
        ValidationError naming the violated invariant.
    """
    seen = set()
    for decl in program.arrays:
        if decl.name == INDUCTION_VAR:
            raise ValidationError(
                '{} is the induction variable'.format(INDUCTION_VAR))
        if decl.name in seen:
            raise ValidationError('array {} declared twice'.format(decl.name))
        seen.add(decl.name)
        if decl.elem_size not in ELEM_SIZES:
            raise ValidationError('array {0} has elem_size {1}, not one of '
                                  '{2}'.format(decl.name, decl.elem_size,
                                               ELEM_SIZES))
        if decl.length < 1:
            raise ValidationError(
                'array {} must have at least one element'.format(decl.name))
    for decl in program.arrays:
        if decl.linked is None:
            continue
        if decl.linked == decl.name or decl.linked not in seen:
            raise ValidationError('array {0} is linked to undeclared array '
                                  '{1}'.format(decl.name, decl.linked))
        if decl.link_offset < decl.length:
            raise ValidationError(
                'linked region of {} overlaps its own elements'.format(
                    decl.name))

    param_names = [name for name, _ in program.params]
    if len(set(param_names)) != len(param_names):
        raise ValidationError('param declared twice')
    for name in param_names:
        if name in seen or name == INDUCTION_VAR:
            raise ValidationError('param {} shadows another name'.format(name))

    if program.trip_count < 1:
        raise ValidationError('trip_count must be at least 1')
    if not program.statements:
        raise ValidationError('loop has no statements')

    for stmt in program.statements:
        dst = program.array(stmt.dst_array)
        if dst.readonly:
            raise ValidationError('dst array {} is not writable'.format(
                dst.name))
        if read_depth(stmt.dst_index) > MAX_INDEX_DEPTH:
            raise ValidationError('index indirection deeper than {}'.format(
                MAX_INDEX_DEPTH))
        for expr in statement_exprs(stmt):
            for node in iter_expr(expr):
                _validate_node(program, node, param_names)

    for init in program.prologue:
        decl = program.array(init.array)
        if not 0 <= init.start < init.stop <= decl.length:
            raise ValidationError('init outside array {}'.format(decl.name))
    for probe in program.pre_probes + program.epilogue:
        decl = program.array(probe.array)
        if not 0 <= probe.index < decl.length:
            raise ValidationError('probe outside array {}'.format(decl.name))
    return program


def _validate_node(program, node, param_names):
    if isinstance(node, ArrayRead):
        program.array(node.array)
        if read_depth(node.index) > MAX_INDEX_DEPTH:
            raise ValidationError('index indirection deeper than {}'.format(
                MAX_INDEX_DEPTH))
    elif isinstance(node, BinOp):
        if node.op not in BINARY_OPS:
            raise ValidationError('unknown operator {}'.format(node.op))
        if node.op in ('<<', '>>') and isinstance(node.rhs, Literal) \
                and not 0 <= node.rhs.value < 64:
            raise ValidationError('shift amount {} is not below 64'.format(
                node.rhs.value))
    elif isinstance(node, Select):
        if read_depth(node.cond):
            raise ValidationError('select condition may not read memory')
    elif isinstance(node, Param):
        if node.name not in param_names:
            raise ValidationError('param {} is not declared'.format(node.name))
