"""
Parser and pretty printer for the line-oriented gadget DSL.

    # comment
    param bound = 16
    array A 4 256
    array secret_val 4 256 linked secret 4096
    array secret 1 64 readonly
    init A[1] = 7
    init secret_val[0..256] = 256
    probe marker[0]
    loop 16:
      A[x[z]] = encode_array[secret_val[A[z]] * 64]
      sink[0] = encode_array[table[xs[0]] * 64] when xs[0] < bound
    probe encode_array[0]

The single-line form `for z in 0..16 { stmt; stmt }` is accepted in place of a
`loop` block. Probes before the loop are timed before it runs, probes after it
form the reload epilogue.
"""

import re
from pathlib import Path

from srv_sim.errors import GadgetSyntaxError
from srv_sim.isa.program import BINARY_OPS, INDUCTION_VAR, SELECT_PRECEDENCE, \
    ArrayDecl, ArrayRead, BinOp, ElementInit, GadgetProgram, Induction, \
    Literal, Param, Probe, Select, Statement, validate_program

_TOKEN_RE = re.compile(r'''
    (?P<ws>\s+)
  | (?P<int>0[xX][0-9a-fA-F]+|\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\|\||&&|==|!=|<<|>>|\.\.|[-+*^<\[\](){};:?=])
''', re.VERBOSE)

_KEYWORDS = {'array', 'param', 'init', 'probe', 'loop', 'for', 'in', 'when',
             'linked', 'readonly'}


class _Token:
    __slots__ = ('kind', 'text', 'column')

    def __init__(self, kind, text, column):
        self.kind = kind
        self.text = text
        self.column = column

    def __repr__(self):
        return '_Token({0!r}, {1!r}, {2})'.format(
            self.kind, self.text, self.column)


def _tokenize(text, line_no, column_offset=0):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise GadgetSyntaxError(
                'unexpected character {!r}'.format(text[pos]), line_no,
                pos + 1 + column_offset)
        kind = match.lastgroup
        if kind != 'ws':
            tokens.append(_Token(kind, match.group(), pos + 1 + column_offset))
        pos = match.end()
    tokens.append(_Token('end', '', len(text) + 1 + column_offset))
    return tokens


class _LineParser:
    """Recursive descent over the tokens of one line."""

    def __init__(self, text, line_no, column_offset=0):
        self.tokens = _tokenize(text, line_no, column_offset)
        self.pos = 0
        self.line_no = line_no

    @property
    def current(self):
        return self.tokens[self.pos]

    def error(self, message, token=None):
        token = self.current if token is None else token
        raise GadgetSyntaxError(message, self.line_no, token.column)

    def advance(self):
        token = self.current
        self.pos += 1
        return token

    def at(self, text):
        return self.current.text == text and self.current.kind != 'end'

    def expect(self, text):
        if not self.at(text):
            self.error('expected {0!r}, found {1!r}'.format(
                text, self.current.text or 'end of line'))
        return self.advance()

    def expect_name(self):
        token = self.current
        if token.kind != 'name' or token.text in _KEYWORDS:
            self.error('expected a name, found {!r}'.format(
                token.text or 'end of line'))
        return self.advance().text

    def expect_int(self, allow_negative=False):
        negative = False
        if allow_negative and self.at('-'):
            self.advance()
            negative = True
        token = self.current
        if token.kind != 'int':
            self.error('expected an integer, found {!r}'.format(
                token.text or 'end of line'))
        self.advance()
        value = int(token.text, 0)
        return -value if negative else value

    def expect_end(self):
        if self.current.kind != 'end':
            self.error('unexpected {!r}'.format(self.current.text))

    def parse_expr(self, min_prec=SELECT_PRECEDENCE):
        lhs = self.parse_primary()
        while True:
            token = self.current
            if token.kind == 'op' and token.text in BINARY_OPS:
                prec = BINARY_OPS[token.text]
                if prec < min_prec:
                    break
                self.advance()
                rhs = self.parse_expr(prec + 1)
                lhs = BinOp(token.text, lhs, rhs)
            elif token.text == '?' and min_prec == SELECT_PRECEDENCE:
                self.advance()
                if_true = self.parse_expr()
                self.expect(':')
                if_false = self.parse_expr()
                return Select(lhs, if_true, if_false)
            else:
                break
        return lhs

    def parse_primary(self):
        token = self.current
        if token.text == '(':
            self.advance()
            expr = self.parse_expr()
            self.expect(')')
            return expr
        if token.kind == 'int':
            return Literal(self.expect_int())
        if token.kind == 'name' and token.text not in _KEYWORDS:
            self.advance()
            if token.text == INDUCTION_VAR:
                return Induction()
            if self.at('['):
                self.advance()
                index = self.parse_expr()
                self.expect(']')
                return ArrayRead(token.text, index)
            return Param(token.text)
        self.error('expected an expression, found {!r}'.format(
            token.text or 'end of line'))

    def parse_statement(self):
        dst = self.expect_name()
        if dst == INDUCTION_VAR:
            self.error('cannot assign to the induction variable')
        self.expect('[')
        index = self.parse_expr()
        self.expect(']')
        self.expect('=')
        rhs = self.parse_expr()
        guard = None
        if self.at('when'):
            self.advance()
            guard = self.parse_expr()
        return Statement(dst, index, rhs, guard)


def parse_gadget(text):
    """Parse gadget DSL text into a validated GadgetProgram.

    Arguments:
        text: DSL source

    Returns:
        GadgetProgram

    Raises:
        GadgetSyntaxError with line and column for malformed text;
        ValidationError for well-formed programs violating an invariant.
    """
    arrays, params, prologue, pre_probes, epilogue = [], [], [], [], []
    statements = []
    trip_count = None
    lines = text.splitlines()
    line_idx = 0
    while line_idx < len(lines):
        raw = lines[line_idx]
        line_no = line_idx + 1
        line_idx += 1
        line = _strip_comment(raw)
        if not line.strip():
            continue
        if line[0].isspace():
            raise GadgetSyntaxError(
                'indented line outside a loop block', line_no,
                len(line) - len(line.lstrip()) + 1)
        p = _LineParser(line, line_no)
        keyword = p.current.text
        if keyword == 'array':
            p.advance()
            name = p.expect_name()
            elem_size = p.expect_int()
            length = p.expect_int()
            linked, link_offset, readonly = None, 0, False
            if p.at('linked'):
                p.advance()
                linked = p.expect_name()
                link_offset = p.expect_int()
            if p.at('readonly'):
                p.advance()
                readonly = True
            p.expect_end()
            arrays.append(ArrayDecl(name, elem_size, length, linked,
                                    link_offset, readonly))
        elif keyword == 'param':
            p.advance()
            name = p.expect_name()
            p.expect('=')
            params.append((name, p.expect_int(allow_negative=True)))
            p.expect_end()
        elif keyword == 'init':
            p.advance()
            name = p.expect_name()
            p.expect('[')
            start = p.expect_int()
            stop = start + 1
            if p.at('..'):
                p.advance()
                stop = p.expect_int()
            p.expect(']')
            p.expect('=')
            value = p.expect_int(allow_negative=True)
            p.expect_end()
            prologue.append(ElementInit(name, start, stop, value))
        elif keyword == 'probe':
            p.advance()
            name = p.expect_name()
            p.expect('[')
            index = p.expect_int()
            p.expect(']')
            p.expect_end()
            probe = Probe(name, index)
            (pre_probes if trip_count is None else epilogue).append(probe)
        elif keyword in ('loop', 'for'):
            if trip_count is not None:
                p.error('only one loop is allowed')
            if keyword == 'loop':
                p.advance()
                trip_count = p.expect_int()
                p.expect(':')
                p.expect_end()
                while line_idx < len(lines):
                    body = _strip_comment(lines[line_idx])
                    if not body.strip():
                        line_idx += 1
                        continue
                    if not body[0].isspace():
                        break
                    line_idx += 1
                    indent = len(body) - len(body.lstrip())
                    bp = _LineParser(body.strip(), line_idx, indent)
                    statements.append(bp.parse_statement())
                    bp.expect_end()
            else:
                trip_count = _parse_for_loop(p, statements)
        else:
            p.error('unknown directive {!r}'.format(keyword))
    if trip_count is None:
        raise GadgetSyntaxError('missing loop', len(lines) or 1, 1)
    program = GadgetProgram(
        arrays=tuple(arrays), trip_count=trip_count,
        statements=tuple(statements), params=tuple(params),
        prologue=tuple(prologue), pre_probes=tuple(pre_probes),
        epilogue=tuple(epilogue))
    return validate_program(program)


def _parse_for_loop(p, statements):
    p.expect('for')
    if p.expect_name() != INDUCTION_VAR:
        p.error('the loop variable must be {}'.format(INDUCTION_VAR),
                p.tokens[p.pos - 1])
    p.expect('in')
    start_token = p.current
    start = p.expect_int()
    if start != 0:
        p.error('loops start at 0', start_token)
    p.expect('..')
    trip_count = p.expect_int()
    p.expect('{')
    while not p.at('}'):
        statements.append(p.parse_statement())
        if p.at(';'):
            p.advance()
        elif not p.at('}'):
            p.error('expected \';\' or \'}\'')
    p.expect('}')
    p.expect_end()
    return trip_count


def _strip_comment(line):
    idx = line.find('#')
    return line if idx == -1 else line[:idx]


def load_gadget(path):
    """Parse a .gadget file."""
    return parse_gadget(Path(path).expanduser().read_text(encoding='utf-8'))


def format_expr(expr, parent_prec=SELECT_PRECEDENCE, right=False):
    """Render an expression with the minimum parentheses that re-parse to it."""
    if isinstance(expr, Literal):
        return str(expr.value)
    if isinstance(expr, Induction):
        return INDUCTION_VAR
    if isinstance(expr, Param):
        return expr.name
    if isinstance(expr, ArrayRead):
        return '{0}[{1}]'.format(expr.array, format_expr(expr.index))
    if isinstance(expr, Select):
        s = '{0} ? {1} : {2}'.format(
            format_expr(expr.cond, SELECT_PRECEDENCE + 1),
            format_expr(expr.if_true), format_expr(expr.if_false))
        return s if parent_prec == SELECT_PRECEDENCE and not right \
            else '({})'.format(s)
    prec = BINARY_OPS[expr.op]
    s = '{0} {1} {2}'.format(
        format_expr(expr.lhs, prec), expr.op,
        format_expr(expr.rhs, prec, right=True))
    if prec < parent_prec or (right and prec == parent_prec):
        return '({})'.format(s)
    return s


def format_statement(stmt):
    s = '{0}[{1}] = {2}'.format(
        stmt.dst_array, format_expr(stmt.dst_index),
        format_expr(stmt.rhs, SELECT_PRECEDENCE, right=stmt.guard is not None))
    if stmt.guard is not None:
        s += ' when {}'.format(format_expr(stmt.guard))
    return s


def pretty_print(program):
    """Render a program as DSL text that parses back to an equal program."""
    lines = []
    for name, value in program.params:
        lines.append('param {0} = {1}'.format(name, value))
    for decl in program.arrays:
        line = 'array {0} {1} {2}'.format(
            decl.name, decl.elem_size, decl.length)
        if decl.linked is not None:
            line += ' linked {0} {1}'.format(decl.linked, decl.link_offset)
        if decl.readonly:
            line += ' readonly'
        lines.append(line)
    for init in program.prologue:
        if init.stop == init.start + 1:
            target = str(init.start)
        else:
            target = '{0}..{1}'.format(init.start, init.stop)
        lines.append('init {0}[{1}] = {2}'.format(
            init.array, target, init.value))
    for probe in program.pre_probes:
        lines.append('probe {0}[{1}]'.format(probe.array, probe.index))
    lines.append('loop {}:'.format(program.trip_count))
    for stmt in program.statements:
        lines.append('  ' + format_statement(stmt))
    for probe in program.epilogue:
        lines.append('probe {0}[{1}]'.format(probe.array, probe.index))
    return '\n'.join(lines) + '\n'
