"""Spreadsheet-style expression language: types, column semantics, formula text.

Expressions operate on aligned example columns: every operation is applied
independently to each example row, and a candidate is rejected outright
(EvalError) if it fails on any row. All string indices are 1-based, as in
spreadsheet formulas.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

STRING = "S"
INTEGER = "I"

# Benchmarks never use more than three input columns; signature layouts are
# sized for this maximum.
MAX_INPUTS = 3


class EvalError(Exception):
    """An operation precondition failed or a result exceeded the value limits."""


class FormulaError(ValueError):
    """Malformed or unsupported formula text."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class EvalLimits:
    """Caps that keep REPT/arithmetic from generating unbounded values.

    Values at the cap are errors, not truncations, so every stored value is
    exact.
    """

    max_string_length: int = 100
    max_integer_magnitude: int = 1_000_000

    def __post_init__(self):
        if self.max_string_length <= 0 or self.max_integer_magnitude <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class Task:
    """A set of input/output example columns plus a display name."""

    inputs: tuple[tuple[str, ...], ...]
    outputs: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(tuple(col) for col in self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        n = len(self.outputs)
        if n < 1:
            raise ValueError("task needs at least one example")
        if not 1 <= len(self.inputs) <= MAX_INPUTS:
            raise ValueError(f"task needs 1..{MAX_INPUTS} input columns")
        for col in self.inputs:
            if len(col) != n:
                raise ValueError("input columns and output column must have equal length")
            if not all(isinstance(c, str) for c in col):
                raise ValueError("input cells must be strings")
        if not all(isinstance(o, str) for o in self.outputs):
            raise ValueError("outputs must be strings")

    @property
    def num_examples(self) -> int:
        return len(self.outputs)

    @property
    def num_inputs(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class OpDescriptor:
    """One operation of the language; overloads are distinct descriptors."""

    name: str
    arg_kinds: tuple[str, ...]
    return_kind: str
    cost: int = 1

    @property
    def arity(self) -> int:
        return len(self.arg_kinds)

    def __repr__(self):
        return f"{self.name}/{self.arity}"


def _make_op(name, arg_kinds, return_kind):
    return OpDescriptor(name, tuple(arg_kinds), return_kind)


# Fixed operation order; enumeration and premise-label positions depend on it.
OP_TABLE: tuple[OpDescriptor, ...] = (
    _make_op("CONCATENATE", (STRING, STRING), STRING),
    _make_op("LEFT", (STRING, INTEGER), STRING),
    _make_op("RIGHT", (STRING, INTEGER), STRING),
    _make_op("MID", (STRING, INTEGER, INTEGER), STRING),
    _make_op("REPLACE", (STRING, INTEGER, INTEGER, STRING), STRING),
    _make_op("TRIM", (STRING,), STRING),
    _make_op("REPT", (STRING, INTEGER), STRING),
    _make_op("SUBSTITUTE", (STRING, STRING, STRING), STRING),
    _make_op("SUBSTITUTE", (STRING, STRING, STRING, INTEGER), STRING),
    _make_op("TO_TEXT", (INTEGER,), STRING),
    _make_op("LOWER", (STRING,), STRING),
    _make_op("UPPER", (STRING,), STRING),
    _make_op("PROPER", (STRING,), STRING),
    _make_op("ADD", (INTEGER, INTEGER), INTEGER),
    _make_op("MINUS", (INTEGER, INTEGER), INTEGER),
    _make_op("FIND", (STRING, STRING), INTEGER),
    _make_op("FIND", (STRING, STRING, INTEGER), INTEGER),
    _make_op("LEN", (STRING,), INTEGER),
)

OP_INDEX: dict[OpDescriptor, int] = {op: i for i, op in enumerate(OP_TABLE)}

_OPS_BY_NAME: dict[str, dict[int, OpDescriptor]] = {}
for _op in OP_TABLE:
    _OPS_BY_NAME.setdefault(_op.name, {})[_op.arity] = _op


def op_table() -> tuple[OpDescriptor, ...]:
    """The fixed, ordered operation set of the language."""
    return OP_TABLE


def find_op(name: str, arity: int) -> OpDescriptor:
    overloads = _OPS_BY_NAME.get(name)
    if overloads is None:
        raise KeyError(name)
    op = overloads.get(arity)
    if op is None:
        raise KeyError(f"{name}/{arity}")
    return op


def proper_case(s: str) -> str:
    """Uppercase the first letter of every letter-run, lowercase the rest."""
    out = []
    prev_alpha = False
    for ch in s:
        if ch.isalpha():
            out.append(ch.lower() if prev_alpha else ch.upper())
            prev_alpha = True
        else:
            out.append(ch)
            prev_alpha = False
    return "".join(out)


def substitute_kth(s: str, old: str, new: str, k: int) -> str | None:
    """Replace the k-th non-overlapping occurrence of old; None if k < 1.

    Fewer than k occurrences leaves the string unchanged. An empty search
    string also leaves it unchanged.
    """
    if k < 1:
        return None
    if not old:
        return s
    start = 0
    count = 0
    while True:
        p = s.find(old, start)
        if p < 0:
            return s
        count += 1
        if count == k:
            return s[:p] + new + s[p + len(old):]
        start = p + len(old)


def _build_impls(max_len: int, max_int: int):
    """Column-level implementations aligned with OP_TABLE.

    Each takes per-example tuples and returns a result tuple, or None when any
    row violates a precondition or a limit. The hot search loop relies on the
    None convention to avoid exception overhead.
    """

    def concatenate(a, b):
        out = []
        for x, y in zip(a, b):
            r = x + y
            if len(r) > max_len:
                return None
            out.append(r)
        return tuple(out)

    def left(s, i):
        out = []
        for x, k in zip(s, i):
            if k < 0:
                return None
            out.append(x[:k])
        return tuple(out)

    def right(s, i):
        out = []
        for x, k in zip(s, i):
            if k < 0:
                return None
            out.append(x[len(x) - k:] if k < len(x) else x)
        return tuple(out)

    def mid(s, i, j):
        out = []
        for x, start, length in zip(s, i, j):
            if start < 1 or length < 0:
                return None
            out.append(x[start - 1:start - 1 + length])
        return tuple(out)

    def replace(s, i, j, t):
        out = []
        for x, start, length, new in zip(s, i, j, t):
            if start < 1 or length < 0:
                return None
            r = x[:start - 1] + new + x[start - 1 + length:]
            if len(r) > max_len:
                return None
            out.append(r)
        return tuple(out)

    def trim(s):
        return tuple(x.strip() for x in s)

    def rept(s, i):
        out = []
        for x, k in zip(s, i):
            if k < 0 or len(x) * k > max_len:
                return None
            out.append(x * k)
        return tuple(out)

    def substitute3(s, a, b):
        out = []
        for x, old, new in zip(s, a, b):
            r = x.replace(old, new) if old else x
            if len(r) > max_len:
                return None
            out.append(r)
        return tuple(out)

    def substitute4(s, a, b, i):
        out = []
        for x, old, new, k in zip(s, a, b, i):
            r = substitute_kth(x, old, new, k)
            if r is None or len(r) > max_len:
                return None
            out.append(r)
        return tuple(out)

    def to_text(i):
        return tuple(map(str, i))

    def lower(s):
        out = tuple(x.lower() for x in s)
        return None if max(map(len, out)) > max_len else out

    def upper(s):
        out = tuple(x.upper() for x in s)
        return None if max(map(len, out)) > max_len else out

    def proper(s):
        out = tuple(proper_case(x) for x in s)
        return None if max(map(len, out)) > max_len else out

    def add(a, b):
        out = []
        for x, y in zip(a, b):
            v = x + y
            if v > max_int or v < -max_int:
                return None
            out.append(v)
        return tuple(out)

    def minus(a, b):
        out = []
        for x, y in zip(a, b):
            v = x - y
            if v > max_int or v < -max_int:
                return None
            out.append(v)
        return tuple(out)

    def find2(needle, hay):
        out = []
        for n, h in zip(needle, hay):
            p = h.find(n)
            if p < 0:
                return None
            out.append(p + 1)
        return tuple(out)

    def find3(needle, hay, i):
        out = []
        for n, h, start in zip(needle, hay, i):
            if start < 1:
                return None
            p = h.find(n, start - 1)
            if p < 0:
                return None
            out.append(p + 1)
        return tuple(out)

    def length(s):
        return tuple(map(len, s))

    return (
        concatenate, left, right, mid, replace, trim, rept,
        substitute3, substitute4, to_text, lower, upper, proper,
        add, minus, find2, find3, length,
    )


@lru_cache(maxsize=8)
def _impls_for(max_len: int, max_int: int):
    return _build_impls(max_len, max_int)


def impls_for(limits: EvalLimits):
    """Column implementations bound to the given limits, OP_TABLE order."""
    return _impls_for(limits.max_string_length, limits.max_integer_magnitude)


class Value:
    """Per-example results of one expression, with provenance for rebuilding it."""

    __slots__ = ("kind", "vals", "weight", "op", "args", "leaf", "score")

    def __init__(self, kind, vals, weight, op=None, args=None, leaf=None):
        self.kind = kind
        self.vals = vals
        self.weight = weight
        self.op = op          # OpDescriptor for composed values
        self.args = args      # tuple[Value, ...] for composed values
        self.leaf = leaf      # ("var", index) or ("lit", constant) for leaves
        self.score = None     # guidance probability, set by guided search

    def __repr__(self):
        return f"Value({self.kind}, {self.vals!r}, w={self.weight})"

    def to_expr(self) -> "Expr":
        if self.leaf is not None:
            tag, x = self.leaf
            return Var(x) if tag == "var" else Lit(x)
        return Call(self.op, tuple(a.to_expr() for a in self.args))


def var_value(task: Task, index: int) -> Value:
    return Value(STRING, tuple(task.inputs[index]), 1, leaf=("var", index))


def lit_value(constant, n: int) -> Value:
    kind = STRING if isinstance(constant, str) else INTEGER
    return Value(kind, (constant,) * n, 1, leaf=("lit", constant))


class Expr:
    __slots__ = ()


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = index

    def __eq__(self, other):
        return isinstance(other, Var) and other.index == self.index

    def __hash__(self):
        return hash(("var", self.index))


class Lit(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        if not isinstance(value, (str, int)) or isinstance(value, bool):
            raise TypeError("literals are strings or integers")
        self.value = value

    def __eq__(self, other):
        return (isinstance(other, Lit) and type(other.value) is type(self.value)
                and other.value == self.value)

    def __hash__(self):
        return hash(("lit", type(self.value).__name__, self.value))


class Call(Expr):
    __slots__ = ("op", "args")

    def __init__(self, op: OpDescriptor, args):
        args = tuple(args)
        if len(args) != op.arity:
            raise ValueError(f"{op} expects {op.arity} arguments, got {len(args)}")
        self.op = op
        self.args = args

    def __eq__(self, other):
        return isinstance(other, Call) and other.op == self.op and other.args == self.args

    def __hash__(self):
        return hash((self.op, self.args))


def expr_weight(expr: Expr) -> int:
    """AST node count: every operation, constant, and variable counts 1."""
    if isinstance(expr, Call):
        return expr.op.cost + sum(expr_weight(a) for a in expr.args)
    return 1


def apply_op(op: OpDescriptor, args, limits: EvalLimits = EvalLimits()) -> Value:
    """Apply one operation row-wise to argument values.

    Raises EvalError if any row violates a precondition or limit; a failed
    candidate is discarded whole, never stored partially.
    """
    args = tuple(args)
    if len(args) != op.arity:
        raise ValueError(f"{op} expects {op.arity} arguments")
    n = len(args[0].vals)
    for a, kind in zip(args, op.arg_kinds):
        if a.kind != kind:
            raise ValueError(f"{op} argument kind mismatch: wanted {kind}, got {a.kind}")
        if len(a.vals) != n:
            raise ValueError("argument example counts differ")
    fn = impls_for(limits)[OP_INDEX[op]]
    vals = fn(*(a.vals for a in args))
    if vals is None:
        raise EvalError(f"{op} failed on at least one example row")
    weight = 1 + sum(a.weight for a in args)
    return Value(op.return_kind, vals, weight, op=op, args=args)


def eval_expr(expr: Expr, task: Task, limits: EvalLimits = EvalLimits()) -> Value:
    """Evaluate an expression over every example row of the task."""
    if isinstance(expr, Var):
        if not 0 <= expr.index < task.num_inputs:
            raise EvalError(f"var_{expr.index} not present in task")
        return var_value(task, expr.index)
    if isinstance(expr, Lit):
        return lit_value(expr.value, task.num_examples)
    if isinstance(expr, Call):
        args = tuple(eval_expr(a, task, limits) for a in expr.args)
        return apply_op(expr.op, args, limits)
    raise TypeError(f"not an expression: {expr!r}")


def quote_string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render(node) -> str:
    """Formula text for an expression or a value's provenance."""
    if isinstance(node, Value):
        node = node.to_expr()
    if isinstance(node, Var):
        return f"var_{node.index}"
    if isinstance(node, Lit):
        return quote_string(node.value) if isinstance(node.value, str) else str(node.value)
    if isinstance(node, Call):
        return node.op.name + "(" + ", ".join(render(a) for a in node.args) + ")"
    raise TypeError(f"cannot render {node!r}")


_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<name>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<int>-?[0-9]+)
      | (?P<str>"(?:[^"\\]|\\.)*")
      | (?P<punct>[(),])
    )""",
    re.VERBOSE,
)

_VAR_RE = re.compile(r"var_([0-9]+)\Z")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise FormulaError(f"unexpected character {rest[0]!r}", pos + (len(text[pos:]) - len(rest)))
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _unescape(raw: str, pos: int) -> str:
    body = raw[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            if i + 1 >= len(body):
                raise FormulaError("dangling escape in string literal", pos)
            nxt = body[i + 1]
            if nxt not in ('"', "\\"):
                raise FormulaError(f"unsupported escape \\{nxt}", pos)
            out.append(nxt)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if kind != "punct" or text != value:
            raise FormulaError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        expr = self.expression()
        kind, text, pos = self.peek()
        if kind != "end":
            raise FormulaError(f"unexpected trailing {text!r}", pos)
        return expr

    def expression(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "int":
            return Lit(int(text))
        if kind == "str":
            return Lit(_unescape(text, pos))
        if kind == "name":
            var = _VAR_RE.match(text)
            if var:
                return Var(int(var.group(1)))
            nxt_kind, nxt_text, _ = self.peek()
            if nxt_kind != "punct" or nxt_text != "(":
                raise FormulaError(f"unknown identifier {text!r}", pos)
            return self.call(text, pos)
        raise FormulaError(f"expected expression, found {text or 'end of input'!r}", pos)

    def call(self, name: str, pos: int) -> Expr:
        if name not in _OPS_BY_NAME:
            raise FormulaError(f"unknown function {name!r}", pos)
        self.expect("(")
        args = [self.expression()]
        while True:
            kind, text, p = self.take()
            if kind == "punct" and text == ")":
                break
            if kind == "punct" and text == ",":
                args.append(self.expression())
                continue
            raise FormulaError(f"expected ',' or ')', found {text or 'end of input'!r}", p)
        return self.resolve(name, args, pos)

    def resolve(self, name: str, args: list[Expr], pos: int) -> Expr:
        overloads = _OPS_BY_NAME[name]
        op = overloads.get(len(args))
        if op is not None:
            return Call(op, args)
        # Spreadsheet CONCATENATE is variadic; fold it into binary nodes.
        if name == "CONCATENATE" and len(args) > 2:
            folded = args[-1]
            for a in reversed(args[:-1]):
                folded = Call(_OPS_BY_NAME["CONCATENATE"][2], (a, folded))
            return folded
        expected = "/".join(str(a) for a in sorted(overloads))
        raise FormulaError(
            f"{name} takes {expected} arguments, got {len(args)}", pos)


def parse_formula(text: str) -> Expr:
    """Parse formula text back into an expression; inverse of render."""
    return _Parser(text).parse()
