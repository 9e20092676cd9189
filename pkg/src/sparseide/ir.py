"""Three-address intermediate representation.

The textual form is line oriented: one statement per line, procedures written
as ``proc name(p1, p2) { ... }`` and labels as ``L:`` on a line of their own.
Binary operations are always in linear form (one variable, one integer
literal) and access paths have length one, so no lowering pass is needed
before analysis.

Node numbering inside a procedure: position 0 is the synthetic start node,
statements occupy positions ``1..n`` (their ``sid``) and ``n + 1`` is the
synthetic exit node.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

OPERATORS = ("+", "-", "*", "/")
KEYWORDS = frozenset({"proc", "if", "goto", "return", "call", "new", "nop"})


class ParseError(Exception):
    """Raised for malformed IR text. Carries a 1-based line/column."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


# ---------------------------------------------------------------------------
# Statements


@dataclass(frozen=True, slots=True, kw_only=True)
class Statement:
    sid: int
    proc: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class ConstAssign(Statement):
    target: str
    value: int


@dataclass(frozen=True, slots=True)
class Binop(Statement):
    target: str
    source: str
    op: str
    value: int


@dataclass(frozen=True, slots=True)
class NonLinearBinop(Statement):
    """``x = y op z`` with two variable operands.

    Only produced when the parser is asked to keep non-linear operations
    instead of rejecting them.
    """

    target: str
    left: str
    op: str
    right: str


@dataclass(frozen=True, slots=True)
class LocalCopy(Statement):
    target: str
    source: str


@dataclass(frozen=True, slots=True)
class FieldLoad(Statement):
    target: str
    base: str
    field: str


@dataclass(frozen=True, slots=True)
class FieldStore(Statement):
    base: str
    field: str
    source: str


@dataclass(frozen=True, slots=True)
class StaticLoad(Statement):
    target: str
    cls: str
    field: str


@dataclass(frozen=True, slots=True)
class StaticStore(Statement):
    cls: str
    field: str
    source: str


@dataclass(frozen=True, slots=True)
class ArrayLoad(Statement):
    target: str
    base: str
    index: int


@dataclass(frozen=True, slots=True)
class ArrayStore(Statement):
    base: str
    index: int
    source: str


@dataclass(frozen=True, slots=True)
class New(Statement):
    target: str


@dataclass(frozen=True, slots=True)
class Call(Statement):
    target: Optional[str]
    callee: str
    args: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class Return(Statement):
    value: Optional[str]


@dataclass(frozen=True, slots=True)
class Branch(Statement):
    cond: Optional[str]
    label: str


@dataclass(frozen=True, slots=True)
class Goto(Statement):
    label: str


@dataclass(frozen=True, slots=True)
class Label(Statement):
    name: str


@dataclass(frozen=True, slots=True)
class Nop(Statement):
    pass


_ASSIGNING = frozenset({ConstAssign, Binop, NonLinearBinop, LocalCopy, FieldLoad, StaticLoad,
                        ArrayLoad, New, Call})


def assigned_local(stmt: Statement) -> Optional[str]:
    """The local a statement overwrites, if any."""
    return stmt.target if type(stmt) in _ASSIGNING else None


def assigned_locals(statements) -> frozenset[str]:
    """Every local some statement in ``statements`` overwrites."""
    kinds = _ASSIGNING
    out = {s.target for s in statements if type(s) in kinds}
    out.discard(None)  # calls without a result
    return frozenset(out)


# ---------------------------------------------------------------------------
# Procedures and programs


@dataclass(frozen=True)
class Procedure:
    name: str
    params: tuple[str, ...]
    statements: tuple[Statement, ...]
    labels: dict[str, int] = field(default_factory=dict, compare=False)

    @property
    def start(self) -> int:
        return 0

    @property
    def exit(self) -> int:
        return len(self.statements) + 1

    @property
    def node_count(self) -> int:
        return len(self.statements) + 2

    def stmt(self, sid: int) -> Statement:
        if not 1 <= sid <= len(self.statements):
            raise KeyError(f"{self.name} has no statement {sid}")
        return self.statements[sid - 1]

    def node_name(self, pos: int) -> str:
        if pos == 0:
            return "entry"
        if pos == self.exit:
            return "exit"
        return str(pos)

    def resolve_node(self, text: str) -> int:
        """Map ``entry``/``exit``/``<sid>``/``<label>`` to a node position."""
        if text == "entry":
            return 0
        if text == "exit":
            return self.exit
        if text.lstrip("-").isdigit():
            pos = int(text)
            if not 0 <= pos <= self.exit:
                raise KeyError(f"{self.name} has no statement {pos}")
            return pos
        if text in self.labels:
            return self.labels[text]
        raise KeyError(f"{self.name} has no statement {text!r}")


@dataclass(frozen=True)
class Expectation:
    """A ``// expect x = v`` annotation: value of ``symbol`` after ``sid``."""

    proc: str
    sid: int
    symbol: str
    value: Union[int, str]  # int, "top" or "bottom"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    procedures: dict[str, Procedure]
    expectations: tuple[Expectation, ...] = field(default=(), compare=False)

    def __iter__(self) -> Iterator[Procedure]:
        return iter(self.procedures.values())

    def __getitem__(self, name: str) -> Procedure:
        return self.procedures[name]

    @property
    def statement_count(self) -> int:
        return sum(len(p.statements) for p in self)


# ---------------------------------------------------------------------------
# Parser

_ID = r"[A-Za-z_][A-Za-z0-9_]*"
_INT = r"-?\d+"

_PROC = re.compile(rf"^proc\s+({_ID})\s*\(\s*([^)]*)\)\s*\{{\s*$")
_LABEL = re.compile(rf"^({_ID})\s*:$")
_GOTO = re.compile(rf"^goto\s+({_ID})$")
_BRANCH = re.compile(rf"^if\s+(\*|{_ID})\s+goto\s+({_ID})$")
_RETURN = re.compile(rf"^return(?:\s+({_ID}))?$")
_CALL = re.compile(rf"^(?:({_ID})\s*=\s*)?call\s+({_ID})\s*\(\s*([^)]*)\)$")
_NEW = re.compile(rf"^({_ID})\s*=\s*new$")
_SSTORE = re.compile(rf"^@({_ID})\.({_ID})\s*=\s*({_ID})$")
_SLOAD = re.compile(rf"^({_ID})\s*=\s*@({_ID})\.({_ID})$")
_FSTORE = re.compile(rf"^({_ID})\.({_ID})\s*=\s*({_ID})$")
_FLOAD = re.compile(rf"^({_ID})\s*=\s*({_ID})\.({_ID})$")
_ASTORE = re.compile(rf"^({_ID})\[\s*({_INT})\s*\]\s*=\s*({_ID})$")
_ALOAD = re.compile(rf"^({_ID})\s*=\s*({_ID})\[\s*({_INT})\s*\]$")
_CONST = re.compile(rf"^({_ID})\s*=\s*({_INT})$")
_BINOP = re.compile(rf"^({_ID})\s*=\s*({_ID})\s*([-+*/])\s*({_INT})$")
_NONLIN = re.compile(rf"^({_ID})\s*=\s*({_ID}|{_INT})\s*([-+*/])\s*({_ID}|{_INT})$")
_COPY = re.compile(rf"^({_ID})\s*=\s*({_ID})$")
_EXPECT = re.compile(r"^expect\s+(\S+)\s*=\s*(\S+)$")
_ARG = re.compile(rf"^{_ID}$")


def _is_int(text: str) -> bool:
    return re.fullmatch(_INT, text) is not None


def _check_names(names, line: int, col: int) -> None:
    for name in names:
        if name in KEYWORDS:
            raise ParseError(f"keyword {name!r} used as a name", line, col)


def _parse_args(text: str, line: int, col: int) -> tuple[str, ...]:
    text = text.strip()
    if not text:
        return ()
    args = tuple(a.strip() for a in text.split(","))
    for a in args:
        if not _ARG.match(a):
            raise ParseError(f"bad argument {a!r}: arguments must be locals", line, col)
    _check_names(args, line, col)
    return args


def _parse_statement(body: str, proc: str, sid: int, line: int, col: int,
                     allow_nonlinear: bool) -> Statement:
    kw = dict(sid=sid, proc=proc, line=line)
    if body == "nop":
        return Nop(**kw)
    if m := _LABEL.match(body):
        _check_names(m.groups(), line, col)
        return Label(m.group(1), **kw)
    if m := _GOTO.match(body):
        return Goto(m.group(1), **kw)
    if m := _BRANCH.match(body):
        cond = None if m.group(1) == "*" else m.group(1)
        if cond is not None:
            _check_names([cond], line, col)
        return Branch(cond, m.group(2), **kw)
    if m := _RETURN.match(body):
        if m.group(1):
            _check_names([m.group(1)], line, col)
        return Return(m.group(1), **kw)
    if m := _CALL.match(body):
        if m.group(1):
            _check_names([m.group(1)], line, col)
        return Call(m.group(1), m.group(2), _parse_args(m.group(3), line, col), **kw)
    if m := _NEW.match(body):
        _check_names(m.groups(), line, col)
        return New(m.group(1), **kw)
    if m := _SSTORE.match(body):
        _check_names([m.group(3)], line, col)
        return StaticStore(m.group(1), m.group(2), m.group(3), **kw)
    if m := _SLOAD.match(body):
        _check_names([m.group(1)], line, col)
        return StaticLoad(m.group(1), m.group(2), m.group(3), **kw)
    if m := _FSTORE.match(body):
        _check_names([m.group(1), m.group(3)], line, col)
        return FieldStore(m.group(1), m.group(2), m.group(3), **kw)
    if m := _FLOAD.match(body):
        _check_names([m.group(1), m.group(2)], line, col)
        return FieldLoad(m.group(1), m.group(2), m.group(3), **kw)
    if m := _ASTORE.match(body):
        _check_names([m.group(1), m.group(3)], line, col)
        return ArrayStore(m.group(1), int(m.group(2)), m.group(3), **kw)
    if m := _ALOAD.match(body):
        _check_names([m.group(1), m.group(2)], line, col)
        return ArrayLoad(m.group(1), m.group(2), int(m.group(3)), **kw)
    if m := _CONST.match(body):
        _check_names([m.group(1)], line, col)
        return ConstAssign(m.group(1), int(m.group(2)), **kw)
    if m := _BINOP.match(body):
        target, source, op, value = m.groups()
        _check_names([target, source], line, col)
        if op == "/" and int(value) == 0:
            raise ParseError("division by zero literal", line, col)
        return Binop(target, source, op, int(value), **kw)
    if m := _NONLIN.match(body):
        target, left, op, right = m.groups()
        if _is_int(left) and _is_int(right):
            raise ParseError("constant expression: fold it to a single literal", line, col)
        if _is_int(left) or not allow_nonlinear:
            # ``3 + x`` is not in normalized form either
            raise ParseError("non-linear binop", line, col)
        _check_names([target, left, right], line, col)
        return NonLinearBinop(target, left, op, right, **kw)
    if m := _COPY.match(body):
        _check_names(m.groups(), line, col)
        return LocalCopy(m.group(1), m.group(2), **kw)
    raise ParseError(f"cannot parse statement {body!r}", line, col)


def _parse_expect(text: str, line: int, col: int):
    m = _EXPECT.match(text)
    if not m:
        raise ParseError(f"malformed expectation {text!r}", line, col)
    symbol, raw = m.groups()
    if raw in ("top", "bottom"):
        return symbol, raw
    if _is_int(raw):
        return symbol, int(raw)
    raise ParseError(f"bad expected value {raw!r}", line, col)


def parse_program(text: str, *, allow_nonlinear: bool = False) -> Program:
    """Parse IR text into a :class:`Program`.

    With ``allow_nonlinear`` a two-variable binop becomes a
    :class:`NonLinearBinop` statement rather than a syntax error.
    """
    procedures: dict[str, Procedure] = {}
    expectations: list[Expectation] = []
    header_lines: dict[str, int] = {}
    current: Optional[dict] = None

    def finish(cur: dict) -> None:
        stmts: list[Statement] = cur["stmts"]
        if (not stmts or not isinstance(stmts[-1], (Return, Goto))
                or not any(isinstance(st, Return) for st in stmts)):
            stmts.append(Return(None, sid=len(stmts) + 1, proc=cur["name"], line=cur["end"]))
        for stmt in stmts:
            if isinstance(stmt, (Branch, Goto)) and stmt.label not in cur["labels"]:
                raise ParseError(f"unresolved label {stmt.label!r}", stmt.line, 1)
        procedures[cur["name"]] = Procedure(cur["name"], cur["params"], tuple(stmts),
                                            dict(cur["labels"]))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        code, _, comment = raw.partition("//")
        comment = comment.strip()
        body = code.strip()
        col = len(code) - len(code.lstrip()) + 1
        if body:
            if current is None:
                m = _PROC.match(body)
                if not m:
                    raise ParseError(f"expected procedure header, got {body!r}", lineno, col)
                name = m.group(1)
                _check_names([name], lineno, col)
                if name in procedures or (current and current["name"] == name):
                    raise ParseError(f"duplicate procedure {name!r}", lineno, col)
                params = _parse_args(m.group(2), lineno, col)
                if len(set(params)) != len(params):
                    raise ParseError(f"duplicate parameter in {name!r}", lineno, col)
                header_lines[name] = lineno
                current = {"name": name, "params": params, "stmts": [], "labels": {}}
            elif body == "}":
                current["end"] = lineno
                finish(current)
                current = None
            else:
                sid = len(current["stmts"]) + 1
                stmt = _parse_statement(body, current["name"], sid, lineno, col, allow_nonlinear)
                if isinstance(stmt, Label):
                    if stmt.name in current["labels"]:
                        raise ParseError(f"duplicate label {stmt.name!r}", lineno, col)
                    current["labels"][stmt.name] = sid
                current["stmts"].append(stmt)
        if comment.startswith("expect"):
            ccol = raw.index("//") + 1
            if current is None or not current["stmts"]:
                raise ParseError("expectation without a preceding statement", lineno, ccol)
            symbol, value = _parse_expect(comment, lineno, ccol)
            expectations.append(Expectation(current["name"], len(current["stmts"]),
                                            symbol, value, lineno))
    if current is not None:
        raise ParseError(f"procedure {current['name']!r} is not closed", len(text.splitlines()), 1)

    for proc in procedures.values():
        for stmt in proc.statements:
            if isinstance(stmt, Call) and stmt.callee not in procedures:
                raise ParseError(f"unknown callee {stmt.callee!r}", stmt.line, 1)
            if isinstance(stmt, Call) and len(stmt.args) != len(procedures[stmt.callee].params):
                raise ParseError(
                    f"call to {stmt.callee!r} passes {len(stmt.args)} arguments, "
                    f"expected {len(procedures[stmt.callee].params)}", stmt.line, 1)
    return Program(procedures, tuple(expectations))


# ---------------------------------------------------------------------------
# Printer


def format_statement(stmt: Statement) -> str:
    match stmt:
        case ConstAssign(target=t, value=v):
            return f"{t} = {v}"
        case Binop(target=t, source=s, op=op, value=v):
            return f"{t} = {s} {op} {v}"
        case NonLinearBinop(target=t, left=a, op=op, right=b):
            return f"{t} = {a} {op} {b}"
        case LocalCopy(target=t, source=s):
            return f"{t} = {s}"
        case FieldLoad(target=t, base=b, field=f):
            return f"{t} = {b}.{f}"
        case FieldStore(base=b, field=f, source=s):
            return f"{b}.{f} = {s}"
        case StaticLoad(target=t, cls=c, field=f):
            return f"{t} = @{c}.{f}"
        case StaticStore(cls=c, field=f, source=s):
            return f"@{c}.{f} = {s}"
        case ArrayLoad(target=t, base=b, index=i):
            return f"{t} = {b}[{i}]"
        case ArrayStore(base=b, index=i, source=s):
            return f"{b}[{i}] = {s}"
        case New(target=t):
            return f"{t} = new"
        case Call(target=t, callee=c, args=args):
            call = f"call {c}({', '.join(args)})"
            return f"{t} = {call}" if t else call
        case Return(value=v):
            return f"return {v}" if v else "return"
        case Branch(cond=c, label=lab):
            return f"if {c or '*'} goto {lab}"
        case Goto(label=lab):
            return f"goto {lab}"
        case Label(name=n):
            return f"{n}:"
        case Nop():
            return "nop"
    raise TypeError(f"unknown statement {stmt!r}")


def format_program(program: Program) -> str:
    out = []
    for proc in program:
        out.append(f"proc {proc.name}({', '.join(proc.params)}) {{")
        for stmt in proc.statements:
            out.append(f"  {format_statement(stmt)}")
        out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Control flow


@dataclass(frozen=True)
class CFG:
    """Intraprocedural control-flow graph over node positions."""

    proc: Procedure
    succ: tuple[tuple[int, ...], ...]
    pred: tuple[tuple[int, ...], ...]
    dead: frozenset[int]

    def successors(self, pos: int) -> tuple[int, ...]:
        return self.succ[pos]

    def predecessors(self, pos: int) -> tuple[int, ...]:
        return self.pred[pos]

    def edges(self) -> Iterator[tuple[int, int]]:
        for src, targets in enumerate(self.succ):
            for dst in targets:
                yield src, dst


def statement_successors(proc: Procedure, pos: int) -> tuple[int, ...]:
    if pos == 0:
        return (1,)
    if pos == proc.exit:
        return ()
    stmt = proc.statements[pos - 1]
    if isinstance(stmt, Goto):
        return (proc.labels[stmt.label],)
    if isinstance(stmt, Branch):
        target = proc.labels[stmt.label]
        return (pos + 1,) if target == pos + 1 else (pos + 1, target)
    if isinstance(stmt, Return):
        return (proc.exit,)
    return (pos + 1,)


def build_cfg(proc: Procedure) -> CFG:
    n = proc.node_count
    succ = tuple(statement_successors(proc, pos) for pos in range(n))
    preds: list[list[int]] = [[] for _ in range(n)]
    for src, targets in enumerate(succ):
        for dst in targets:
            preds[dst].append(src)
    seen = {0}
    stack = [0]
    while stack:
        for nxt in succ[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    dead = frozenset(pos for pos in range(n) if pos not in seen)
    return CFG(proc, succ, tuple(tuple(p) for p in preds), dead)


@dataclass
class UseLists:
    """Syntactic use-lists: for every name a statement mentions, the
    positions mentioning it, in increasing order.

    Locals are keyed by their name. Heap locations get tuple keys so that a
    store through any base can be found from the field alone:
    ``(".", field)``, ``("[]", index)`` and ``("@", cls, field)``. Every
    ``return`` also mentions ``$ret``. ``by_type`` lists positions per
    statement class.
    """

    proc: Procedure
    mentions: dict
    by_type: dict

    def get(self, key) -> list[int]:
        return self.mentions.get(key, [])

    def of_type(self, *types) -> list[int]:
        if len(types) == 1:
            return self.by_type.get(types[0], [])
        return sorted(pos for t in types for pos in self.by_type.get(t, ()))


def _mention_keys(stmt: Statement) -> tuple:
    t = type(stmt)
    if t is ConstAssign or t is New:
        return (stmt.target,)
    if t is Binop or t is LocalCopy:
        return (stmt.target, stmt.source)
    if t is NonLinearBinop:
        return (stmt.target, stmt.left, stmt.right)
    if t is FieldLoad:
        return (stmt.target, stmt.base, (".", stmt.field))
    if t is FieldStore:
        return (stmt.base, stmt.source, (".", stmt.field))
    if t is ArrayLoad:
        return (stmt.target, stmt.base, ("[]", stmt.index))
    if t is ArrayStore:
        return (stmt.base, stmt.source, ("[]", stmt.index))
    if t is StaticLoad:
        return (stmt.target, ("@", stmt.cls, stmt.field))
    if t is StaticStore:
        return (stmt.source, ("@", stmt.cls, stmt.field))
    if t is Call:
        return stmt.args + ((stmt.target,) if stmt.target else ())
    if t is Return:
        return ("$ret", stmt.value) if stmt.value else ("$ret",)
    if t is Branch and stmt.cond:
        return (stmt.cond,)
    return ()


def build_use_lists(proc: Procedure) -> UseLists:
    mentions: dict = {}
    by_type: dict = {}
    for stmt in proc.statements:
        pos = stmt.sid
        by_type.setdefault(type(stmt), []).append(pos)
        for key in _mention_keys(stmt):
            got = mentions.get(key)
            if got is None:
                mentions[key] = [pos]
            elif got[-1] != pos:
                got.append(pos)
    return UseLists(proc, mentions, by_type)


class Supergraph:
    """Interprocedural CFG: per-procedure CFGs plus call/return wiring."""

    def __init__(self, program: Program, entries):
        entries = tuple(entries)
        if not entries:
            raise ValueError("at least one entry procedure is required")
        for name in entries:
            if name not in program.procedures:
                raise KeyError(f"unknown entry procedure {name!r}")
        self.program = program
        self.entries = entries
        self.cfgs = {p.name: build_cfg(p) for p in program}
        self.uses = {p.name: build_use_lists(p) for p in program}
        # call node -> callee; callee -> call nodes
        self.callee_of: dict[tuple[str, int], str] = {}
        self.callers: dict[str, list[tuple[str, int]]] = {p.name: [] for p in program}
        for proc in program:
            for stmt in proc.statements:
                if isinstance(stmt, Call):
                    node = (proc.name, stmt.sid)
                    self.callee_of[node] = stmt.callee
                    self.callers[stmt.callee].append(node)
        reach = set(entries)
        stack = list(entries)
        while stack:
            for stmt in program[stack.pop()].statements:
                if isinstance(stmt, Call) and stmt.callee not in reach:
                    reach.add(stmt.callee)
                    stack.append(stmt.callee)
        self.reachable = frozenset(reach)
        self.unreachable = frozenset(p.name for p in program if p.name not in reach)

    def procedure(self, name: str) -> Procedure:
        return self.program[name]

    def return_site(self, call: tuple[str, int]) -> tuple[str, int]:
        return (call[0], call[1] + 1)

    def call_edges(self) -> Iterator[tuple[tuple[str, int], tuple[str, int]]]:
        for call, callee in self.callee_of.items():
            yield call, (callee, 0)

    def return_edges(self) -> Iterator[tuple[tuple[str, int], tuple[str, int]]]:
        for call, callee in self.callee_of.items():
            yield (callee, self.program[callee].exit), self.return_site(call)

    def call_to_return_edges(self) -> Iterator[tuple[tuple[str, int], tuple[str, int]]]:
        for call in self.callee_of:
            yield call, self.return_site(call)


def build_supergraph(program: Program, entries) -> Supergraph:
    return Supergraph(program, entries)
