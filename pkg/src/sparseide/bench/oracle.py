"""All-paths concrete interpreter used as an independent correctness oracle.

Every branch is taken both ways, every path is executed concretely, and the
environment seen before each node is met pointwise over all paths. On
loop-free programs this is the meet-over-all-paths solution, which the IDE
solvers must reproduce exactly for this distributive client.

Uninitialized locals and fields read as ``TOP``; locals that hold object
references carry no integer value and are reported as ``TOP`` as well.
"""

from __future__ import annotations

import itertools

from ..ir import (ArrayLoad, ArrayStore, Binop, Branch, Call, ConstAssign, FieldLoad,
                  FieldStore, Goto, LocalCopy, New, NonLinearBinop, Procedure, Program, Return,
                  StaticLoad, StaticStore, build_cfg)
from ..lcp.symbols import RET, array_elem, field_ap, local, static_field
from ..lcp.values import BOTTOM, INT_MAX, INT_MIN, TOP, eval_binop, meet_value
from .corpus import has_cycle


class OracleError(ValueError):
    """The program is outside what the oracle can enumerate."""


class _Obj:
    __slots__ = ("ident",)
    _ids = itertools.count()

    def __init__(self):
        self.ident = next(self._ids)


class _State:
    __slots__ = ("frame", "heap", "statics")

    def __init__(self, frame, heap, statics):
        self.frame = frame
        self.heap = heap
        self.statics = statics

    def clone(self) -> "_State":
        return _State(dict(self.frame), {o: dict(f) for o, f in self.heap.items()},
                      dict(self.statics))


class OracleResult:
    def __init__(self, values: dict):
        self.values = values

    def get(self, node, d):
        return self.values.get((node, d), TOP)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.values.items() if v is not TOP}


def _int(v):
    return v if isinstance(v, int) or v is BOTTOM else TOP


def oracle_interpret(program: Program, entry: str = "main", max_depth: int = 8,
                     max_paths: int = 100_000) -> OracleResult:
    """Meet over all paths of the concrete semantics, per (node, symbol)."""
    for proc in program:
        for stmt in proc.statements:
            if isinstance(stmt, NonLinearBinop):
                raise OracleError(f"non-linear statement in {proc.name} at {stmt.sid}")
        if has_cycle(build_cfg(proc).succ):
            raise OracleError(f"procedure {proc.name} has a loop")
    values: dict = {}
    paths = [0]

    def record(proc: Procedure, pos: int, st: _State) -> None:
        node = (proc.name, pos)
        name = proc.name
        seen = {}
        for var, v in st.frame.items():
            if isinstance(v, _Obj):
                for key, fv in st.heap.get(v, {}).items():
                    if isinstance(key, tuple):
                        seen[array_elem(name, var, key[1])] = _int(fv)
                    else:
                        seen[field_ap(name, var, key)] = _int(fv)
            else:
                seen[local(name, var)] = _int(v)
        for (cls, fld), v in st.statics.items():
            seen[static_field(cls, fld)] = _int(v)
        for sym, v in seen.items():
            if v is TOP:
                continue
            key = (node, sym)
            values[key] = meet_value(values.get(key, TOP), v)

    def arith(op, v, c):
        if not isinstance(v, int):
            return v if v is BOTTOM else TOP
        r = eval_binop(op, v, c)
        return r if INT_MIN <= r <= INT_MAX else BOTTOM

    def run(proc: Procedure, pos: int, st: _State, depth: int):
        """Yield the state at ``proc``'s exit for every path from ``pos``."""
        frame = st.frame
        while True:
            record(proc, pos, st)
            if pos == proc.exit:
                paths[0] += 1
                if paths[0] > max_paths:
                    raise OracleError("too many paths")
                yield st
                return
            if pos == 0:
                pos = 1
                continue
            stmt = proc.statements[pos - 1]
            t = type(stmt)
            if t is Branch:
                target = proc.labels[stmt.label]
                yield from run(proc, pos + 1, st.clone(), depth)
                if target != pos + 1:
                    yield from run(proc, target, st.clone(), depth)
                return
            if t is Goto:
                pos = proc.labels[stmt.label]
                continue
            if t is Return:
                if stmt.value is not None:
                    frame[RET] = frame.get(stmt.value, TOP)
                pos = proc.exit
                continue
            if t is Call:
                if depth >= max_depth:
                    raise OracleError("call depth bound exceeded")
                callee = program[stmt.callee]
                inner = _State({p: frame.get(a, TOP) for a, p in zip(stmt.args, callee.params)},
                               st.heap, st.statics)
                for out in run(callee, 0, inner.clone(), depth + 1):
                    after = _State(dict(frame), out.heap, out.statics)
                    if stmt.target:
                        after.frame[stmt.target] = out.frame.get(RET, TOP)
                    yield from run(proc, pos + 1, after.clone(), depth)
                return
            if t is ConstAssign:
                frame[stmt.target] = stmt.value
            elif t is Binop:
                frame[stmt.target] = arith(stmt.op, frame.get(stmt.source, TOP), stmt.value)
            elif t is LocalCopy:
                frame[stmt.target] = frame.get(stmt.source, TOP)
            elif t is New:
                obj = _Obj()
                st.heap[obj] = {}
                frame[stmt.target] = obj
            elif t is FieldStore or t is ArrayStore:
                obj = frame.get(stmt.base)
                key = stmt.field if t is FieldStore else ("[]", stmt.index)
                if isinstance(obj, _Obj):
                    st.heap[obj][key] = frame.get(stmt.source, TOP)
            elif t is FieldLoad or t is ArrayLoad:
                obj = frame.get(stmt.base)
                key = stmt.field if t is FieldLoad else ("[]", stmt.index)
                frame[stmt.target] = (st.heap[obj].get(key, TOP)
                                      if isinstance(obj, _Obj) else TOP)
            elif t is StaticStore:
                st.statics[(stmt.cls, stmt.field)] = frame.get(stmt.source, TOP)
            elif t is StaticLoad:
                frame[stmt.target] = st.statics.get((stmt.cls, stmt.field), TOP)
            pos += 1

    if entry not in program.procedures:
        raise KeyError(f"unknown entry procedure {entry!r}")
    for _ in run(program[entry], 0, _State({}, {}, {}), 0):
        pass
    return OracleResult(values)
