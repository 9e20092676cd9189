"""Linear constant propagation and a binary-domain taint client.

Both clients share one gen/kill shape for flow functions; they differ only
in edge functions. The taint client is the IFDS-as-IDE instance: a fact
holding at a node maps to ``BOTTOM`` ("reached") and every edge function
apart from generation is the identity.
"""

from __future__ import annotations

from ..ir import (ArrayLoad, ArrayStore, Binop, Call, ConstAssign, FieldLoad, FieldStore,
                  LocalCopy, NonLinearBinop, Procedure, Program, Return, StaticLoad,
                  StaticStore, Statement, UseLists, assigned_locals)
from ..solver import ProblemDefinition
from . import values as V
from .aliases import AliasResolver
from .symbols import (ARRAY, FIELD, LOCAL, STATIC, ZERO, Symbol, array_elem, field_ap, local,
                      ret_symbol, static_field)

NORMAL = "normal"
CALL = "call"
RETURN = "return"
CALL_TO_RETURN = "call-to-return"

_EMPTY = frozenset()
EDGE_KINDS = (NORMAL, CALL, RETURN, CALL_TO_RETURN)


def _merge(a: list[int], b: list[int]) -> list[int]:
    return sorted(set(a).union(b))


class _SharedFlows(ProblemDefinition):
    """Flow functions and relevance common to both clients."""

    zero = ZERO
    chain_height = V.CHAIN_HEIGHT
    top = V.TOP
    bottom = V.BOTTOM
    all_top = V.ALL_TOP
    identity = V.IDENTITY
    #: whether edge functions carry integer values (False for taint)
    tracks_values = True

    def __init__(self, program: Program, aliases: AliasResolver | None = None):
        self.program = program
        self.aliases = aliases or AliasResolver(program)
        self._assigned: dict[str, frozenset[str]] = {}
        self._relevance: dict[tuple[str, int], tuple[frozenset, frozenset]] = {}
        self._normal: dict = {}

    # -- lattice and family ---------------------------------------------------

    def meet_value(self, l1, l2):
        return V.meet_value(l1, l2)

    def compose(self, f1, f2):
        return V.compose(f1, f2)

    def meet_edge(self, f1, f2):
        return V.meet_edge(f1, f2)

    def apply(self, f, l):
        return f.apply(l)

    # -- helpers --------------------------------------------------------------

    def assigned_in(self, proc: str) -> frozenset[str]:
        got = self._assigned.get(proc)
        if got is None:
            got = assigned_locals(self.program[proc].statements)
            self._assigned[proc] = got
        return got

    def store_targets(self, stmt: Statement) -> frozenset[Symbol]:
        p = stmt.proc
        if isinstance(stmt, FieldStore):
            return frozenset(field_ap(p, q, stmt.field) for q in self.aliases.aliases(p, stmt.base))
        if isinstance(stmt, ArrayStore):
            return frozenset(array_elem(p, q, stmt.index)
                             for q in self.aliases.aliases(p, stmt.base))
        if isinstance(stmt, StaticStore):
            return frozenset((static_field(stmt.cls, stmt.field),))
        return _EMPTY

    def _copy_like(self, stmt: Statement):
        """``(source symbol, target symbol)`` for copies, loads and linear binops."""
        p = stmt.proc
        t = type(stmt)
        if t is LocalCopy or t is Binop:
            return local(p, stmt.source), local(p, stmt.target)
        if t is FieldLoad:
            return field_ap(p, stmt.base, stmt.field), local(p, stmt.target)
        if t is ArrayLoad:
            return array_elem(p, stmt.base, stmt.index), local(p, stmt.target)
        if t is StaticLoad:
            return static_field(stmt.cls, stmt.field), local(p, stmt.target)
        if t is Return and stmt.value:
            return local(p, stmt.value), ret_symbol(p)
        return None

    # -- normal flow ------------------------------------------------------------

    def gen_edge(self, stmt: Statement):
        """Edge function of a Λ-generation edge."""
        raise NotImplementedError

    def transfer_edge(self, stmt: Statement, d: Symbol, d2: Symbol):
        """Edge function of a non-Λ edge produced by ``normal_flow``."""
        raise NotImplementedError

    def normal_flow(self, stmt: Statement, d: Symbol):
        return [d2 for d2, _ in self.normal_targets(stmt, d)]

    def normal_edge(self, stmt: Statement, d1: Symbol, d2: Symbol):
        for t, f in self.normal_targets(stmt, d1):
            if t == d2:
                return f
        return V.ALL_TOP

    def normal_targets(self, stmt: Statement, d: Symbol):
        key = (stmt.proc, stmt.sid, d)
        out = self._normal.get(key)
        if out is None:
            out = self._compute_normal(stmt, d)
            self._normal[key] = out
        return out

    def _compute_normal(self, stmt: Statement, d: Symbol):
        I = V.IDENTITY
        t = type(stmt)
        p = stmt.proc
        if t is ConstAssign:
            target = local(p, stmt.target)
            if d == ZERO:
                return ((ZERO, I), (target, self.gen_edge(stmt)))
            if d == target:
                return ((d, self.transfer_edge(stmt, d, d)),)
            return ((d, I),)
        if t is NonLinearBinop:
            target = local(p, stmt.target)
            ops = (local(p, stmt.left), local(p, stmt.right))
            if d in ops:
                if d == target:
                    return ((d, self.transfer_edge(stmt, d, d)),)
                return ((d, I), (target, self.transfer_edge(stmt, d, target)))
            if d == target:
                return ()
            return ((d, I),)
        pair = self._copy_like(stmt)
        if pair is not None:
            src, target = pair
            if d == src:
                if src == target:
                    return ((d, self.transfer_edge(stmt, d, d)),)
                return ((d, I), (target, self.transfer_edge(stmt, d, target)))
            if d == target:
                return ()
            return ((d, I),)
        if t is FieldStore or t is ArrayStore or t is StaticStore:
            src = local(p, stmt.source)
            targets = self.store_targets(stmt)
            if d == src:
                return ((d, I),) + tuple((q, I) for q in sorted(targets))
            if d in targets:
                return ()
            return ((d, I),)
        return ((d, I),)

    # -- relevance ----------------------------------------------------------------

    def _flow_relevance(self, stmt: Statement):
        """Symbols whose gen/kill behaviour differs from the identity."""
        rule = _FLOW_RELEVANCE.get(type(stmt))
        return rule(self, stmt) if rule else (_EMPTY, _EMPTY)

    def _value_relevance(self, stmt: Statement):
        return _EMPTY, _EMPTY

    def relevance(self, stmt: Statement) -> tuple[frozenset, frozenset]:
        key = (stmt.proc, stmt.sid)
        got = self._relevance.get(key)
        if got is None:
            fr, fw = self._flow_relevance(stmt)
            vr, vw = self._value_relevance(stmt)
            if not (vr or vw):
                got = (fr, fw)
            elif not (fr or fw):
                got = (vr, vw)
            else:
                got = (fr | vr, fw | vw)
            self._relevance[key] = got
        return got

    def reads(self, stmt: Statement) -> frozenset:
        return self.relevance(stmt)[0]

    def writes(self, stmt: Statement) -> frozenset:
        return self.relevance(stmt)[1]

    def is_generator(self, stmt: Statement) -> bool:
        return type(stmt) is ConstAssign

    def candidate_positions(self, uses: UseLists, d: Symbol):
        k = d.kind
        if k == LOCAL:
            return uses.get(d.name)
        if k == FIELD:
            return _merge(uses.get(d.name), uses.get((".", d.member)))
        if k == ARRAY:
            return _merge(uses.get(d.name), uses.get(("[]", d.member)))
        if k == STATIC:
            return uses.get(("@", d.name, d.member))
        return ()

    def generator_candidates(self, uses: UseLists):
        return uses.of_type(ConstAssign)

    def call_affects(self, call: Call, d: Symbol) -> bool:
        if d == ZERO or d.kind in (FIELD, STATIC, ARRAY):
            return True
        return d in self.reads(call) or d in self.writes(call)

    def flow_function(self, kind: str, stmt: Statement, d: Symbol, callee: Procedure | None = None):
        """Flow function by edge kind, for callers that do not care about edges."""
        if kind not in EDGE_KINDS:
            raise ValueError(f"unknown edge kind {kind!r}")
        if kind == NORMAL:
            return set(self.normal_flow(stmt, d))
        callee = callee or self.program[stmt.callee]
        if kind == CALL:
            return set(self.call_flow(stmt, callee, d))
        if kind == RETURN:
            return set(self.return_flow(stmt, callee, d))
        if kind == CALL_TO_RETURN:
            return set(self.call_to_return_flow(stmt, d))
        raise ValueError(f"unknown edge kind {kind!r}")

    def edge_function(self, kind: str, stmt: Statement, d_in: Symbol, d_out: Symbol,
                      callee: Procedure | None = None):
        if kind not in EDGE_KINDS:
            raise ValueError(f"unknown edge kind {kind!r}")
        if kind == NORMAL:
            return self.normal_edge(stmt, d_in, d_out)
        callee = callee or self.program[stmt.callee]
        if kind == CALL:
            return self.call_edge(stmt, callee, d_in, d_out)
        if kind == RETURN:
            return self.return_edge(stmt, callee, d_in, d_out)
        if kind == CALL_TO_RETURN:
            return self.call_to_return_edge(stmt, d_in, d_out)
        raise ValueError(f"unknown edge kind {kind!r}")

    # -- interprocedural flows -------------------------------------------------

    def routed_args(self, call: Call) -> frozenset[str]:
        """Actuals whose value comes back through an unmodified formal."""
        callee = self.program[call.callee]
        modified = self.assigned_in(callee.name)
        ok: dict[str, bool] = {}
        for a, formal in zip(call.args, callee.params):
            ok[a] = ok.get(a, True) and formal not in modified
        return frozenset(a for a, good in ok.items() if good and a != call.target)

    def _heap_bound(self, call: Call, d: Symbol) -> list[int]:
        """Argument positions through which heap symbol ``d`` is reachable."""
        al = self.aliases
        return [i for i, a in enumerate(call.args) if d.name in al.aliases(call.proc, a)]

    def call_flow(self, call: Call, callee: Procedure, d: Symbol):
        if d == ZERO:
            return [ZERO]
        out = []
        if d.kind == LOCAL:
            for a, formal in zip(call.args, callee.params):
                if a == d.name:
                    out.append(local(callee.name, formal))
        elif d.kind == STATIC:
            out.append(d)
        else:
            for i in self._heap_bound(call, d):
                out.append(d.rebase(callee.name, callee.params[i]))
        return list(dict.fromkeys(out))

    def call_edge(self, call, callee, d1, d2):
        return V.IDENTITY

    def return_flow(self, call: Call, callee: Procedure, d: Symbol):
        if d == ZERO:
            return [ZERO]
        p = call.proc
        out = []
        if d.kind == LOCAL:
            if d.name == "$ret":
                if call.target:
                    out.append(local(p, call.target))
            elif d.name in callee.params and d.name not in self.assigned_in(callee.name):
                routed = self.routed_args(call)
                for a, formal in zip(call.args, callee.params):
                    if formal == d.name and a in routed:
                        out.append(local(p, a))
        elif d.kind == STATIC:
            out.append(d)
        else:
            for a, formal in zip(call.args, callee.params):
                if formal == d.name:
                    out.extend(d.rebase(p, q) for q in sorted(self.aliases.aliases(p, a)))
        return list(dict.fromkeys(out))

    def return_edge(self, call, callee, d1, d2):
        return V.IDENTITY

    def call_to_return_flow(self, call: Call, d: Symbol):
        if d == ZERO:
            return [ZERO]
        if d.kind == LOCAL:
            if d.name == call.target or d.name in self.routed_args(call):
                return []
            return [d]
        if d.kind == STATIC:
            return []
        if self._heap_bound(call, d):
            return []
        return [d]

    def call_to_return_edge(self, call, d1, d2):
        return V.IDENTITY

    # combined helpers with caching; calls are visited once per incoming fact
    def call_targets(self, call: Call, callee: Procedure, d: Symbol):
        key = (CALL, call.proc, call.sid, d)
        out = self._normal.get(key)
        if out is None:
            out = tuple((d2, V.IDENTITY) for d2 in self.call_flow(call, callee, d))
            self._normal[key] = out
        return out

    def return_targets(self, call: Call, callee: Procedure, d: Symbol):
        key = (RETURN, call.proc, call.sid, d)
        out = self._normal.get(key)
        if out is None:
            out = tuple((d2, V.IDENTITY) for d2 in self.return_flow(call, callee, d))
            self._normal[key] = out
        return out

    def call_to_return_targets(self, call: Call, d: Symbol):
        key = (CALL_TO_RETURN, call.proc, call.sid, d)
        out = self._normal.get(key)
        if out is None:
            out = tuple((d2, V.IDENTITY) for d2 in self.call_to_return_flow(call, d))
            self._normal[key] = out
        return out


def _rel_copy(problem: _SharedFlows, stmt):
    src, target = problem._copy_like(stmt)
    if src == target:
        return _EMPTY, _EMPTY
    return frozenset((src,)), frozenset((target,))


def _rel_local_copy(problem: _SharedFlows, stmt):
    # LocalCopy and Binop, inlined since they dominate real code
    if stmt.source == stmt.target:
        return _EMPTY, _EMPTY
    p = stmt.proc
    return frozenset((local(p, stmt.source),)), frozenset((local(p, stmt.target),))


def _rel_nonlinear(problem: _SharedFlows, stmt):
    p = stmt.proc
    target = local(p, stmt.target)
    ops = frozenset((local(p, stmt.left), local(p, stmt.right)))
    return ops - {target}, _EMPTY if target in ops else frozenset((target,))


def _rel_store(problem: _SharedFlows, stmt):
    return frozenset((local(stmt.proc, stmt.source),)), problem.store_targets(stmt)


def _rel_call(problem: _SharedFlows, stmt):
    p = stmt.proc
    reads = frozenset(local(p, a) for a in stmt.args)
    writes = frozenset((local(p, stmt.target),)) if stmt.target else _EMPTY
    return reads, writes


def _rel_return(problem: _SharedFlows, stmt):
    return _rel_copy(problem, stmt) if stmt.value else (_EMPTY, _EMPTY)


_FLOW_RELEVANCE = {
    LocalCopy: _rel_local_copy,
    Binop: _rel_local_copy,
    FieldLoad: _rel_copy,
    ArrayLoad: _rel_copy,
    StaticLoad: _rel_copy,
    Return: _rel_return,
    NonLinearBinop: _rel_nonlinear,
    FieldStore: _rel_store,
    ArrayStore: _rel_store,
    StaticStore: _rel_store,
    Call: _rel_call,
}


class LinearConstantPropagation(_SharedFlows):
    """Linear constant propagation over the flat integer lattice."""

    name = "lcp"

    def gen_edge(self, stmt):
        return V.Constant(stmt.value)

    def transfer_edge(self, stmt, d, d2):
        t = type(stmt)
        if t is ConstAssign:
            return V.Constant(stmt.value)
        if t is Binop:
            return V.binop_edge(stmt.op, stmt.value)
        if t is NonLinearBinop:
            return V.ALL_BOTTOM
        return V.IDENTITY

    def _value_relevance(self, stmt):
        p = stmt.proc
        t = type(stmt)
        if t is ConstAssign:
            return _EMPTY, frozenset((local(p, stmt.target),))
        if t is Binop and stmt.target == stmt.source:
            a = frozenset((local(p, stmt.target),))
            return (_EMPTY, _EMPTY) if V.binop_edge(stmt.op, stmt.value) is V.IDENTITY else (a, a)
        if t is NonLinearBinop:
            target = local(p, stmt.target)
            ops = {local(p, stmt.left), local(p, stmt.right)}
            if target in ops:
                return frozenset(ops), frozenset((target,))
        return _EMPTY, _EMPTY


class TaintAnalysis(_SharedFlows):
    """Reachability with values {⊤, ⊥}: ``BOTTOM`` marks a reached fact."""

    name = "taint"
    tracks_values = False

    def gen_edge(self, stmt):
        return V.ALL_BOTTOM

    def transfer_edge(self, stmt, d, d2):
        return V.IDENTITY


def lcp_problem(program: Program) -> LinearConstantPropagation:
    return LinearConstantPropagation(program)


def taint_problem(program: Program) -> TaintAnalysis:
    return TaintAnalysis(program)


def make_problem(client: str, program: Program) -> ProblemDefinition:
    if client == "lcp":
        return LinearConstantPropagation(program)
    if client == "taint":
        return TaintAnalysis(program)
    raise ValueError(f"unknown client {client!r}")
