"""Dense IDE solver: jump/summary tabulation and value computation.

The problem definition supplies flow functions (sets of facts) and edge
functions (lattice transformers) per supergraph edge kind. The solver is
agnostic to the concrete fact and value types; it only relies on the
operations declared by :class:`ProblemDefinition`.

Tables are keyed by nodes ``(proc, pos)``. The jump table stores, per
node, a map ``(d2, d1) -> f`` for path edges ``<s_p, d1> -> <n, d2>``;
absent entries mean ``λl.⊤``.
"""

from __future__ import annotations

import logging
import time
from abc import ABC, abstractmethod
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, NamedTuple, Optional

from .ir import Call, Procedure, Statement, Supergraph, UseLists

log = logging.getLogger(__name__)

Node = tuple[str, int]
Fact = Hashable


class SolverGuardError(RuntimeError):
    """A path edge was lowered more often than the chain height allows."""


class ProblemDefinition(ABC):
    """Contract between the generic solvers and an analysis client."""

    #: the tautological fact Λ
    zero: Fact
    #: maximal length of a strictly descending chain of edge functions
    chain_height: int = 3

    # value lattice
    top = None
    bottom = None

    @abstractmethod
    def meet_value(self, l1, l2): ...

    # edge-function family
    all_top = None
    identity = None

    @abstractmethod
    def compose(self, f1, f2):
        """``f2 ∘ f1``: ``f1`` is applied first."""

    @abstractmethod
    def meet_edge(self, f1, f2): ...

    @abstractmethod
    def apply(self, f, l): ...

    # flow and edge functions per edge kind
    @abstractmethod
    def normal_flow(self, stmt: Statement, d: Fact) -> Iterable[Fact]: ...

    @abstractmethod
    def normal_edge(self, stmt: Statement, d1: Fact, d2: Fact): ...

    @abstractmethod
    def call_flow(self, call: Call, callee: Procedure, d: Fact) -> Iterable[Fact]: ...

    @abstractmethod
    def call_edge(self, call: Call, callee: Procedure, d1: Fact, d2: Fact): ...

    @abstractmethod
    def return_flow(self, call: Call, callee: Procedure, d: Fact) -> Iterable[Fact]: ...

    @abstractmethod
    def return_edge(self, call: Call, callee: Procedure, d1: Fact, d2: Fact): ...

    @abstractmethod
    def call_to_return_flow(self, call: Call, d: Fact) -> Iterable[Fact]: ...

    @abstractmethod
    def call_to_return_edge(self, call: Call, d1: Fact, d2: Fact): ...

    # relevance oracle, consumed by the sparse solver
    @abstractmethod
    def reads(self, stmt: Statement) -> frozenset: ...

    @abstractmethod
    def writes(self, stmt: Statement) -> frozenset: ...

    def relevance(self, stmt: Statement) -> tuple[frozenset, frozenset]:
        """``(reads(stmt), writes(stmt))`` in one call."""
        return self.reads(stmt), self.writes(stmt)

    def is_generator(self, stmt: Statement) -> bool:
        """Whether ``stmt`` can create new facts from Λ."""
        return False

    def call_affects(self, call: Call, d: Fact) -> bool:
        """Whether a call site must stay in the sparse CFG of ``d``."""
        return d == self.zero or d in self.reads(call) or d in self.writes(call)

    def candidate_positions(self, uses: UseLists, d: Fact) -> Iterable[int]:
        """Statement positions that may read or write ``d``.

        Any superset is correct; the sparse CFG builder filters it through
        :meth:`reads` and :meth:`writes`. The default is every statement.
        """
        return range(1, len(uses.proc.statements) + 1)

    def generator_candidates(self, uses: UseLists) -> Iterable[int]:
        """Positions that may satisfy :meth:`is_generator`; a superset is fine."""
        return range(1, len(uses.proc.statements) + 1)

    # combined transfer helpers; clients may override with faster versions
    def normal_targets(self, stmt: Statement, d: Fact):
        return tuple((d2, self.normal_edge(stmt, d, d2)) for d2 in self.normal_flow(stmt, d))

    def call_targets(self, call: Call, callee: Procedure, d: Fact):
        return tuple((d2, self.call_edge(call, callee, d, d2))
                     for d2 in self.call_flow(call, callee, d))

    def return_targets(self, call: Call, callee: Procedure, d: Fact):
        return tuple((d2, self.return_edge(call, callee, d, d2))
                     for d2 in self.return_flow(call, callee, d))

    def call_to_return_targets(self, call: Call, d: Fact):
        return tuple((d2, self.call_to_return_edge(call, d, d2))
                     for d2 in self.call_to_return_flow(call, d))


class PathEdge(NamedTuple):
    """``<s_p, d1> -> <n, d2>``; the start node is implied by ``n``."""

    d1: Fact
    node: Node
    d2: Fact

    @property
    def source(self) -> tuple[Node, Fact]:
        return (self.node[0], 0), self.d1

    @property
    def target(self) -> tuple[Node, Fact]:
        return self.node, self.d2


@dataclass
class Stats:
    propagations: int = 0
    phase1_ms: float = 0.0
    phase2_ms: float = 0.0
    jump_entries: int = 0
    summary_entries: int = 0
    sparse_cfg_count: int = 0
    sparse_cfg_ms: float = 0.0
    #: total node count over all sparse CFGs built
    sparse_retained: int = 0
    max_updates: int = 0

    @property
    def wall_ms(self) -> float:
        return self.phase1_ms + self.phase2_ms


class JumpTable:
    """Jump functions: node -> {(d2, d1): f}. Missing entries are ``λl.⊤``."""

    def __init__(self, all_top):
        self.all_top = all_top
        self.by_node: dict[Node, dict] = {}

    def get(self, d1, node: Node, d2):
        row = self.by_node.get(node)
        if row is None:
            return self.all_top
        return row.get((d2, d1), self.all_top)

    def entries_at(self, node: Node):
        """Yield ``(d2, d1, f)`` for every stored path edge ending at ``node``."""
        for (d2, d1), f in self.by_node.get(node, {}).items():
            yield d2, d1, f

    def sources(self, node: Node, d2):
        """Yield ``(d1, f)`` for path edges ending at ``<node, d2>``."""
        for (t, d1), f in self.by_node.get(node, {}).items():
            if t == d2:
                yield d1, f

    def facts_at(self, node: Node) -> set:
        return {d2 for d2, _ in self.by_node.get(node, {})}

    def __iter__(self):
        for node, row in self.by_node.items():
            for (d2, d1), f in row.items():
                yield PathEdge(d1, node, d2), f

    def __len__(self) -> int:
        return sum(len(row) for row in self.by_node.values())

    def as_dict(self) -> dict:
        return {edge: f for edge, f in self}


class SummaryTable:
    """Summary functions: call node -> d4 -> {d5: f}."""

    def __init__(self, all_top):
        self.all_top = all_top
        self.by_call: dict[Node, dict] = {}

    def get(self, call: Node, d4, d5):
        return self.by_call.get(call, {}).get(d4, {}).get(d5, self.all_top)

    def targets(self, call: Node, d4):
        return self.by_call.get(call, {}).get(d4, {})

    def __iter__(self):
        for call, rows in self.by_call.items():
            for d4, row in rows.items():
                for d5, f in row.items():
                    yield (call, d4, d5), f

    def __len__(self) -> int:
        return sum(len(row) for rows in self.by_call.values() for row in rows.values())


class IDESolver:
    """Phase I tabulation over the exploded supergraph, FIFO worklist."""

    def __init__(self, problem: ProblemDefinition, supergraph: Supergraph,
                 entries: Optional[Iterable[str]] = None):
        self.problem = problem
        self.sg = supergraph
        self.entries = tuple(entries) if entries is not None else supergraph.entries
        for name in self.entries:
            if name not in supergraph.program.procedures:
                raise KeyError(f"unknown entry procedure {name!r}")
        self.jump = JumpTable(problem.all_top)
        self.summary = SummaryTable(problem.all_top)
        self.stats = Stats()
        self.worklist: deque = deque()
        # (callee, d3) -> {(call, d2): f_call}
        self.incoming: dict = defaultdict(dict)
        # (callee, d1) -> {d_exit: f}
        self.end_summary: dict = defaultdict(dict)
        self._updates: dict = {}
        self._flow_cache: dict = {}
        self._succ: dict = {}
        self._procs = supergraph.program.procedures

    # -- Propagate ----------------------------------------------------------

    def propagate(self, d1, node: Node, d2, f) -> bool:
        row = self.jump.by_node.get(node)
        if row is None:
            row = self.jump.by_node[node] = {}
        key = (d2, d1)
        old = row.get(key, self.problem.all_top)
        new = self.problem.meet_edge(f, old)
        if new == old:
            return False
        edge = (d1, node, d2)
        count = self._updates.get(edge, 0) + 1
        if count > self.problem.chain_height:
            raise SolverGuardError(
                f"path edge <{node[0]}:entry, {d1}> -> <{node[0]}:{node[1]}, {d2}> "
                f"lowered {count} times, above chain height {self.problem.chain_height}; "
                f"last value {new!r}")
        self._updates[edge] = count
        row[key] = new
        self.worklist.append(edge)
        self.stats.propagations += 1
        return True

    # -- successors; the sparse solver overrides these two -------------------

    def intra_targets(self, node: Node, d) -> Iterable[Node]:
        out = self._succ.get(node)
        if out is None:
            out = tuple((node[0], m) for m in self.sg.cfgs[node[0]].succ[node[1]])
            self._succ[node] = out
        return out

    def call_result_targets(self, call: Node, d) -> Iterable[Node]:
        return (self.sg.return_site(call),)

    # -- main loop ------------------------------------------------------------

    def seed(self) -> None:
        zero = self.problem.zero
        for name in self.entries:
            self.propagate(zero, (name, 0), zero, self.problem.identity)

    def solve(self) -> "IDESolver":
        t0 = time.perf_counter()
        self.seed()
        wl = self.worklist
        procs = self._procs
        while wl:
            d1, node, d2 = wl.popleft()
            f = self.jump.by_node[node][(d2, d1)]
            proc = procs[node[0]]
            pos = node[1]
            if pos == proc.exit:
                self._process_exit(d1, node, d2, f)
            elif pos > 0 and type(proc.statements[pos - 1]) is Call:
                self._process_call(d1, node, d2, f, proc.statements[pos - 1])
            else:
                self._process_normal(d1, node, d2, f, proc)
        self.stats.phase1_ms += (time.perf_counter() - t0) * 1000
        self.stats.jump_entries = len(self.jump)
        self.stats.summary_entries = len(self.summary)
        self.stats.max_updates = max(self._updates.values(), default=0)
        return self

    def _normal(self, node: Node, proc: Procedure, d):
        key = (node, d)
        out = self._flow_cache.get(key)
        if out is None:
            pos = node[1]
            if pos == 0:
                out = ((d, self.problem.identity),)
            else:
                out = self.problem.normal_targets(proc.statements[pos - 1], d)
            self._flow_cache[key] = out
        return out

    def _process_normal(self, d1, node: Node, d2, f, proc: Procedure) -> None:
        compose = self.problem.compose
        for d3, e in self._normal(node, proc, d2):
            g = compose(f, e)
            for m in self.intra_targets(node, d3):
                self.propagate(d1, m, d3, g)

    def _process_call(self, d1, node: Node, d2, f, stmt: Call) -> None:
        problem = self.problem
        compose, meet = problem.compose, problem.meet_edge
        callee = self._procs[stmt.callee]
        start = (callee.name, 0)
        for d3, f_call in problem.call_targets(stmt, callee, d2):
            self.incoming[(callee.name, d3)][(node, d2)] = f_call
            self.propagate(d3, start, d3, problem.identity)
            for d4, f_end in list(self.end_summary.get((callee.name, d3), {}).items()):
                for d5, f_ret in problem.return_targets(stmt, callee, d4):
                    self._update_summary(node, d2, d5, compose(compose(f_call, f_end), f_ret))
        for d3, e in problem.call_to_return_targets(stmt, d2):
            g = compose(f, e)
            for r in self.call_result_targets(node, d3):
                self.propagate(d1, r, d3, g)
        for d3, f_sum in list(self.summary.targets(node, d2).items()):
            g = compose(f, f_sum)
            for r in self.call_result_targets(node, d3):
                self.propagate(d1, r, d3, g)

    def _update_summary(self, call: Node, d4, d5, f) -> Optional[object]:
        rows = self.summary.by_call.setdefault(call, {})
        row = rows.setdefault(d4, {})
        old = row.get(d5, self.problem.all_top)
        new = self.problem.meet_edge(f, old)
        if new == old:
            return None
        row[d5] = new
        return new

    def _process_exit(self, d1, node: Node, d2, f) -> None:
        problem = self.problem
        compose = problem.compose
        callee = self._procs[node[0]]
        self.end_summary[(callee.name, d1)][d2] = f
        for (call, d4), f_call in list(self.incoming.get((callee.name, d1), {}).items()):
            stmt = self._procs[call[0]].statements[call[1] - 1]
            for d5, f_ret in problem.return_targets(stmt, callee, d2):
                new = self._update_summary(call, d4, d5, compose(compose(f_call, f), f_ret))
                if new is None:
                    continue
                ret = self.sg.return_site(call)
                for d3, f3 in list(self.jump.sources(call, d4)):
                    self.propagate(d3, ret, d5, compose(f3, new))


def solve_phase1(problem: ProblemDefinition, supergraph: Supergraph, entries=None):
    """Dense Phase I. Returns ``(jump, summary, stats)``."""
    solver = IDESolver(problem, supergraph, entries).solve()
    return solver.jump, solver.summary, solver.stats


def propagate(edge: PathEdge, f, tables: IDESolver, worklist=None) -> bool:
    """Meet ``f`` into the jump function of ``edge``; enqueue on change."""
    changed = tables.propagate(edge.d1, edge.node, edge.d2, f)
    if changed and worklist is not None and worklist is not tables.worklist:
        worklist.append(tables.worklist.pop())
    return changed


# ---------------------------------------------------------------------------
# Phase II


class ValueMap:
    """Values per (node, symbol), read as the value *before* the node."""

    def __init__(self, problem: ProblemDefinition, supergraph: Supergraph,
                 jump: JumpTable, summary: SummaryTable, start_values: dict,
                 values: dict):
        self.problem = problem
        self.sg = supergraph
        self.jump = jump
        self.summary = summary
        self.start_values = start_values
        self.values = values

    def _check(self, node: Node) -> None:
        proc = self.sg.program.procedures.get(node[0])
        if proc is None or not 0 <= node[1] <= proc.exit:
            raise KeyError(f"unknown statement {node[0]}:{node[1]}")

    def get(self, node: Node, d):
        self._check(node)
        if d == self.problem.zero:
            return self.problem.top
        return self.values.get((node, d), self.problem.top)

    def value_after(self, node: Node, d):
        """Value of ``d`` right after ``node`` executes (exit: at the exit)."""
        self._check(node)
        problem = self.problem
        if d == problem.zero:
            return problem.top
        proc = self.sg.program[node[0]]
        if node[1] == proc.exit:
            return self.get(node, d)
        return self._after_from_jump(node, d, proc)

    def _after_from_jump(self, node: Node, d, proc: Procedure):
        problem = self.problem
        compose, apply, meet = problem.compose, problem.apply, problem.meet_value
        sv = self.start_values
        name = proc.name
        pos = node[1]
        stmt = proc.statements[pos - 1] if pos > 0 else None
        result = problem.top
        for d2, d1, f in self.jump.entries_at(node):
            base = sv.get((name, d1), problem.top)
            if type(stmt) is Call:
                pairs = list(problem.call_to_return_targets(stmt, d2))
                pairs += list(self.summary.targets(node, d2).items())
            elif stmt is None:
                pairs = ((d2, problem.identity),)
            else:
                pairs = problem.normal_targets(stmt, d2)
            for d3, e in pairs:
                if d3 == d:
                    result = meet(result, apply(compose(f, e), base))
        return result

    def items(self):
        return self.values.items()

    def as_dict(self) -> dict:
        """Non-⊤ values keyed by ``(node, symbol)``."""
        top = self.problem.top
        return {k: v for k, v in self.values.items() if v is not top}


def compute_start_values(problem: ProblemDefinition, supergraph: Supergraph,
                         jump: JumpTable, entries) -> dict:
    """Pass 1: values at procedure start nodes, propagated across call edges."""
    top = problem.top
    meet, apply, compose = problem.meet_value, problem.apply, problem.compose
    procs = supergraph.program.procedures
    # (proc, d1) -> [(call node, d2, f)]
    calls_by_source: dict = defaultdict(list)
    for node, row in jump.by_node.items():
        proc = procs[node[0]]
        if 0 < node[1] <= len(proc.statements) and type(proc.statements[node[1] - 1]) is Call:
            for (d2, d1), f in row.items():
                calls_by_source[(node[0], d1)].append((node, d2, f))
    start: dict = {}
    queued: set = set()
    wl: deque = deque()
    for name in entries:
        key = (name, problem.zero)
        start[key] = top
        queued.add(key)
        wl.append(key)
    while wl:
        key = wl.popleft()
        queued.discard(key)
        v = start[key]
        for call, d2, f in calls_by_source.get(key, ()):
            stmt = procs[call[0]].statements[call[1] - 1]
            callee = procs[stmt.callee]
            at_call = apply(f, v)
            for d3, f_call in problem.call_targets(stmt, callee, d2):
                skey = (callee.name, d3)
                # first visit counts as a change so ⊤-valued starts still propagate
                old = start.get(skey)
                new = apply(f_call, at_call) if old is None else meet(old, apply(f_call, at_call))
                if new != old and skey not in queued:
                    queued.add(skey)
                    wl.append(skey)
                start[skey] = new
    return start


def compute_phase2(problem: ProblemDefinition, supergraph: Supergraph,
                   jump: JumpTable, summary: SummaryTable, entries=None,
                   stats: Optional[Stats] = None) -> ValueMap:
    """Two-pass value computation over the Phase I tables."""
    t0 = time.perf_counter()
    entries = tuple(entries) if entries is not None else supergraph.entries
    start = compute_start_values(problem, supergraph, jump, entries)
    top = problem.top
    meet, apply = problem.meet_value, problem.apply
    zero = problem.zero
    values: dict = {}
    for node, row in jump.by_node.items():
        name = node[0]
        for (d2, d1), f in row.items():
            if d2 == zero:
                continue
            key = (node, d2)
            v = apply(f, start.get((name, d1), top))
            old = values.get(key)
            values[key] = v if old is None else meet(old, v)
    if stats is not None:
        stats.phase2_ms += (time.perf_counter() - t0) * 1000
    return ValueMap(problem, supergraph, jump, summary, start, values)


def query_value(vm: ValueMap, stmt, symbol):
    """Value of ``symbol`` at a node given as ``(proc, pos)``."""
    return vm.get(stmt, symbol)


def solve(problem: ProblemDefinition, supergraph: Supergraph, entries=None):
    """Phase I and Phase II with the dense solver. Returns ``(ValueMap, Stats)``."""
    solver = IDESolver(problem, supergraph, entries).solve()
    vm = compute_phase2(problem, supergraph, solver.jump, solver.summary,
                        solver.entries, solver.stats)
    return vm, solver.stats
