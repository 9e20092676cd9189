"""Symbol-specific sparse IDE.

For every procedure ``p`` and symbol ``d`` a reduced CFG ``G_{p,d}`` keeps
only the nodes where ``d`` may change or be used, plus a structural
skeleton. The sparse solver differs from the dense one in exactly two
places: facts leaving an intraprocedural node and facts leaving a call site
towards its return site jump straight to the next node of ``G_{p,d}``.

Skeleton nodes kept for every symbol: start, exit, branches, gotos,
returns and labels. Keeping labels means every dropped node has exactly one
predecessor (the node before it) and falls through to the node after it,
which makes successor lookup a binary search and value recovery at dropped
nodes a short backward walk.
"""

from __future__ import annotations

import time
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

from .ir import (CFG, Branch, Call, Goto, Label, Procedure, Return, Statement, Supergraph, UseLists,
                 build_use_lists, statement_successors)
from .solver import (IDESolver, JumpTable, Node, ProblemDefinition, Stats, SummaryTable,
                     ValueMap, compute_phase2)

# ---------------------------------------------------------------------------
# Identity predicates


def is_identity_flow(stmt: Statement, d, problem: ProblemDefinition) -> bool:
    """``d`` is neither read nor written by ``stmt`` per the relevance oracle."""
    return d not in problem.reads(stmt) and d not in problem.writes(stmt)


def is_identity_transformer(stmt: Statement, d, problem: ProblemDefinition) -> bool:
    """The statement's environment transformer neither remaps ``d`` nor
    uses ``d``'s value for another symbol, for every lattice value."""
    if isinstance(stmt, Call):
        return not problem.call_affects(stmt, d)
    if d in problem.writes(stmt):
        return False
    targets = problem.normal_targets(stmt, d)
    return len(targets) == 1 and targets[0][0] == d and targets[0][1] == problem.identity


# ---------------------------------------------------------------------------
# Per-procedure index and sparse CFGs

class ProcedureIndex:
    """Positions of each symbol's relevant statements within one procedure.

    Skeleton and call positions come straight from the IR use-lists. The
    positions of a symbol are the client's candidates filtered through its
    relevance oracle, computed on first request.
    """

    def __init__(self, proc: Procedure, problem: ProblemDefinition,
                 uses: Optional[UseLists] = None, cfg: Optional[CFG] = None):
        uses = uses or build_use_lists(proc)
        self.proc = proc
        self.problem = problem
        self.uses = uses
        self.skeleton = [0] + uses.of_type(Branch, Goto, Return, Label) + [proc.exit]
        succ_of = cfg.succ if cfg is not None else [statement_successors(proc, pos)
                                                    for pos in range(proc.node_count)]
        self.jumps = [(pos, succ_of[pos]) for pos in uses.of_type(Branch, Goto, Return)]
        self.calls = uses.of_type(Call)
        stmts = proc.statements
        self.generators = [pos for pos in problem.generator_candidates(uses)
                           if type(stmts[pos - 1]) is not Call
                           and problem.is_generator(stmts[pos - 1])]
        self._positions: dict = {}

    def positions(self, d) -> list[int]:
        got = self._positions.get(d)
        if got is None:
            stmts = self.proc.statements
            relevance = self.problem.relevance
            got = []
            for pos in self.problem.candidate_positions(self.uses, d):
                reads, writes = relevance(stmts[pos - 1])
                if d in reads or d in writes:
                    got.append(pos)
            self._positions[d] = got
        return got


@dataclass
class SparseCFG:
    """``G_{p,d}``: retained positions of ``proc`` and their sparse successors."""

    proc: Procedure
    symbol: object
    retained: list[int]
    succ: dict[int, tuple[int, ...]]

    @cached_property
    def retained_set(self) -> frozenset[int]:
        return frozenset(self.retained)

    def first_retained(self, pos: int) -> int:
        """The first retained node at or after ``pos`` along fallthrough."""
        return self.retained[bisect_left(self.retained, pos)]

    def successors(self, pos: int) -> tuple[int, ...]:
        got = self.succ.get(pos)
        if got is None:
            raise KeyError(f"{pos} is not retained for {self.symbol}")
        return got

    def __contains__(self, pos: int) -> bool:
        return pos in self.retained_set

    def __len__(self) -> int:
        return len(self.retained)

    def to_dot(self) -> str:
        proc = self.proc
        lines = [f'digraph "{proc.name}:{self.symbol}" {{']
        for pos in self.retained:
            lines.append(f'  n{pos} [label="{_node_label(proc, pos)}"];')
        for pos in self.retained:
            for nxt in self.succ[pos]:
                lines.append(f"  n{pos} -> n{nxt};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _node_label(proc: Procedure, pos: int) -> str:
    from .ir import format_statement
    if pos == 0:
        return "entry"
    if pos == proc.exit:
        return "exit"
    text = format_statement(proc.statements[pos - 1]).replace('"', '\\"')
    return f"{pos}: {text}"


def retained_positions(proc: Procedure, d, problem: ProblemDefinition,
                       index: Optional[ProcedureIndex] = None) -> list[int]:
    index = index or ProcedureIndex(proc, problem)
    keep = set(index.skeleton)
    keep.update(index.positions(d))
    for pos in index.calls:
        if problem.call_affects(proc.statements[pos - 1], d):
            keep.add(pos)
    if d == problem.zero:
        keep.update(index.generators)
    return sorted(keep)


def build_sparse_cfg(proc: Procedure, d, problem: ProblemDefinition,
                     index: Optional[ProcedureIndex] = None) -> SparseCFG:
    index = index or ProcedureIndex(proc, problem)
    retained = retained_positions(proc, d, problem, index)
    # every retained node falls through to the next retained one, except
    # jumps (all of them skeleton) and the exit
    succ = dict(zip(retained, zip(retained[1:])))
    succ[proc.exit] = ()
    # a jump target is a label or the exit, hence retained itself
    for pos, dense in index.jumps:
        if len(dense) == 1:
            succ[pos] = dense
        else:
            after, target = succ[pos][0], dense[1]
            succ[pos] = (after,) if after == target else (after, target)
    return SparseCFG(proc, d, retained, succ)


class SparseCFGCache:
    """Lazily built ``G_{p,d}`` per (procedure, symbol) with timing."""

    def __init__(self, problem: ProblemDefinition, supergraph: Supergraph):
        self.problem = problem
        self.sg = supergraph
        self.graphs: dict = {}
        self.indexes: dict[str, ProcedureIndex] = {}
        self.build_count = 0
        self.build_seconds = 0.0

    def get(self, proc_name: str, d) -> SparseCFG:
        key = (proc_name, d)
        g = self.graphs.get(key)
        if g is None:
            t0 = time.perf_counter()
            index = self.indexes.get(proc_name)
            if index is None:
                index = self.indexes[proc_name] = ProcedureIndex(
                    self.sg.program[proc_name], self.problem, self.sg.uses[proc_name],
                    self.sg.cfgs[proc_name])
            g = build_sparse_cfg(self.sg.program[proc_name], d, self.problem, index)
            self.graphs[key] = g
            self.build_count += 1
            self.build_seconds += time.perf_counter() - t0
        return g

    def __contains__(self, key) -> bool:
        return key in self.graphs

    def __len__(self) -> int:
        return len(self.graphs)


def next_use(cache: SparseCFGCache, p: str, d, n: int) -> tuple[int, ...]:
    """Sparse successors of node ``n`` in ``G_{p,d}``.

    ``n`` need not be retained: facts can arrive densely at a return site.
    """
    g = cache.get(p, d)
    got = g.succ.get(n)
    if got is not None:
        return got
    out = []
    for nxt in cache.sg.cfgs[p].succ[n]:
        r = g.first_retained(nxt)
        if r not in out:
            out.append(r)
    return tuple(out)


# ---------------------------------------------------------------------------
# Sparse Phase I


class SparseIDESolver(IDESolver):
    def __init__(self, problem: ProblemDefinition, supergraph: Supergraph, entries=None):
        super().__init__(problem, supergraph, entries)
        self.cache = SparseCFGCache(problem, supergraph)
        self._next: dict = {}

    def _next_nodes(self, node: Node, d) -> tuple[Node, ...]:
        key = (node, d)
        out = self._next.get(key)
        if out is None:
            name = node[0]
            out = tuple((name, m) for m in next_use(self.cache, name, d, node[1]))
            self._next[key] = out
        return out

    def intra_targets(self, node: Node, d) -> Iterable[Node]:
        return self._next_nodes(node, d)

    def call_result_targets(self, call: Node, d) -> Iterable[Node]:
        # computed from the call node so that a relevant return site is kept
        return self._next_nodes(call, d)

    def solve(self) -> "SparseIDESolver":
        super().solve()
        self.stats.sparse_cfg_count = self.cache.build_count
        self.stats.sparse_cfg_ms = self.cache.build_seconds * 1000
        self.stats.sparse_retained = sum(len(g) for g in self.cache.graphs.values())
        return self


def solve_sparse_phase1(problem: ProblemDefinition, supergraph: Supergraph, entries=None):
    """Sparse Phase I. Returns ``(jump, summary, stats)``; the cache is on ``stats``."""
    solver = SparseIDESolver(problem, supergraph, entries).solve()
    return solver.jump, solver.summary, solver.stats


# ---------------------------------------------------------------------------
# Values at nodes the sparse tables skipped


class SparseValueMap(ValueMap):
    """Value map over sparse tables.

    At a node retained for ``d`` the stored value is exact. Elsewhere the
    value is recovered from the nearest retained node before it: all nodes
    in between are ``d``-identity transformers, so ``d`` keeps the value it
    had after that node. A skipped node may still create ``d`` from another
    fact (a taint generator skipped for its target is one), so each skipped
    node also contributes whatever its stored path edges send into ``d``.
    """

    def __init__(self, base: ValueMap, cache: SparseCFGCache):
        super().__init__(base.problem, base.sg, base.jump, base.summary,
                         base.start_values, base.values)
        self.cache = cache

    def stored(self, node: Node, d):
        return self.values.get((node, d), self.problem.top)

    def inflow(self, node: Node, d):
        """What the path edges stored at ``node`` send into ``d`` across it."""
        if node not in self.jump.by_node:
            return self.problem.top
        return self._after_from_jump(node, d, self.sg.program[node[0]])

    def get(self, node: Node, d):
        self._check(node)
        problem = self.problem
        if d == problem.zero:
            return problem.top
        return resolve_value_at(node, d, self, self.cache)

    def sweep(self, proc_name: str, d) -> list:
        """Values of ``d`` before every node of ``proc_name``, in one pass."""
        problem = self.problem
        meet, top = problem.meet_value, problem.top
        g = self.cache.get(proc_name, d)
        cfg = self.sg.cfgs[proc_name]
        out = []
        after_prev = top
        for pos in range(cfg.proc.node_count):
            v = self.stored((proc_name, pos), d)
            if pos not in g.retained_set:
                if pos > 0 and pos in cfg.succ[pos - 1]:
                    v = meet(v, after_prev)
                after_prev = meet(v, self.inflow((proc_name, pos), d))
            else:
                after_prev = super().value_after((proc_name, pos), d) if pos != cfg.proc.exit else v
            out.append(v)
        return out

    def value_after(self, node: Node, d):
        self._check(node)
        g = self.cache.get(node[0], d)
        proc = self.sg.program[node[0]]
        if node[1] == proc.exit:
            return self.get(node, d)
        if node[1] in g.retained_set:
            return super().value_after(node, d)
        # a dropped node is a d-identity: the value before, plus any inflow
        return self.problem.meet_value(self.get(node, d), self.inflow(node, d))


def resolve_value_at(node: Node, d, vm: SparseValueMap, cache: SparseCFGCache):
    """Value of ``d`` before ``node`` when the sparse tables may skip it."""
    problem = vm.problem
    if d == problem.zero:
        return problem.top
    name, pos = node
    g = cache.get(name, d)
    v = vm.stored(node, d)
    if pos in g.retained_set:
        return v
    meet = problem.meet_value
    succ = vm.sg.cfgs[name].succ
    q = pos - 1
    while q not in g.retained_set:
        # dropped nodes have a single predecessor, the node before them
        v = meet(v, vm.stored((name, q), d))
        v = meet(v, vm.inflow((name, q), d))
        q -= 1
    if q + 1 not in succ[q]:
        # the head does not fall through, so this segment is dead code
        return v
    return meet(v, ValueMap.value_after(vm, (name, q), d))


def compute_sparse_phase2(problem: ProblemDefinition, supergraph: Supergraph,
                          jump: JumpTable, summary: SummaryTable, cache: SparseCFGCache,
                          entries=None, stats: Optional[Stats] = None) -> SparseValueMap:
    base = compute_phase2(problem, supergraph, jump, summary, entries, stats)
    return SparseValueMap(base, cache)


def solve_sparse(problem: ProblemDefinition, supergraph: Supergraph, entries=None):
    """Sparse Phase I and Phase II. Returns ``(SparseValueMap, Stats)``."""
    solver = SparseIDESolver(problem, supergraph, entries).solve()
    vm = compute_sparse_phase2(problem, supergraph, solver.jump, solver.summary,
                               solver.cache, solver.entries, solver.stats)
    return vm, solver.stats


# ---------------------------------------------------------------------------
# Debug export


def path_edges_to_dot(jump: JumpTable, supergraph: Supergraph, proc: Optional[str] = None) -> str:
    """Exploded-supergraph path edges ``<s_p,d1> -> <n,d2>`` as a DOT graph."""
    lines = ["digraph pathedges {"]
    names: dict = {}

    def nid(node, d) -> str:
        key = (node, d)
        if key not in names:
            names[key] = f"v{len(names)}"
            p = supergraph.program[node[0]]
            label = f"{node[0]}:{p.node_name(node[1])} / {d}".replace('"', '\\"')
            lines.append(f'  {names[key]} [label="{label}"];')
        return names[key]

    for edge, f in jump:
        if proc is not None and edge.node[0] != proc:
            continue
        src = nid((edge.node[0], 0), edge.d1)
        dst = nid(edge.node, edge.d2)
        label = repr(f).replace('"', '\\"')
        lines.append(f'  {src} -> {dst} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
