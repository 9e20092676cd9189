"""Run dense and sparse solvers side by side and collect measurements."""

from __future__ import annotations

import gc
import json
import statistics
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..ir import Program, Supergraph, build_supergraph
from ..lcp.problem import make_problem
from ..solver import IDESolver, Stats, ValueMap, compute_phase2
from ..sparse import SparseIDESolver, SparseValueMap, compute_sparse_phase2

RECORD_KEYS = ("case", "mode", "wall_ms", "propagations", "sparse_cfg_count",
               "sparse_cfg_ms", "verdict")


@dataclass
class RunStats:
    mode: str
    wall_ms: float
    phase1_ms: float
    phase2_ms: float
    propagations: int
    sparse_cfg_count: int = 0
    sparse_cfg_ms: float = 0.0
    jump_entries: int = 0
    summary_entries: int = 0
    sparse_retained: int = 0

    @classmethod
    def from_stats(cls, mode: str, st: Stats) -> "RunStats":
        return cls(mode, st.wall_ms, st.phase1_ms, st.phase2_ms, st.propagations,
                   st.sparse_cfg_count, st.sparse_cfg_ms, st.jump_entries, st.summary_entries,
                   st.sparse_retained)

    @property
    def construction_share(self) -> float:
        return self.sparse_cfg_ms / self.wall_ms if self.wall_ms else 0.0

    def record(self, case: str, verdict: str = "") -> dict:
        return {"case": case, "mode": self.mode, "wall_ms": round(self.wall_ms, 3),
                "propagations": self.propagations, "sparse_cfg_count": self.sparse_cfg_count,
                "sparse_cfg_ms": round(self.sparse_cfg_ms, 3), "verdict": verdict}


@dataclass
class Comparison:
    case: str
    dense: RunStats
    sparse: RunStats
    differences: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "equal" if not self.differences else "different"

    @property
    def propagation_ratio(self) -> float:
        return self.dense.propagations / max(self.sparse.propagations, 1)

    @property
    def speedup(self) -> float:
        return self.dense.wall_ms / self.sparse.wall_ms if self.sparse.wall_ms else float("inf")

    def records(self) -> list[dict]:
        return [self.dense.record(self.case), self.sparse.record(self.case),
                {"case": self.case, "mode": "both", "wall_ms": None,
                 "propagations": None, "sparse_cfg_count": None, "sparse_cfg_ms": None,
                 "verdict": self.verdict}]


def run_solver(problem, sg: Supergraph, mode: str, entries=None):
    """One Phase I + Phase II run. Returns ``(ValueMap, Stats, solver)``."""
    if mode == "dense":
        solver = IDESolver(problem, sg, entries).solve()
        vm = compute_phase2(problem, sg, solver.jump, solver.summary, solver.entries,
                            solver.stats)
    elif mode == "sparse":
        solver = SparseIDESolver(problem, sg, entries).solve()
        vm = compute_sparse_phase2(problem, sg, solver.jump, solver.summary, solver.cache,
                                   solver.entries, solver.stats)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return vm, solver.stats, solver


@contextmanager
def _gc_paused():
    # like timeit: a collection pass walks the whole heap, so its cost tracks
    # program size rather than solver work and would blur the comparison
    enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def timed_run(program: Program, mode: str, client: str = "lcp", entries=("main",),
              repeats: int = 3):
    """Run ``repeats`` times with the garbage collector paused.

    Returns the results and stats of the run with the median wall time.
    """
    sg = build_supergraph(program, entries)
    runs = []
    for _ in range(repeats):
        problem = make_problem(client, program)
        with _gc_paused():
            runs.append(run_solver(problem, sg, mode, entries))
    walls = [st.wall_ms for _, st, _ in runs]
    med = statistics.median(walls)
    vm, st, solver = min(runs, key=lambda r: abs(r[1].wall_ms - med))
    return vm, st, solver


def _symbols_by_proc(*vms: ValueMap) -> dict[str, set]:
    out: dict[str, set] = {}
    for vm in vms:
        for node, row in vm.jump.by_node.items():
            bucket = out.setdefault(node[0], set())
            for d2, _ in row:
                bucket.add(d2)
    return out


def diff_value_maps(program: Program, a: ValueMap, b: ValueMap, limit: int = 20) -> list:
    """Every ``(node, symbol)`` where the two maps disagree (up to ``limit``)."""
    diffs = []
    zero = a.problem.zero
    for name, symbols in _symbols_by_proc(a, b).items():
        proc = program[name]
        for d in sorted(symbols, key=str):
            if d == zero:
                continue
            col_a = _column(a, name, d, proc.node_count)
            col_b = _column(b, name, d, proc.node_count)
            for pos, (va, vb) in enumerate(zip(col_a, col_b)):
                if va != vb:
                    diffs.append(((name, pos), d, va, vb))
                    if len(diffs) >= limit:
                        return diffs
    return diffs


def _column(vm: ValueMap, name: str, d, n: int) -> list:
    if isinstance(vm, SparseValueMap):
        return vm.sweep(name, d)
    return [vm.get((name, pos), d) for pos in range(n)]


def compare_runs(program: Program, queries: Optional[Iterable] = None, case: str = "program",
                 client: str = "lcp", entries=("main",), repeats: int = 1) -> Comparison:
    """Run both solvers, check value equality, return both stats."""
    dense_vm, dense_st, _ = timed_run(program, "dense", client, entries, repeats)
    sparse_vm, sparse_st, _ = timed_run(program, "sparse", client, entries, repeats)
    diffs = diff_value_maps(program, dense_vm, sparse_vm)
    for q in queries or ():
        node, d = q
        if dense_vm.get(node, d) != sparse_vm.get(node, d):
            diffs.append((node, d, dense_vm.get(node, d), sparse_vm.get(node, d)))
    return Comparison(case, RunStats.from_stats("dense", dense_st),
                      RunStats.from_stats("sparse", sparse_st), diffs)


def dump_records(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=False) + "\n" for r in records)


def write_plot_data(path, pairs: Iterable[tuple[float, float]]) -> None:
    """Two whitespace-separated columns, one pair per line."""
    with open(path, "w") as fh:
        for x, y in pairs:
            fh.write(f"{x:g} {y:g}\n")
