"""Micro-benchmark corpus for linear constant propagation.

Cases live as ``.ir`` files under ``corpus/<Category>/<Name>.ir`` and are
shipped as package data. Expectations are ``// expect`` annotations inside
each file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

from ..ir import Call, Program, build_cfg, parse_program
from ..lcp.symbols import parse_symbol
from ..lcp.values import parse_value

CATEGORIES = ("Assignment", "Branching", "Loops", "FieldSensitivity", "ContextSensitivity",
              "Array", "NonLinear")


@dataclass(frozen=True)
class CorpusCase:
    name: str
    category: str
    source: str = field(repr=False)

    @property
    def qualified_name(self) -> str:
        return f"{self.category}/{self.name}"

    @cached_property
    def program(self) -> Program:
        return parse_program(self.source, allow_nonlinear=True)

    @property
    def expectations(self) -> list[tuple[str, int, object, object]]:
        """``(proc, statement id, symbol, expected value)`` tuples."""
        return [(e.proc, e.sid, parse_symbol(e.proc, e.symbol), parse_value(e.value))
                for e in self.program.expectations]

    @property
    def single_procedure(self) -> bool:
        return not any(isinstance(s, Call) for p in self.program for s in p.statements)

    @property
    def loop_free(self) -> bool:
        return all(not has_cycle(build_cfg(p).succ) for p in self.program)


def has_cycle(succ) -> bool:
    """Whether the graph given as a successor list has a cycle."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = [WHITE] * len(succ)
    for root in range(len(succ)):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
            elif color[nxt] == GREY:
                return True
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(succ[nxt])))
    return False


def load_corpus() -> list[CorpusCase]:
    root = resources.files(__package__) / "corpus"
    cases = []
    for category in CATEGORIES:
        folder = root / category
        for entry in sorted(folder.iterdir(), key=lambda e: e.name):
            if entry.name.endswith(".ir"):
                cases.append(CorpusCase(entry.name[:-3], category, entry.read_text()))
    return cases


def find_case(name: str) -> CorpusCase:
    """Look a case up by ``Category/Name`` or by a unique bare name."""
    cases = load_corpus()
    hits = [c for c in cases if c.qualified_name == name] or [c for c in cases if c.name == name]
    if len(hits) != 1:
        raise KeyError(f"no unique corpus case named {name!r}")
    return hits[0]
