"""Flow- and context-insensitive points-to over allocation sites.

This is a deliberately small Andersen-style resolver. It only exists to
answer "which locals of this procedure may name the same object", which the
store flow functions need.
"""

from __future__ import annotations

from collections import defaultdict

from ..ir import (ArrayLoad, ArrayStore, Call, FieldLoad, FieldStore, LocalCopy, New,
                  Program, Return, StaticLoad, StaticStore)
from .symbols import RET


class AliasResolver:
    def __init__(self, program: Program):
        self.program = program
        self.points_to: dict[tuple[str, str], set] = defaultdict(set)
        self._solve()
        self._by_proc: dict[str, dict[str, frozenset[str]]] = {}

    def _solve(self) -> None:
        pt = self.points_to
        heap: dict[tuple, set] = defaultdict(set)
        copies: list[tuple[tuple, tuple]] = []  # (dst, src)
        stores: list[tuple[tuple, object, tuple]] = []  # (base, key, src)
        loads: list[tuple[tuple, tuple, object]] = []  # (dst, base, key)
        gstores: list[tuple[object, tuple]] = []
        gloads: list[tuple[tuple, object]] = []
        for proc in self.program:
            p = proc.name
            for s in proc.statements:
                if isinstance(s, New):
                    pt[(p, s.target)].add((p, s.sid))
                elif isinstance(s, LocalCopy):
                    copies.append(((p, s.target), (p, s.source)))
                elif isinstance(s, FieldStore):
                    stores.append(((p, s.base), s.field, (p, s.source)))
                elif isinstance(s, FieldLoad):
                    loads.append(((p, s.target), (p, s.base), s.field))
                elif isinstance(s, ArrayStore):
                    stores.append(((p, s.base), ("[]", s.index), (p, s.source)))
                elif isinstance(s, ArrayLoad):
                    loads.append(((p, s.target), (p, s.base), ("[]", s.index)))
                elif isinstance(s, StaticStore):
                    gstores.append(((s.cls, s.field), (p, s.source)))
                elif isinstance(s, StaticLoad):
                    gloads.append(((p, s.target), (s.cls, s.field)))
                elif isinstance(s, Call):
                    callee = self.program[s.callee]
                    for actual, formal in zip(s.args, callee.params):
                        copies.append(((callee.name, formal), (p, actual)))
                    if s.target:
                        copies.append(((p, s.target), (callee.name, RET)))
                elif isinstance(s, Return) and s.value:
                    copies.append(((p, RET), (p, s.value)))
        statics: dict[object, set] = defaultdict(set)

        def flow(dst_set: set, src) -> bool:
            if src and not src <= dst_set:
                dst_set |= src
                return True
            return False

        changed = True
        while changed:
            changed = False
            for dst, src in copies:
                changed |= flow(pt[dst], pt.get(src))
            for base, key, src in stores:
                for obj in tuple(pt.get(base, ())):
                    changed |= flow(heap[(obj, key)], pt.get(src))
            for dst, base, key in loads:
                for obj in tuple(pt.get(base, ())):
                    changed |= flow(pt[dst], heap.get((obj, key)))
            for key, src in gstores:
                changed |= flow(statics[key], pt.get(src))
            for dst, key in gloads:
                changed |= flow(pt[dst], statics.get(key))

    def aliases(self, proc: str, name: str) -> frozenset[str]:
        """Locals of ``proc`` that may point to an object ``name`` points to.

        Always contains ``name`` itself.
        """
        if not self._by_proc:
            grouped: dict[str, list] = defaultdict(list)
            for (p, n), sites in self.points_to.items():
                if sites:
                    grouped[p].append((n, sites))
            self._by_proc = {p: self._build(entries) for p, entries in grouped.items()}
        table = self._by_proc.get(proc, {})
        return table.get(name, frozenset((name,)))

    @staticmethod
    def _build(locals_) -> dict[str, frozenset[str]]:
        by_site: dict[object, set[str]] = defaultdict(set)
        for n, sites in locals_:
            for site in sites:
                by_site[site].add(n)
        table = {}
        for n, sites in locals_:
            group = {n}
            for site in sites:
                group |= by_site[site]
            table[n] = frozenset(group)
        return table


def compute_aliases(program: Program, name: str, proc: str = "main") -> frozenset[str]:
    """Aliases of local ``name`` in ``proc`` (the query local included)."""
    return AliasResolver(program).aliases(proc, name)
