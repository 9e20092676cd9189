"""Corpus runs: per-case expectations plus dense/sparse agreement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..lcp.values import format_value
from .corpus import CorpusCase, load_corpus
from .stats import RunStats, diff_value_maps, timed_run

MODES = ("dense", "sparse", "both")


@dataclass
class CaseResult:
    case: str
    runs: dict[str, RunStats]
    failures: list[str] = field(default_factory=list)
    differences: list = field(default_factory=list)
    compared: bool = False

    @property
    def ok(self) -> bool:
        return not self.failures and not self.differences

    @property
    def verdict(self) -> str:
        if self.compared:
            return "equal" if not self.differences else "different"
        return "pass" if not self.failures else "fail"

    def records(self) -> list[dict]:
        out = []
        for mode, run in self.runs.items():
            out.append(run.record(self.case, "pass" if not self.failures else "fail"))
        if self.compared:
            out.append({"case": self.case, "mode": "both", "wall_ms": None,
                        "propagations": None, "sparse_cfg_count": None,
                        "sparse_cfg_ms": None, "verdict": self.verdict})
        return out


@dataclass
class CorpusReport:
    mode: str
    client: str
    results: list[CaseResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def failed(self) -> list[CaseResult]:
        return [r for r in self.results if not r.ok]

    def records(self) -> list[dict]:
        return [rec for r in self.results for rec in r.records()]


def check_expectations(case: CorpusCase, vm) -> list[str]:
    """Mismatches between ``// expect`` annotations and ``vm``."""
    out = []
    for proc, sid, symbol, expected in case.expectations:
        got = vm.value_after((proc, sid), symbol)
        if got != expected:
            out.append(f"{proc}:{sid}: {symbol} expected {format_value(expected)}, "
                       f"got {format_value(got)}")
    return out


def run_case(case: CorpusCase, mode: str = "both", client: str = "lcp",
             repeats: int = 1) -> CaseResult:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    program = case.program
    modes = ("dense", "sparse") if mode == "both" else (mode,)
    runs, maps, failures = {}, {}, []
    for m in modes:
        vm, st, _ = timed_run(program, m, client, repeats=repeats)
        runs[m] = RunStats.from_stats(m, st)
        maps[m] = vm
        # expectations are written for the value-carrying client only
        if client == "lcp":
            failures += [f"[{m}] {msg}" for msg in check_expectations(case, vm)]
    diffs = []
    if mode == "both":
        diffs = diff_value_maps(program, maps["dense"], maps["sparse"])
    return CaseResult(case.qualified_name, runs, failures, diffs, compared=mode == "both")


def run_corpus(mode: str = "both", client: str = "lcp",
               cases: Optional[Iterable[CorpusCase]] = None, repeats: int = 1) -> CorpusReport:
    """Evaluate every corpus case under the selected solver(s).

    In ``both`` mode the full value maps are compared as well, not only the
    annotated points.
    """
    cases = load_corpus() if cases is None else list(cases)
    return CorpusReport(mode, client, [run_case(c, mode, client, repeats) for c in cases])
