"""Command-line front end: ``analyze``, ``bench``, ``gen`` and ``diff``.

Exit codes:
    0  success
    1  input error (parse error, reported as ``path:line:col: message``)
    2  usage error (unknown entry procedure or query, invalid parameters)
    3  the solver's termination guard tripped
    4  dense and sparse results differ, or a corpus expectation failed
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from typing import Optional

from .bench.generator import GeneratorParams, generate_program
from .bench.runner import run_corpus
from .bench.stats import Comparison, RunStats, compare_runs, dump_records, write_plot_data
from .ir import ParseError, Program, build_supergraph, parse_program
from .lcp.problem import make_problem
from .lcp.symbols import parse_symbol
from .lcp.values import format_value
from .solver import SolverGuardError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_USAGE = 2
EXIT_GUARD = 3
EXIT_MISMATCH = 4


class UsageError(Exception):
    pass


class InputError(Exception):
    """A file could not be read or parsed; the message carries the location."""


@dataclass
class CliConfig:
    command: str
    paths: list[str] = field(default_factory=list)
    entries: list[str] = field(default_factory=lambda: ["main"])
    client: str = "lcp"
    mode: str = "sparse"
    queries: list[str] = field(default_factory=list)
    all_exits: bool = False
    output: str = "text"
    nonlinear: bool = False
    repeats: int = 3
    corpus: bool = False
    gen: Optional[str] = None
    params: Optional[GeneratorParams] = None
    out_path: Optional[str] = None
    plot_data: Optional[str] = None
    dot: list[str] = field(default_factory=list)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        cfg = cls(args.command)
        for name in ("paths", "client", "mode", "all_exits", "nonlinear", "repeats", "corpus",
                     "gen", "plot_data", "dot"):
            if hasattr(args, name) and getattr(args, name) is not None:
                setattr(cfg, name, getattr(args, name))
        if getattr(args, "entry", None):
            cfg.entries = list(args.entry)
        if getattr(args, "query", None):
            cfg.queries = list(args.query)
        cfg.output = getattr(args, "format", None) or (
            "records" if args.command == "bench" else "text")
        if args.command == "gen":
            cfg.out_path = args.output
            cfg.params = GeneratorParams(procs=args.procs, stmts=args.stmts, rho=args.rho,
                                         depth=args.depth, branch_density=args.branch_density,
                                         seed=args.seed, calls_per_proc=args.calls)
        return cfg


# ---------------------------------------------------------------------------
# helpers


def _read_program(path: str, nonlinear: bool) -> Program:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: cannot read input: {exc.strerror}") from exc
    try:
        return parse_program(text, allow_nonlinear=nonlinear)
    except ParseError as exc:
        raise InputError(f"{path}:{exc.line}:{exc.col}: {exc.message}") from exc


def _resolve_query(program: Program, spec: str):
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"query {spec!r} is not of the form proc:stmt:symbol")
    proc_name, stmt, sym = parts
    if proc_name not in program.procedures:
        raise UsageError(f"query {spec!r}: unknown procedure {proc_name!r}")
    proc = program[proc_name]
    try:
        pos = proc.resolve_node(stmt)
        symbol = parse_symbol(proc_name, sym)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"query {spec!r}: {exc.args[0]}") from exc
    return proc_name, stmt, (proc_name, pos), symbol


def _exit_queries(program: Program, vm) -> list[tuple]:
    out = []
    for name in sorted(vm.sg.reachable):
        node = (name, program[name].exit)
        for d in sorted(vm.jump.facts_at(node), key=str):
            if d != vm.problem.zero:
                out.append((name, "exit", node, d))
    return out


def _solve(program: Program, mode: str, client: str, entries: list[str]):
    from .bench.stats import run_solver
    try:
        sg = build_supergraph(program, entries)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    vm, st, solver = run_solver(make_problem(client, program), sg, mode, entries)
    return vm, st, solver


def _print_records(records, stream=None) -> None:
    (stream or sys.stdout).write(dump_records(records))


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(cfg: CliConfig) -> int:
    status = EXIT_OK
    for path in cfg.paths:
        program = _read_program(path, cfg.nonlinear)
        resolved = [_resolve_query(program, q) for q in cfg.queries]
        modes = ("dense", "sparse") if cfg.mode == "both" else (cfg.mode,)
        maps, solvers = {}, {}
        for m in modes:
            maps[m], _, solvers[m] = _solve(program, m, cfg.client, cfg.entries)
        vm = maps[modes[-1]]
        if cfg.all_exits:
            resolved += _exit_queries(program, vm)
        if cfg.mode == "both":
            from .bench.stats import diff_value_maps
            diffs = diff_value_maps(program, maps["dense"], maps["sparse"])
            diffs += [(node, d, maps["dense"].get(node, d), maps["sparse"].get(node, d))
                      for _, _, node, d in resolved
                      if maps["dense"].get(node, d) != maps["sparse"].get(node, d)]
            for node, d, a, b in diffs:
                print(f"{path}: {node[0]}:{node[1]} {d}: dense {format_value(a)} "
                      f"sparse {format_value(b)}", file=sys.stderr)
            if diffs:
                status = EXIT_MISMATCH
        if len(cfg.paths) > 1 and cfg.output == "text":
            print(f"# {path}")
        for proc, stmt, node, d in resolved:
            value = format_value(vm.get(node, d))
            if cfg.output == "records":
                _print_records([{"file": path, "proc": proc, "stmt": stmt, "symbol": str(d),
                                 "value": value}])
            else:
                print(f"{proc} {stmt} {d} {value}")
        for spec in cfg.dot:
            print(_sparse_dot(program, solvers, spec), end="")
    return status


def _sparse_dot(program: Program, solvers: dict, spec: str) -> str:
    from .sparse import build_sparse_cfg
    proc_name, _, sym = spec.partition(":")
    if proc_name not in program.procedures or not sym:
        raise UsageError(f"--dot {spec!r}: expected proc:symbol for a known procedure")
    try:
        d = parse_symbol(proc_name, sym)
    except ValueError as exc:
        raise UsageError(f"--dot {spec!r}: {exc}") from exc
    solver = next(iter(solvers.values()))
    return build_sparse_cfg(program[proc_name], d, solver.problem).to_dot()


def _parse_gen_spec(text: str) -> GeneratorParams:
    """``rho=0.95,n=10000[,procs=10,seed=0,depth=3,branch=0.02,calls=2]``."""
    values = {}
    for part in filter(None, text.split(",")):
        key, sep, val = part.partition("=")
        if not sep:
            raise UsageError(f"--gen: expected key=value, got {part!r}")
        values[key.strip().lower().replace("ρ", "rho")] = val.strip()
    known = {"rho", "n", "procs", "seed", "depth", "branch", "calls"}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"--gen: unknown keys {sorted(unknown)}")
    try:
        procs = int(values.get("procs", 10))
        n = int(values.get("n", 1000))
        params = GeneratorParams(procs=procs, stmts=n // max(procs, 1),
                                 rho=float(values.get("rho", 0.5)),
                                 depth=int(values.get("depth", 3)),
                                 branch_density=float(values.get("branch", 0.02)),
                                 seed=int(values.get("seed", 0)),
                                 calls_per_proc=int(values.get("calls", 2)))
        params.validate()
    except ValueError as exc:
        raise UsageError(f"--gen: {exc}") from exc
    return params


def _summary(case: str, runs: dict[str, RunStats], verdict: str) -> str:
    parts = [case]
    for mode, r in runs.items():
        parts.append(f"{mode}: {r.propagations} props {r.wall_ms:.1f} ms")
    if "sparse" in runs:
        s = runs["sparse"]
        parts.append(f"retained {s.sparse_retained} in {s.sparse_cfg_count} graphs "
                     f"({100 * s.construction_share:.1f}% construction)")
    if "dense" in runs and "sparse" in runs:
        cmp_ = Comparison(case, runs["dense"], runs["sparse"])
        parts.append(f"ratio {cmp_.propagation_ratio:.2f}x speedup {cmp_.speedup:.2f}x")
    if verdict:
        parts.append(verdict)
    return " | ".join(parts)


def cmd_bench(cfg: CliConfig) -> int:
    if not (cfg.corpus or cfg.gen or cfg.paths):
        raise UsageError("bench needs --corpus, --gen or input files")
    records: list[dict] = []
    summaries: list[str] = []
    ok = True
    if cfg.corpus:
        report = run_corpus(cfg.mode, cfg.client, repeats=cfg.repeats)
        for res in report.results:
            records += res.records()
            summaries.append(_summary(res.case, res.runs, res.verdict))
            summaries += [f"  {msg}" for msg in res.failures]
            summaries += [f"  {n[0]}:{n[1]} {d}: dense {format_value(a)} sparse "
                          f"{format_value(b)}" for n, d, a, b in res.differences]
        ok &= report.ok
    programs = []
    if cfg.gen:
        params = _parse_gen_spec(cfg.gen)
        programs.append((f"gen:rho={params.rho:g},n={params.total_statements},"
                         f"seed={params.seed}", generate_program(params).program, params.rho))
    for path in cfg.paths:
        programs.append((path, _read_program(path, cfg.nonlinear), None))
    pairs = []
    for case, program, rho in programs:
        if cfg.mode == "both":
            try:
                cmp_ = compare_runs(program, case=case, client=cfg.client,
                                    entries=tuple(cfg.entries), repeats=cfg.repeats)
            except KeyError as exc:
                raise UsageError(exc.args[0]) from exc
            records += cmp_.records()
            summaries.append(_summary(case, {"dense": cmp_.dense, "sparse": cmp_.sparse},
                                      cmp_.verdict))
            if rho is not None:
                pairs.append((rho, cmp_.propagation_ratio))
            ok &= cmp_.verdict == "equal"
        else:
            from .bench.stats import timed_run
            try:
                _, st, _ = timed_run(program, cfg.mode, cfg.client, tuple(cfg.entries),
                                     cfg.repeats)
            except KeyError as exc:
                raise UsageError(exc.args[0]) from exc
            run = RunStats.from_stats(cfg.mode, st)
            records.append(run.record(case))
            summaries.append(_summary(case, {cfg.mode: run}, ""))
    if cfg.output == "records":
        _print_records(records)
        for line in summaries:
            print(line, file=sys.stderr)
    else:
        for line in summaries:
            print(line)
    if cfg.plot_data and pairs:
        write_plot_data(cfg.plot_data, pairs)
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_gen(cfg: CliConfig) -> int:
    try:
        gp = generate_program(cfg.params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    program = gp.program
    n_stmts = sum(len(p.statements) for p in program)
    report = f"statements: {n_stmts} procedures: {len(program.procedures)}"
    if cfg.out_path and cfg.out_path != "-":
        with open(cfg.out_path, "w") as fh:
            fh.write(gp.text)
        print(report)
    else:
        sys.stdout.write(gp.text)
        print(report, file=sys.stderr)
    return EXIT_OK


def cmd_diff(cfg: CliConfig) -> int:
    from .bench.stats import diff_value_maps
    status = EXIT_OK
    for path in cfg.paths:
        program = _read_program(path, cfg.nonlinear)
        dense, _, _ = _solve(program, "dense", cfg.client, cfg.entries)
        sparse, _, _ = _solve(program, "sparse", cfg.client, cfg.entries)
        diffs = diff_value_maps(program, dense, sparse, limit=10**9)
        for node, d, a, b in diffs:
            print(f"{path} {node[0]} {node[1]} {d} dense={format_value(a)} "
                  f"sparse={format_value(b)}")
        if diffs:
            status = EXIT_MISMATCH
        elif cfg.output == "text":
            print(f"{path}: dense and sparse agree")
    return status


COMMANDS = {"analyze": cmd_analyze, "bench": cmd_bench, "gen": cmd_gen, "diff": cmd_diff}


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--entry", action="append", metavar="PROC",
                   help="entry procedure, repeatable (default: main)")
    p.add_argument("--client", choices=("lcp", "taint"), default="lcp")
    p.add_argument("--nonlinear", action="store_true",
                   help="accept two-variable binops instead of rejecting them")
    p.add_argument("--format", choices=("text", "records"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparseide",
                                     description="Dense and sparse IDE data-flow analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze IR files and print queried values")
    p.add_argument("paths", nargs="+", metavar="FILE")
    _common(p)
    p.add_argument("--mode", choices=("dense", "sparse", "both"), default="sparse")
    p.add_argument("--query", action="append", metavar="PROC:STMT:SYMBOL",
                   help="STMT is a statement id, a label, 'entry' or 'exit'")
    p.add_argument("--all-exits", action="store_true",
                   help="print every fact reaching the exit of each reachable procedure")
    p.add_argument("--dot", action="append", default=[], metavar="PROC:SYMBOL",
                   help="print the sparse CFG of SYMBOL in PROC as DOT")

    p = sub.add_parser("bench", help="run dense and/or sparse and emit statistics")
    p.add_argument("paths", nargs="*", metavar="FILE")
    _common(p)
    p.add_argument("--corpus", action="store_true", help="run the built-in corpus")
    p.add_argument("--gen", metavar="SPEC", help="generated input, e.g. rho=0.95,n=10000")
    p.add_argument("--mode", choices=("dense", "sparse", "both"), default="both")
    p.add_argument("--repeats", type=int, default=3, help="timing runs per mode (median)")
    p.add_argument("--plot-data", metavar="PATH", help="write 'rho ratio' pairs")

    p = sub.add_parser("gen", help="write a synthetic stress program")
    p.add_argument("-o", "--output", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--procs", type=int, default=10)
    p.add_argument("--stmts", type=int, default=100, help="statements per procedure")
    p.add_argument("--rho", type=float, default=0.5, help="fraction of decoy statements")
    p.add_argument("--depth", type=int, default=3, help="call-graph depth")
    p.add_argument("--branch-density", type=float, default=0.02)
    p.add_argument("--calls", type=int, default=2, help="calls per procedure")

    p = sub.add_parser("diff", help="list every point where dense and sparse disagree")
    p.add_argument("paths", nargs="+", metavar="FILE")
    _common(p)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = CliConfig.from_args(args)
    try:
        return COMMANDS[cfg.command](cfg)
    except InputError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverGuardError as exc:
        print(f"solver guard: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
