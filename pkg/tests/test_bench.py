import json

import pytest

from sparseide.bench.corpus import CATEGORIES, find_case, load_corpus
from sparseide.bench.generator import GeneratorParams, generate_program
from sparseide.bench.oracle import OracleError, oracle_interpret
from sparseide.bench.runner import check_expectations, run_case, run_corpus
from sparseide.bench.stats import (RECORD_KEYS, compare_runs, dump_records, timed_run,
                                   write_plot_data)
from sparseide.ir import parse_program
from sparseide.lcp.symbols import local
from sparseide.lcp.values import BOTTOM, TOP

from support import proc_text, run


def oracle_at_exit(text, name):
    program = parse_program(text)
    return oracle_interpret(program).get(("main", program["main"].exit), local("main", name))


# -- corpus --------------------------------------------------------------------------------

def test_corpus_covers_every_category():
    cases = load_corpus()
    assert len(cases) >= 40
    for cat in CATEGORIES:
        assert sum(c.category == cat for c in cases) >= 4, cat


def test_every_case_has_expectations():
    for case in load_corpus():
        assert case.expectations, case.qualified_name


def test_increment_case():
    case = find_case("Assignment/Increment")
    res = run_case(case, "sparse")
    assert res.ok and res.verdict == "pass"
    vm, _ = run(case.source, "sparse")
    (proc, sid, sym, want), *_ = case.expectations
    assert want == 4 and vm.value_after((proc, sid), sym) == 4


def test_diff_values_merged_and_used():
    case = find_case("DiffValuesMergedAndUsed")
    assert BOTTOM in [e[3] for e in case.expectations]
    assert run_case(case, "both").ok


def test_nonlinear_binop_is_bottom():
    case = find_case("NonLinear/Binop")
    assert all(e[3] is BOTTOM for e in case.expectations)
    assert run_case(case, "both").ok


def test_expectation_mismatch_is_reported():
    case = find_case("Assignment/Increment")
    broken = type(case)(case.name, case.category, case.source.replace("expect a = 4", "expect a = 5"))
    res = run_case(broken, "dense")
    assert not res.ok and "expected 5, got 4" in res.failures[0]
    vm, _ = run(broken.source)
    assert check_expectations(broken, vm)


def test_unknown_mode():
    with pytest.raises(ValueError):
        run_case(find_case("Assignment/Increment"), "fast")


def test_find_case_ambiguous():
    # Increment exists in two categories
    with pytest.raises(KeyError):
        find_case("Increment")


@pytest.mark.parametrize("name", ["WhileUnknown", "ForLoopFixedBound"])
def test_loop_counters_are_bottom(name):
    case = find_case(name)
    assert case.loop_free is False
    assert BOTTOM in [e[3] for e in case.expectations]
    assert run_case(case, "both").ok


def test_run_corpus_both_modes():
    report = run_corpus("both")
    assert report.ok, [(r.case, r.failures, r.differences) for r in report.failed()]
    verdicts = [rec["verdict"] for rec in report.records() if rec["mode"] == "both"]
    assert verdicts and set(verdicts) == {"equal"}


def test_run_corpus_taint():
    report = run_corpus("both", client="taint")
    assert report.ok


# -- oracle ---------------------------------------------------------------------------------

def test_oracle_straight_line():
    assert oracle_at_exit(proc_text("a = 3; b = a"), "b") == 3


def test_oracle_diamond():
    text = proc_text("if * goto L; a = 1; goto M; L: ; a = 2; M: ; b = a")
    assert oracle_at_exit(text, "a") is BOTTOM


def test_oracle_four_equal_paths():
    text = proc_text("""
        if * goto L1; a = 7; goto M1; L1: ; a = 7; M1:
        if * goto L2; b = 1; goto M2; L2: ; b = 2; M2:
    """)
    assert oracle_at_exit(text, "a") == 7
    assert oracle_at_exit(text, "b") is BOTTOM


def test_oracle_uninitialized_is_top():
    assert oracle_at_exit(proc_text("b = a"), "b") is TOP


def test_oracle_rejects_loops_and_nonlinear():
    with pytest.raises(OracleError):
        oracle_interpret(parse_program(proc_text("L: ; a = 1; if * goto L")))
    with pytest.raises(OracleError):
        oracle_interpret(parse_program(proc_text("a = b * c"), allow_nonlinear=True))


def oracle_cases():
    return [c for c in load_corpus() if c.loop_free and c.category != "NonLinear"]


def assert_matches_oracle(case, mode):
    want = oracle_interpret(case.program)
    vm, _ = run(case.source, mode)
    for (node, d), v in want.values.items():
        assert vm.get(node, d) == v, (node, str(d))
    for proc in case.program:
        for pos in range(proc.node_count):
            for d in vm.jump.facts_at((proc.name, pos)):
                if d.name != "$ret":
                    assert vm.get((proc.name, pos), d) == want.get((proc.name, pos), d)


@pytest.mark.parametrize("mode", ["dense", "sparse"])
@pytest.mark.parametrize("case", oracle_cases(), ids=lambda c: c.qualified_name)
def test_oracle_agrees_with_solvers(case, mode):
    assert_matches_oracle(case, mode)


# -- generator -------------------------------------------------------------------------------

def test_generator_deterministic():
    p = GeneratorParams(procs=4, stmts=50, rho=0.7, seed=11)
    assert generate_program(p).text == generate_program(p).text
    assert generate_program(p).text != generate_program(GeneratorParams(procs=4, stmts=50,
                                                                        rho=0.7, seed=12)).text


def test_generator_size():
    g = generate_program(GeneratorParams(procs=10, stmts=100, rho=0.5))
    assert abs(g.program.statement_count - 1000) <= 100
    assert len(g.program.procedures) == 10


@pytest.mark.parametrize("bad", [dict(rho=1.5), dict(procs=0), dict(stmts=2), dict(depth=-1),
                                 dict(branch_density=0.9), dict(calls_per_proc=-1)])
def test_generator_validation(bad):
    with pytest.raises(ValueError):
        generate_program(GeneratorParams(**bad))


def test_rho_zero_within_ten_percent():
    for seed in range(3):
        g = generate_program(GeneratorParams(procs=5, stmts=200, rho=0.0, seed=seed))
        cmp_ = compare_runs(g.program)
        assert cmp_.verdict == "equal"
        assert cmp_.dense.propagations <= 1.10 * cmp_.sparse.propagations


def test_rho_one_leaves_queries_top():
    g = generate_program(GeneratorParams(procs=3, stmts=60, rho=1.0, seed=2))
    vm, _ = run(g.text, "sparse")
    for proc, _, name in g.queries:
        assert vm.get((proc, vm.sg.program[proc].exit), local(proc, name)) is TOP


# -- stats ------------------------------------------------------------------------------------

def test_compare_runs_on_corpus_case():
    cmp_ = compare_runs(find_case("Branching/SameValueMergedAndUsed").program)
    assert cmp_.verdict == "equal"
    assert cmp_.sparse.propagations <= cmp_.dense.propagations
    assert cmp_.propagation_ratio >= 1
    assert 0 <= cmp_.sparse.sparse_cfg_ms <= cmp_.sparse.wall_ms
    assert cmp_.sparse.sparse_cfg_count > 0 and cmp_.dense.sparse_cfg_count == 0


def test_compare_runs_checks_queries():
    cmp_ = compare_runs(parse_program(proc_text("a = 3")), queries=[(("main", 2), local("main", "a"))])
    assert cmp_.verdict == "equal"


def test_timed_run_returns_median_run():
    program = generate_program(GeneratorParams(procs=2, stmts=40, seed=1)).program
    vm, st, solver = timed_run(program, "sparse", repeats=3)
    assert st.wall_ms == pytest.approx(st.phase1_ms + st.phase2_ms)
    assert st.propagations > 0 and solver.stats is st


def test_record_schema():
    cmp_ = compare_runs(parse_program(proc_text("a = 3; b = a")), case="tiny")
    lines = dump_records(cmp_.records()).splitlines()
    assert len(lines) == 3
    for line in lines:
        rec = json.loads(line)
        assert tuple(rec) == RECORD_KEYS
    assert json.loads(lines[-1])["verdict"] == "equal"


def test_plot_data(tmp_path):
    out = tmp_path / "ratio.dat"
    write_plot_data(out, [(0.0, 1.07), (0.5, 2.0)])
    assert out.read_text() == "0 1.07\n0.5 2\n"
