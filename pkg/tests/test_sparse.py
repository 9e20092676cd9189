from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from sparseide.bench.corpus import load_corpus
from sparseide.bench.stats import diff_value_maps
from sparseide.ir import Call, build_cfg, build_supergraph, parse_program
from sparseide.lcp.problem import lcp_problem, make_problem, taint_problem
from sparseide.lcp.symbols import ZERO, array_elem, field_ap, local, ret_symbol, static_field
from sparseide.lcp.values import BOTTOM, TOP
from sparseide.sparse import (ProcedureIndex, SparseCFGCache, build_sparse_cfg, is_identity_flow,
                              is_identity_transformer, next_use, path_edges_to_dot,
                              resolve_value_at, retained_positions)

from support import STATEMENT_FORMS, at_exit, proc_text, random_program_text, run

EXAMPLE = proc_text("a = 3; b = a; c = 7; b = b + 1; return b")


def sym(name):
    return local("main", name)


def example():
    program = parse_program(EXAMPLE)
    return program, program["main"], lcp_problem(program)


def stmt(text, client="lcp"):
    program = parse_program(proc_text(text))
    return program["main"].statements[0], make_problem(client, program)


# -- identity predicates -----------------------------------------------------------

@pytest.mark.parametrize("text, d, want", [
    ("c = 7", "a", True),
    ("b = a", "a", False),
    ("a = 3", "a", False),
])
def test_identity_flow(text, d, want):
    s, problem = stmt(text)
    assert is_identity_flow(s, sym(d), problem) is want


@pytest.mark.parametrize("text, client, want", [
    ("a = a + 1", "lcp", False),
    ("a = a + 1", "taint", True),
    ("b = a * 2", "lcp", False),
    ("b = a * 2", "taint", False),
    ("c = 7", "lcp", True),
    ("a = a + 0", "lcp", True),
])
def test_identity_transformer(text, client, want):
    s, problem = stmt(text, client)
    assert is_identity_transformer(s, sym("a"), problem) is want


# -- sparse CFGs ---------------------------------------------------------------------

def test_retained_for_a():
    _, proc, problem = example()
    g = build_sparse_cfg(proc, sym("a"), problem)
    assert g.retained == [0, 1, 2, 5, 6]


def test_retained_for_b():
    _, proc, problem = example()
    g = build_sparse_cfg(proc, sym("b"), problem)
    assert g.retained == [0, 2, 4, 5, 6]


def test_unused_symbol_keeps_only_the_floor():
    program = parse_program(proc_text("a = 1; if * goto L; a = 2; L: ; return a"))
    proc, problem = program["main"], lcp_problem(program)
    g = build_sparse_cfg(proc, sym("zz"), problem)
    assert g.retained == [0, 2, 4, 5, 6]  # start, branch, label, return, exit
    assert g.successors(2) == (4,)


def test_heap_symbols_keep_every_call():
    text = proc_text("o = new; call g(b); x = 1; call g(x)") + proc_text("return", "g", "p")
    program = parse_program(text)
    proc, problem = program["main"], lcp_problem(program)
    calls = {pos for pos, s in enumerate(proc.statements, 1) if isinstance(s, Call)}
    assert calls <= set(build_sparse_cfg(proc, field_ap("main", "o", "f"), problem).retained)
    assert calls <= set(build_sparse_cfg(proc, static_field("K", "s"), problem).retained)
    # a local not mentioned at a call is skipped past it
    assert 2 not in build_sparse_cfg(proc, sym("x"), problem).retained
    assert 4 in build_sparse_cfg(proc, sym("x"), problem).retained


def test_lambda_keeps_generators():
    _, proc, problem = example()
    g = build_sparse_cfg(proc, ZERO, problem)
    assert {1, 3} <= set(g.retained)


def test_next_use_examples():
    program, proc, problem = example()
    cache = SparseCFGCache(problem, build_supergraph(program, ["main"]))
    assert next_use(cache, "main", sym("a"), 1) == (2,)
    assert next_use(cache, "main", sym("b"), 2) == (4,)
    # d unused downstream: straight to the return and then the exit
    assert next_use(cache, "main", sym("c"), 3) == (5,)
    assert next_use(cache, "main", sym("c"), 5) == (proc.exit,)


def test_next_use_from_a_skipped_node():
    program, _, problem = example()
    cache = SparseCFGCache(problem, build_supergraph(program, ["main"]))
    # facts can arrive densely at a node the graph skips
    assert next_use(cache, "main", sym("a"), 3) == (5,)


def test_branch_fans_out():
    program = parse_program(proc_text("a = 1; if * goto L; a = 2; L: ; return a"))
    cache = SparseCFGCache(lcp_problem(program), build_supergraph(program, ["main"]))
    assert set(next_use(cache, "main", sym("a"), 2)) == {3, 4}


def test_cache_builds_each_graph_once(monkeypatch):
    built = []
    import sparseide.sparse as sp
    real = sp.build_sparse_cfg

    def spy(proc, d, problem, index=None):
        built.append((proc.name, d))
        return real(proc, d, problem, index)

    monkeypatch.setattr(sp, "build_sparse_cfg", spy)
    for case in load_corpus():
        built.clear()
        _, solver = run(case.source, "sparse")
        assert len(built) == len(set(built)) == solver.cache.build_count
        assert solver.stats.sparse_cfg_count == solver.cache.build_count


def test_dot_export():
    _, proc, problem = example()
    dot = build_sparse_cfg(proc, sym("a"), problem).to_dot()
    assert dot.startswith('digraph "main:a"') and "n1 -> n2;" in dot
    vm, solver = run(EXAMPLE, "sparse")
    edges = path_edges_to_dot(solver.jump, solver.sg, "main")
    assert edges.count("->") == len(solver.jump)


# -- soundness of the reduction -------------------------------------------------------

def symbols_of(program):
    out = [ZERO, ret_symbol("main"), static_field("K", "s")]
    for n in "abco":
        out.append(local("main", n))
        out += [field_ap("main", n, f) for f in "fg"]
        out += [array_elem("main", n, i) for i in range(4)]
    return out


def brute_force_retained(proc, d, problem):
    index = ProcedureIndex(proc, problem)
    keep = set(index.skeleton)
    for pos, s in enumerate(proc.statements, 1):
        if isinstance(s, Call):
            if problem.call_affects(s, d):
                keep.add(pos)
        elif not is_identity_flow(s, d, problem):
            keep.add(pos)
        elif d == problem.zero and problem.is_generator(s):
            keep.add(pos)
    return sorted(keep)


def first_retained_successors(cfg, retained, pos):
    out, seen, todo = set(), set(), deque(cfg.succ[pos])
    while todo:
        n = todo.popleft()
        if n in seen:
            continue
        seen.add(n)
        if n in retained:
            out.add(n)
        else:
            todo.extend(cfg.succ[n])
    return out


@settings(max_examples=150, deadline=None)
@given(st.lists(STATEMENT_FORMS, max_size=14), st.sampled_from(["lcp", "taint"]))
def test_sparse_cfg_invariants(body, client):
    program = parse_program(random_program_text(body))
    proc = program["main"]
    problem = make_problem(client, program)
    cfg = build_cfg(proc)
    for d in symbols_of(program):
        g = build_sparse_cfg(proc, d, problem)
        kept = g.retained_set
        assert {0, proc.exit} <= kept
        for pos in range(1, proc.exit):
            if pos not in kept:
                s = proc.statements[pos - 1]
                assert is_identity_flow(s, d, problem)
                assert is_identity_transformer(s, d, problem)
        # indexed candidates give the same answer as a full scan
        assert g.retained == brute_force_retained(proc, d, problem)
        for pos in g.retained:
            assert set(g.successors(pos)) == first_retained_successors(cfg, kept, pos)


@settings(max_examples=80, deadline=None)
@given(st.lists(STATEMENT_FORMS, max_size=14))
def test_taint_retention_is_a_subset_of_lcp(body):
    program = parse_program(random_program_text(body))
    proc = program["main"]
    lcp, taint = lcp_problem(program), taint_problem(program)
    for d in symbols_of(program):
        t = set(retained_positions(proc, d, taint))
        assert t <= set(retained_positions(proc, d, lcp))
        if d == ZERO:
            continue  # Λ is governed by the generator rule
        # for the binary domain the value conditions add nothing
        for pos in range(1, proc.exit):
            s = proc.statements[pos - 1]
            if not isinstance(s, Call) and not is_identity_transformer(s, d, taint):
                assert not is_identity_flow(s, d, taint)


@settings(max_examples=150, deadline=None)
@given(st.lists(STATEMENT_FORMS, max_size=14), st.sampled_from(["lcp", "taint"]))
def test_sparse_equals_dense_on_random_programs(body, client):
    text = random_program_text(body)
    dense, ds = run(text, "dense", client)
    sparse, ss = run(text, "sparse", client)
    assert diff_value_maps(dense.sg.program, dense, sparse) == []
    for pos in range(dense.sg.program["main"].node_count):
        for d in symbols_of(dense.sg.program):
            assert dense.value_after(("main", pos), d) == sparse.value_after(("main", pos), d)
    assert ss.stats.propagations <= ds.stats.propagations


# -- value recovery at skipped nodes ----------------------------------------------------

def test_resolve_at_skipped_node():
    vm, solver = run(EXAMPLE, "sparse")
    assert resolve_value_at(("main", 3), sym("a"), vm, solver.cache) == 3
    assert ("main", 3) not in {n for n, d in vm.values if d == sym("a")}


def test_resolve_at_retained_node_is_stored_value():
    vm, solver = run(EXAMPLE, "sparse")
    assert resolve_value_at(("main", 5), sym("b"), vm, solver.cache) == vm.stored(("main", 5), sym("b"))
    assert vm.get(("main", 5), sym("b")) == 4


def test_resolve_before_definition_is_top():
    vm, solver = run(EXAMPLE, "sparse")
    assert resolve_value_at(("main", 0), sym("a"), vm, solver.cache) is TOP


def test_unknown_statement():
    vm, _ = run(EXAMPLE, "sparse")
    with pytest.raises(KeyError):
        vm.get(("main", 42), sym("a"))


def test_fewer_propagations_than_dense():
    text = proc_text("a = 3; b = a; c = 7; d = 8; e = 9; c = b + 1")
    _, dense = run(text, "dense")
    _, sparse = run(text, "sparse")
    assert sparse.stats.propagations < dense.stats.propagations
    a_nodes = {n for n, row in sparse.jump.by_node.items() for d2, _ in row if d2 == sym("a")}
    # b = a, then the implicit return and the exit
    assert a_nodes == {("main", 2), ("main", 7), ("main", 8)}


def test_increment_retains_both_statements():
    vm, solver = run(proc_text("a = 3; a = a + 1"), "sparse")
    assert at_exit(vm, "a") == 4
    assert {1, 2} <= solver.cache.get("main", sym("a")).retained_set


def test_taint_generator_skipped_for_its_target():
    # under taint `a = 3` is an identity for a, yet it creates a from Λ
    text = proc_text("a = 3; a = a + 1; b = a")
    for client in ("lcp", "taint"):
        dense, _ = run(text, "dense", client)
        sparse, _ = run(text, "sparse", client)
        assert diff_value_maps(dense.sg.program, dense, sparse) == []
    sparse, _ = run(text, "sparse", "taint")
    assert sparse.value_after(("main", 1), sym("a")) is BOTTOM
    assert sparse.get(("main", 3), sym("a")) is BOTTOM
