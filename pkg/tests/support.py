"""Small helpers shared by the test modules."""

from sparseide.bench.stats import run_solver
from sparseide.ir import build_supergraph, parse_program
from sparseide.lcp.problem import make_problem
from sparseide.lcp.symbols import local


def proc_text(body: str, name: str = "main", params: str = "") -> str:
    lines = [s.strip() for s in body.replace(";", "\n").splitlines() if s.strip()]
    return f"proc {name}({params}) {{\n" + "\n".join(f"  {s}" for s in lines) + "\n}\n"


def run(text: str, mode: str = "dense", client: str = "lcp", entries=("main",)):
    """Parse and solve; returns ``(value map, solver)``."""
    program = parse_program(text, allow_nonlinear=True)
    sg = build_supergraph(program, entries)
    problem = make_problem(client, program)
    vm, _, solver = run_solver(problem, sg, mode, entries)
    return vm, solver


def at_exit(vm, name: str, proc: str = "main"):
    p = vm.sg.program[proc]
    return vm.get((proc, p.exit), local(proc, name))


# -- hypothesis strategies for the edge-function family -------------------------

from hypothesis import strategies as st  # noqa: E402

from sparseide.lcp import values as V  # noqa: E402

small = st.integers(-1000, 1000)
lattice_values = st.one_of(st.just(V.TOP), st.just(V.BOTTOM), small)
edge_functions = st.one_of(
    st.sampled_from([V.ALL_TOP, V.ALL_BOTTOM, V.IDENTITY]),
    st.builds(V.Constant, small),
    st.builds(V.Linear, st.integers(-20, 20).filter(bool), small),
)


def check_compose_exact(f1, f2, l):
    assert V.compose(f1, f2).apply(l) == f2.apply(f1.apply(l))


def check_meet_sound(f1, f2, l):
    m = V.meet_edge(f1, f2)
    pointwise = V.meet_value(f1.apply(l), f2.apply(l))
    assert V.leq_value(m.apply(l), pointwise)
    exact = m is not V.ALL_BOTTOM or V.ALL_BOTTOM in (f1, f2) or (
        type(f1) is V.Constant and type(f2) is V.Constant)
    if exact:
        assert m.apply(l) == pointwise


def check_lattice_laws(a, b, c):
    meet = V.meet_value
    assert meet(a, b) == meet(b, a)
    assert meet(meet(a, b), c) == meet(a, meet(b, c))
    assert meet(a, a) == a
    assert meet(V.TOP, a) == a
    assert meet(V.BOTTOM, a) is V.BOTTOM


NAMES = st.sampled_from(["a", "b", "c", "o"])
INTS = st.integers(-50, 50)

STATEMENT_FORMS = st.one_of(
    st.builds(lambda t, v: f"{t} = {v}", NAMES, INTS),
    st.builds(lambda t, s: f"{t} = {s}", NAMES, NAMES),
    st.builds(lambda t, s, op, v: f"{t} = {s} {op} {v}", NAMES, NAMES,
              st.sampled_from("+-*"), INTS),
    st.builds(lambda t, s, v: f"{t} = {s} / {v}", NAMES, NAMES, st.integers(1, 9)),
    st.builds(lambda t: f"{t} = new", NAMES),
    st.builds(lambda b, s: f"{b}.f = {s}", NAMES, NAMES),
    st.builds(lambda t, b: f"{t} = {b}.g", NAMES, NAMES),
    st.builds(lambda s: f"@K.s = {s}", NAMES),
    st.builds(lambda t: f"{t} = @K.s", NAMES),
    st.builds(lambda b, i, s: f"{b}[{i}] = {s}", NAMES, st.integers(0, 3), NAMES),
    st.builds(lambda t, b, i: f"{t} = {b}[{i}]", NAMES, NAMES, st.integers(0, 3)),
    st.builds(lambda t, a: f"{t} = call g({a})", NAMES, NAMES),
    st.builds(lambda a: f"call g({a})", NAMES),
    st.sampled_from(["if * goto L0", "if a goto L1", "goto L1", "nop", "return", "return b"]),
)

CALLEE_G = "proc g(x) {\n  return x\n}\n"


def random_program_text(body):
    """``main`` wrapped around ``body`` with labels L0/L1 defined, plus ``g``."""
    return proc_text("\n".join(["L0:"] + list(body) + ["L1:"])) + CALLEE_G
