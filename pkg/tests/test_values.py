import logging

import pytest
from hypothesis import given, settings, strategies as st

from sparseide.lcp.values import (ALL_BOTTOM, ALL_TOP, BOTTOM, IDENTITY, INT_MAX, TOP, Constant,
                                  Div, Linear, binop_edge, compose, format_value, meet_edge,
                                  meet_value, parse_value)

from support import (check_compose_exact, check_lattice_laws, check_meet_sound, edge_functions,
                     lattice_values, small)


@settings(max_examples=500)
@given(edge_functions, edge_functions, lattice_values)
def test_compose_exact(f1, f2, l):
    check_compose_exact(f1, f2, l)


@settings(max_examples=500)
@given(edge_functions, edge_functions, lattice_values)
def test_meet_sound(f1, f2, l):
    check_meet_sound(f1, f2, l)


@settings(max_examples=500)
@given(lattice_values, lattice_values, lattice_values)
def test_lattice_laws(a, b, c):
    check_lattice_laws(a, b, c)


@given(st.integers(-100, 100), st.integers(-100, 100))
def test_linear_normalization(m, b):
    f = Linear(m, b)
    if (m, b) == (1, 0):
        assert f is IDENTITY
    elif m == 0:
        assert f == Constant(b)
    else:
        assert isinstance(f, Linear) and f.m != 0
    assert not (isinstance(f, Linear) and (f.m, f.b) == (1, 0))


@pytest.mark.parametrize("f1, f2, want", [
    (Constant(3), Linear(2, 1), Constant(7)),
    (IDENTITY, Linear(5, 2), Linear(5, 2)),
    (Linear(5, 2), IDENTITY, Linear(5, 2)),
    (Linear(2, 0), Linear(3, 1), Linear(6, 1)),
    (Linear(2, 0), Constant(9), Constant(9)),
    (ALL_BOTTOM, Linear(2, 1), ALL_BOTTOM),
    (Constant(4), ALL_TOP, ALL_TOP),
])
def test_compose_examples(f1, f2, want):
    assert compose(f1, f2) == want


@pytest.mark.parametrize("f1, f2, want", [
    (ALL_TOP, Linear(2, 1), Linear(2, 1)),
    (Constant(5), Constant(5), Constant(5)),
    (Constant(1), Constant(2), ALL_BOTTOM),
    (IDENTITY, Constant(2), ALL_BOTTOM),
    (Linear(2, 1), Linear(2, 2), ALL_BOTTOM),
    (ALL_BOTTOM, IDENTITY, ALL_BOTTOM),
])
def test_meet_edge_examples(f1, f2, want):
    assert meet_edge(f1, f2) == want


@pytest.mark.parametrize("a, b, want", [
    (TOP, 5, 5), (BOTTOM, 5, BOTTOM), (3, 3, 3), (3, 4, BOTTOM), (TOP, TOP, TOP),
])
def test_meet_value_examples(a, b, want):
    assert meet_value(a, b) == want


@pytest.mark.parametrize("f, l, want", [
    (IDENTITY, 9, 9), (Linear(2, 1), 3, 7), (Constant(4), BOTTOM, 4),
    (Linear(2, 1), TOP, TOP), (Linear(2, 1), BOTTOM, BOTTOM), (ALL_TOP, 1, TOP),
    (ALL_BOTTOM, 1, BOTTOM),
])
def test_apply_examples(f, l, want):
    assert f.apply(l) == want


def test_binop_edges():
    assert binop_edge("+", 1) == Linear(1, 1)
    assert binop_edge("-", 4) == Linear(1, -4)
    assert binop_edge("*", 3) == Linear(3, 0)
    assert binop_edge("*", 0) == Constant(0)
    assert binop_edge("/", 1) is IDENTITY


@given(small, st.integers(-9, 9).filter(lambda k: k not in (0,)))
def test_division_truncates_toward_zero(v, k):
    got = binop_edge("/", k).apply(v)
    assert got == int(v / k)
    assert compose(Constant(v), binop_edge("/", k)) == Constant(int(v / k))


@given(st.builds(Linear, st.integers(-5, 5).filter(bool), small), small,
       st.integers(2, 9))
def test_division_after_non_constant_is_sound(f, l, k):
    # not exact, but never claims a wrong constant
    g = compose(f, Div(k))
    got = g.apply(l)
    assert got is BOTTOM or got == Div(k).apply(f.apply(l))


def test_overflow_widens_to_bottom(caplog):
    with caplog.at_level(logging.WARNING):
        assert Linear(2, 0).apply(INT_MAX) is BOTTOM
        assert compose(Linear(2 ** 40, 0), Linear(2 ** 40, 0)) is ALL_BOTTOM
    assert "overflow" in caplog.text


def test_value_text_forms():
    assert [format_value(v) for v in (TOP, BOTTOM, -3)] == ["T", "B", "-3"]
    assert parse_value("top") is TOP and parse_value("bottom") is BOTTOM
    assert parse_value("12") == 12
