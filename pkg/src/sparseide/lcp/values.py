"""The flat integer lattice and the linear edge-function family.

Lattice values are ``TOP``, ``BOTTOM`` or a plain ``int``. Edge functions
are immutable objects with ``apply``; composition and meet live in module
level functions so both arguments are visible at once.
"""

from __future__ import annotations

import logging

log = logging.getLogger(__name__)

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


class _Extreme:
    __slots__ = ("_name",)

    def __init__(self, name: str):
        self._name = name

    def __repr__(self) -> str:
        return self._name

    def __reduce__(self):
        return self._name


TOP = _Extreme("TOP")
BOTTOM = _Extreme("BOTTOM")


def is_const(v) -> bool:
    return v is not TOP and v is not BOTTOM


def meet_value(l1, l2):
    if l1 is TOP:
        return l2
    if l2 is TOP:
        return l1
    if l1 is BOTTOM or l2 is BOTTOM:
        return BOTTOM
    return l1 if l1 == l2 else BOTTOM


def leq_value(l1, l2) -> bool:
    """``l1 ⊑ l2`` in the flat order (⊥ lowest)."""
    return meet_value(l1, l2) == l1


def format_value(v) -> str:
    if v is TOP:
        return "T"
    if v is BOTTOM:
        return "B"
    return str(v)


def parse_value(text):
    text = str(text).strip()
    if text in ("T", "top", "TOP", "⊤"):
        return TOP
    if text in ("B", "bottom", "BOTTOM", "⊥"):
        return BOTTOM
    return int(text)


def _checked(v: int, what: str):
    if INT_MIN <= v <= INT_MAX:
        return v
    log.warning("integer overflow in %s, value widened to bottom", what)
    return None


def _trunc_div(v: int, k: int) -> int:
    q = abs(v) // abs(k)
    return q if (v >= 0) == (k > 0) else -q


# ---------------------------------------------------------------------------
# Edge functions


class EdgeFunction:
    __slots__ = ()

    def apply(self, l):
        raise NotImplementedError


class _AllTop(EdgeFunction):
    __slots__ = ()

    def apply(self, l):
        return TOP

    def __repr__(self) -> str:
        return "AllTop"


class _AllBottom(EdgeFunction):
    __slots__ = ()

    def apply(self, l):
        return BOTTOM

    def __repr__(self) -> str:
        return "AllBottom"


class _Identity(EdgeFunction):
    __slots__ = ()

    def apply(self, l):
        return l

    def __repr__(self) -> str:
        return "Identity"


ALL_TOP = _AllTop()
ALL_BOTTOM = _AllBottom()
IDENTITY = _Identity()


class Constant(EdgeFunction):
    __slots__ = ("c",)

    def __init__(self, c: int):
        self.c = c

    def apply(self, l):
        return self.c

    def __eq__(self, other):
        return type(other) is Constant and other.c == self.c

    def __hash__(self):
        return hash(("C", self.c))

    def __repr__(self) -> str:
        return f"Constant({self.c})"


class Linear(EdgeFunction):
    """``λl. m·l + b`` with ``m ≠ 0``.

    The constructor normalizes: ``Linear(1, 0)`` is ``IDENTITY`` and a zero
    slope collapses to ``Constant(b)``.
    """

    __slots__ = ("m", "b")

    def __new__(cls, m: int, b: int):
        if m == 1 and b == 0:
            return IDENTITY
        if m == 0:
            return Constant(b)
        return super().__new__(cls)

    def __init__(self, m: int, b: int):
        self.m = m
        self.b = b

    def apply(self, l):
        if l is TOP or l is BOTTOM:
            return l
        v = _checked(self.m * l + self.b, "linear apply")
        return BOTTOM if v is None else v

    def __eq__(self, other):
        return type(other) is Linear and other.m == self.m and other.b == self.b

    def __hash__(self):
        return hash(("L", self.m, self.b))

    def __repr__(self) -> str:
        return f"Linear({self.m}, {self.b})"


class Div(EdgeFunction):
    """Integer division by a nonzero literal, truncating toward zero."""

    __slots__ = ("k",)

    def __new__(cls, k: int):
        if k == 0:
            raise ValueError("division by zero")
        if k == 1:
            return IDENTITY
        if k == -1:
            return Linear(-1, 0)
        return super().__new__(cls)

    def __init__(self, k: int):
        self.k = k

    def apply(self, l):
        if l is TOP or l is BOTTOM:
            return l
        return _trunc_div(l, self.k)

    def __eq__(self, other):
        return type(other) is Div and other.k == self.k

    def __hash__(self):
        return hash(("D", self.k))

    def __repr__(self) -> str:
        return f"Div({self.k})"


def compose(f1: EdgeFunction, f2: EdgeFunction) -> EdgeFunction:
    """``f2 ∘ f1``: apply ``f1`` first, then ``f2``."""
    if f1 is IDENTITY:
        return f2
    if f2 is IDENTITY:
        return f1
    t2 = type(f2)
    if t2 is Constant or f2 is ALL_TOP or f2 is ALL_BOTTOM:
        return f2
    # f2 is Linear or Div from here on
    if f1 is ALL_TOP:
        return ALL_TOP
    if f1 is ALL_BOTTOM:
        return ALL_BOTTOM
    t1 = type(f1)
    if t1 is Constant:
        v = f2.apply(f1.c)
        return ALL_BOTTOM if v is BOTTOM else Constant(v)
    if t1 is Linear and t2 is Linear:
        m = _checked(f2.m * f1.m, "linear compose")
        b = _checked(f2.m * f1.b + f2.b, "linear compose")
        if m is None or b is None:
            return ALL_BOTTOM
        return Linear(m, b)
    # anything involving Div that is not evaluated in place
    return ALL_BOTTOM


def meet_edge(f1: EdgeFunction, f2: EdgeFunction) -> EdgeFunction:
    if f1 is ALL_TOP:
        return f2
    if f2 is ALL_TOP:
        return f1
    if f1 == f2:
        return f1
    return ALL_BOTTOM


def apply(f: EdgeFunction, l):
    return f.apply(l)


# Height of the family ordered by meet: ⊤ > {Identity, Constant, Linear, Div} > ⊥
CHAIN_HEIGHT = 3


def binop_edge(op: str, c: int) -> EdgeFunction:
    """Edge function for ``a = b op c``."""
    if op == "+":
        return Linear(1, c)
    if op == "-":
        return Linear(1, -c)
    if op == "*":
        return Linear(c, 0)
    if op == "/":
        return Div(c)
    raise ValueError(f"unknown operator {op!r}")


def eval_binop(op: str, v: int, c: int) -> int:
    """Concrete semantics shared with the oracle interpreter."""
    if op == "+":
        return v + c
    if op == "-":
        return v - c
    if op == "*":
        return v * c
    if op == "/":
        return _trunc_div(v, c)
    raise ValueError(f"unknown operator {op!r}")
