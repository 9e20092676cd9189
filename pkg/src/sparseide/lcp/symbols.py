"""Program symbols: the fact domain shared by the clients.

A symbol is a small named tuple so that it hashes fast and compares
structurally. Locals, field access paths and array elements are scoped by
the procedure that owns their base local; statics are global.
"""

from __future__ import annotations

import re
from typing import NamedTuple, Union

LAMBDA = "lambda"
LOCAL = "local"
FIELD = "field"
STATIC = "static"
ARRAY = "array"

HEAP_KINDS = frozenset({FIELD, STATIC, ARRAY})


class Symbol(NamedTuple):
    kind: str
    scope: str = ""
    name: str = ""
    member: Union[str, int, None] = None

    def __str__(self) -> str:
        if self.kind == LAMBDA:
            return "Λ"
        if self.kind == LOCAL:
            return self.name
        if self.kind == FIELD:
            return f"{self.name}.{self.member}"
        if self.kind == STATIC:
            return f"@{self.name}.{self.member}"
        return f"{self.name}[{self.member}]"

    @property
    def is_heap(self) -> bool:
        return self.kind in HEAP_KINDS

    @property
    def base(self) -> "Symbol":
        """The local an access path hangs off (itself for locals)."""
        if self.kind in (FIELD, ARRAY):
            return Symbol(LOCAL, self.scope, self.name)
        return self

    def rebase(self, scope: str, name: str) -> "Symbol":
        """Same field or element on a different base local."""
        return Symbol(self.kind, scope, name, self.member)


ZERO = Symbol(LAMBDA)
RET = "$ret"

# the generated NamedTuple constructor is a Python-level function; the
# helpers below sit on hot paths, so they build the tuple directly
_make = tuple.__new__


def local(proc: str, name: str) -> Symbol:
    return _make(Symbol, (LOCAL, proc, name, None))


def field_ap(proc: str, base: str, fld: str) -> Symbol:
    return _make(Symbol, (FIELD, proc, base, fld))


def static_field(cls: str, fld: str) -> Symbol:
    return _make(Symbol, (STATIC, "", cls, fld))


def array_elem(proc: str, base: str, index: int) -> Symbol:
    return _make(Symbol, (ARRAY, proc, base, index))


def ret_symbol(proc: str) -> Symbol:
    return _make(Symbol, (LOCAL, proc, RET, None))


def is_heap(sym: Symbol) -> bool:
    return sym.kind in HEAP_KINDS


_SYM = re.compile(r"^(?:@(\w+)\.(\w+)|(\$?\w+)\.(\w+)|(\$?\w+)\[(-?\d+)\]|(\$?\w+))$")


def parse_symbol(proc: str, text: str) -> Symbol:
    """Inverse of ``str``: ``x``, ``x.f``, ``@C.f``, ``x[2]`` or ``Λ``."""
    text = text.strip()
    if text in ("Λ", "lambda", "LAMBDA"):
        return ZERO
    m = _SYM.match(text)
    if not m:
        raise ValueError(f"not a symbol: {text!r}")
    cls, sfld, base, fld, abase, idx, name = m.groups()
    if cls:
        return static_field(cls, sfld)
    if base:
        return field_ap(proc, base, fld)
    if abase:
        return array_elem(proc, abase, int(idx))
    return local(proc, name)
