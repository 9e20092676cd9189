"""Synthetic stress programs with a tunable share of irrelevant statements.

Each procedure owns one queried local ``q`` (the parameter, for callees)
that forms a live def-use chain of mostly constant assignments, some linear
updates and calls. The remaining statements shuffle values between a pool
of decoy locals ``z*`` and the fields of a decoy object ``zo``. Decoys are
never initialized from a constant, so no data-flow fact ever reaches them:
every decoy statement is an identity for every fact the solvers track.

The call graph is layered: ``main`` sits in layer 0 and every procedure in
layer ``k`` is called from layer ``k - 1``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from ..ir import Program, parse_program


@dataclass(frozen=True)
class GeneratorParams:
    procs: int = 10
    stmts: int = 100
    rho: float = 0.5
    depth: int = 3
    branch_density: float = 0.02
    seed: int = 0
    calls_per_proc: int = 2

    def validate(self) -> None:
        if self.procs < 1:
            raise ValueError("procs must be at least 1")
        if self.stmts < 4:
            raise ValueError("stmts must be at least 4")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if not 0.0 <= self.branch_density <= 0.25:
            raise ValueError("branch_density must lie in [0, 0.25]")
        if self.calls_per_proc < 0:
            raise ValueError("calls_per_proc must be non-negative")

    @property
    def total_statements(self) -> int:
        return self.procs * self.stmts


@dataclass
class GeneratedProgram:
    params: GeneratorParams
    text: str
    queries: list[tuple[str, str, str]]

    @property
    def program(self) -> Program:
        return parse_program(self.text)


def _layers(params: GeneratorParams) -> list[list[str]]:
    names = ["main"] + [f"p{i}" for i in range(1, params.procs)]
    depth = max(1, min(params.depth, len(names) - 1)) if len(names) > 1 else 0
    layers: list[list[str]] = [["main"]]
    rest = names[1:]
    for k in range(depth):
        chunk = rest[k::depth]
        if chunk:
            layers.append(chunk)
    return layers


def _call_plan(params: GeneratorParams, rng: random.Random) -> dict[str, list[str]]:
    layers = _layers(params)
    plan: dict[str, list[str]] = {n: [] for layer in layers for n in layer}
    for upper, lower in zip(layers, layers[1:]):
        # every callee gets at least one caller, then top up randomly
        for i, callee in enumerate(lower):
            plan[upper[i % len(upper)]].append(callee)
        for caller in upper:
            while len(plan[caller]) < params.calls_per_proc:
                plan[caller].append(rng.choice(lower))
    return plan


def _small(rng: random.Random) -> int:
    return rng.randint(1, 9)


def _procedure(name: str, params: GeneratorParams, callees: list[str],
               rng: random.Random) -> list[str]:
    n_branch = int(params.stmts * params.branch_density)
    n_plain = params.stmts - 2 * n_branch - 1  # minus branches, labels, return
    n_plain = max(n_plain, 1)
    n_decoy = round(params.rho * n_plain)
    decoy_slots = set(rng.sample(range(n_plain), n_decoy))
    n_live = n_plain - n_decoy
    k = max(2, math.ceil(n_decoy / 5))
    decoys = [f"z{i}" for i in range(k)]
    fields = ("g0", "g1")
    has_param = name != "main"

    # calls go into live slots when there are any, otherwise into decoy slots
    live_positions = [i for i in range(n_plain) if i not in decoy_slots]
    pool = live_positions if live_positions else sorted(decoy_slots)
    call_at: dict[int, str] = {}
    if callees and pool:
        spots = sorted(rng.sample(pool, min(len(callees), len(pool))))
        call_at = dict(zip(spots, callees))

    body: list[str] = []
    made_object = False
    for i in range(n_plain):
        if i in call_at:
            callee = call_at[i]
            if i in decoy_slots:
                body.append(f"call {callee}({rng.choice(decoys)})")
            else:
                body.append(f"q = call {callee}(q)")
            continue
        if i in decoy_slots:
            r = rng.random()
            zi, zj = rng.choice(decoys), rng.choice(decoys)
            if not made_object and r >= 0.7:
                body.append("zo = new")
                made_object = True
            elif r < 0.45:
                body.append(f"{zi} = {zj} + {_small(rng)}")
            elif r < 0.7:
                body.append(f"{zi} = {zj}")
            elif r < 0.85:
                body.append(f"zo.{rng.choice(fields)} = {zi}")
            else:
                body.append(f"{zi} = zo.{rng.choice(fields)}")
            continue
        r = rng.random()
        if r < 0.8:
            body.append(f"q = {_small(rng)}")
        elif r < 0.9:
            body.append(f"q = q + {_small(rng)}")
        else:
            body.append(f"q = q * {rng.randint(2, 3)}")
    # forward-only branches: "if * goto Lk" with its label a few lines later
    for b in range(n_branch):
        at = rng.randrange(len(body) + 1)
        span = rng.randint(1, 8)
        label = f"L{b}"
        body.insert(at, f"if * goto {label}")
        body.insert(min(at + 1 + span, len(body)), f"{label}:")
    body.append("return q")
    header = f"proc {name}(q) {{" if has_param else f"proc {name}() {{"
    return [header] + [f"  {line}" for line in body] + ["}"]


def generate_program(params: GeneratorParams) -> GeneratedProgram:
    """Deterministic program text for ``params``; queries are ``q`` at exits."""
    params.validate()
    rng = random.Random(params.seed)
    plan = _call_plan(params, rng)
    lines: list[str] = []
    queries = []
    for name in plan:
        lines.extend(_procedure(name, params, plan[name], rng))
        queries.append((name, "exit", "q"))
    for name in ["main"] + [f"p{i}" for i in range(1, params.procs)]:
        if name not in plan:
            # more procedures than layers can hold never happens, kept for safety
            lines.extend(_procedure(name, params, [], rng))
    return GeneratedProgram(params, "\n".join(lines) + "\n", queries)
