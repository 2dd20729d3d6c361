"""Shared fixtures: the example schemes, a deterministic scheme
generator for corpus-based properties, and slow oracle helpers."""

from __future__ import annotations

import random
from functools import lru_cache
from pathlib import Path

import pytest

from hors import (
    GROUND,
    Arrow,
    EvalBudget,
    Rule,
    Scheme,
    Symbol,
    Term,
    arrow,
    bottom_transform,
    derive,
    nonterminal,
    parse,
    terminal,
    truncate,
    variable,
)

SCHEMES_DIR = Path(__file__).resolve().parent.parent / "schemes"


@lru_cache(maxsize=None)
def load_scheme(name: str) -> Scheme:
    return parse((SCHEMES_DIR / name).read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def order3():
    """Order-3 scheme with value tree  a <infinite b-tree> ⊥ c."""
    return load_scheme("order3.hors")


@pytest.fixture(scope="session")
def separating():
    """Order-1 scheme with OI value c and IO value ⊥."""
    return load_scheme("separating.hors")


@pytest.fixture(scope="session")
def dropper():
    """Mini analysis scheme: S -> F H, F x -> c, H -> a H."""
    return load_scheme("dropper.hors")


# ---------------------------------------------------------------------------
# Deterministic scheme generator

O = GROUND
OO = arrow(O, O)

# Non-terminal types of order <= 2 whose parameter types stay enumerable,
# so the same corpus serves the engine and the analysis.
_NT_TYPES = [O, OO, arrow(O, O, O), arrow(OO, O), arrow(OO, O, O)]

_TERMINALS = {
    "a": terminal("a", OO),
    "b": terminal("b", arrow(O, O, O)),
    "c": terminal("c", O),
    "d": terminal("d", O),
}


def _var_pool() -> dict:
    return {}


def _var_for(variables: dict, ty, index: int) -> Symbol:
    base = "x" if ty == O else "f"
    name = f"{base}{index + 1}"
    if name not in variables:
        variables[name] = variable(name, ty)
    if variables[name].type != ty:
        name = f"{base}{index + 1}_"
        variables[name] = variable(name, ty)
    return variables[name]


def _arg_types(ty):
    out = []
    while isinstance(ty, Arrow):
        out.append(ty.argument)
        ty = ty.result
    return out


def _candidates(symbols, target):
    out = []
    for sym in symbols:
        remaining = sym.type
        j = 0
        while True:
            if remaining == target:
                out.append((sym, j))
            if not isinstance(remaining, Arrow):
                break
            remaining = remaining.result
            j += 1
    return out


def _gen_term(rng: random.Random, symbols, target, depth) -> Term:
    cands = _candidates(symbols, target)
    assert cands, f"no candidate for target {target}"
    if depth <= 0:
        leaves = [cd for cd in cands if cd[1] == 0]
        sym, j = rng.choice(leaves) if leaves else min(cands, key=lambda cd: cd[1])
    else:
        sym, j = rng.choice(cands)
    args = []
    remaining = sym.type
    for _ in range(j):
        args.append(_gen_term(rng, symbols, remaining.argument, depth - 1))
        remaining = remaining.result
    return Term(sym, tuple(args))


@lru_cache(maxsize=None)
def gen_scheme(seed: int) -> Scheme:
    """A valid scheme of order <= 2 with at most 5 non-terminals."""
    rng = random.Random(seed)
    n_extra = rng.randint(1, 4)
    nonterminals = {"S": nonterminal("S", O)}
    for i in range(n_extra):
        name = f"N{i + 1}"
        nonterminals[name] = nonterminal(name, rng.choice(_NT_TYPES))
    variables: dict[str, Symbol] = {}
    rules = {}
    for name, nt in nonterminals.items():
        params = []
        counts: dict = {}
        for ty in _arg_types(nt.type):
            idx = counts.get(repr(ty), 0)
            counts[repr(ty)] = idx + 1
            params.append(_var_for(variables, ty, idx))
        scope = list(_TERMINALS.values()) + list(nonterminals.values()) + params
        body = _gen_term(rng, scope, O, rng.randint(2, 3))
        rules[name] = Rule(nt, tuple(params), body)
    return Scheme(
        terminals=dict(_TERMINALS),
        nonterminals=nonterminals,
        variables=variables,
        rules=rules,
        start=nonterminals["S"],
    ).check()


CORPUS_SEEDS = tuple(range(1, 18))


@pytest.fixture(scope="session")
def corpus(order3, separating, dropper):
    """>= 20 schemes: the three example schemes plus generated ones."""
    return [order3, separating, dropper] + [gen_scheme(seed) for seed in CORPUS_SEEDS]


@pytest.fixture(scope="session")
def analysis_corpus(separating, dropper):
    """Schemes whose parameter types the analysis can enumerate."""
    out = [separating, dropper, twice_scheme(), applier_scheme()]
    out += [g for g in (gen_scheme(seed) for seed in CORPUS_SEEDS) if _analysis_safe(g)]
    return out


def _analysis_safe(g: Scheme) -> bool:
    return all(
        all(ty in (O, OO) for ty in _arg_types(nt.type))
        for nt in g.nonterminals.values()
    )


@lru_cache(maxsize=None)
def twice_scheme() -> Scheme:
    """Order-2 scheme with a finite IO value tree: S -> Twice A c."""
    return parse(
        """
        terminal b : o -> o -> o
        terminal c : o
        nonterminal S : o
        nonterminal Twice : (o -> o) -> o -> o
        nonterminal A : o -> o
        var f : o -> o
        var x : o
        var y : o
        start S
        rule S = Twice A c
        rule Twice f x = f (f x)
        rule A y = b y y
        """
    )


@lru_cache(maxsize=None)
def applier_scheme() -> Scheme:
    """The labeling example signature: F : (o -> o) -> o applied to H : o -> o."""
    return parse(
        """
        terminal a : o -> o
        terminal c : o
        nonterminal S : o
        nonterminal F : (o -> o) -> o
        nonterminal H : o -> o
        var f : o -> o
        var x : o
        start S
        rule S = F H
        rule F f = f c
        rule H x = a (H x)
        """
    )


# ---------------------------------------------------------------------------
# Slow oracles


def naive_value_tree(g: Scheme, policy: str, budget: EvalBudget):
    """Value tree via the trace-producing deriver: truncate the final term's
    bottom-transform.  Slow but entirely independent of the fast evaluator."""
    trace = derive(g, g.start_term(), policy, budget)
    final = trace.terms[-1] if trace.terms else g.start_term()
    return truncate(bottom_transform(final), budget.depth), trace.exhausted_budget
