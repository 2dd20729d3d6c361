"""Intersection-style divergence analysis over the two states q_bot, q_inf.

An atomic mapping refines a simple type: over the ground type the atoms are
the states themselves (`q_bot`: the IO value tree is bottom; `q_inf`: the
term contains a redex all of whose IO evaluations are infinite), and over an
arrow type they are `q_inf` plus arrows from conjunctions of argument atoms
to result atoms.  A conjunctive mapping is a finite set of atoms.

Judgements  env |- t |> atom  are derived by six rules:

  (Set)  t matches a conjunction iff it matches every member
  (At)   a bound symbol matches each atom of its environment entry
  (Sig)  a terminal matches s1 -> .. -> si -> q_inf for i up to its arity
         when some sj is exactly the singleton {q_inf}
  (App)  t1 t2 matches th if t1 matches s -> th and t2 matches s
  (ArrI) any arrow-typed term matches {q_inf} -> q_inf
  (InfI) t1 t2 matches q_inf if t1 does

`judge` implements these literally as a goal-directed search and is the slow,
independent route.  `Analysis` computes the greatest environment closed under
the rules (descending fixpoint from the full assignment) and evaluates term
semantics bottom-up; the two routes are checked against each other in the
test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

from .core import (
    TERMINAL,
    VARIABLE,
    Arrow,
    Ground,
    HorsError,
    SimpleType,
    Symbol,
    Term,
    argument_types,
    arity,
    type_to_str,
)
from .scheme import Scheme

# Refuse to enumerate conjunction lattices beyond this many atoms (2^n sets).
MAX_ENUM_ATOMS = 16


class AnalysisInfeasible(HorsError):
    """The enumeration the analysis needs is too large to materialize."""


class UnboundSymbol(HorsError):
    """A term mentions a symbol the environment does not cover."""


# ---------------------------------------------------------------------------
# Atoms and conjunctions


class Atom:
    """Base class of atomic mappings."""

    __slots__ = ()

    def key(self) -> tuple:
        raise NotImplementedError


class QBot(Atom):
    __slots__ = ()

    def key(self) -> tuple:
        return (0,)

    def __repr__(self) -> str:
        return "q⊥"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, QBot)

    def __hash__(self) -> int:
        return hash("q_bot")


class QInf(Atom):
    __slots__ = ()

    def key(self) -> tuple:
        return (1,)

    def __repr__(self) -> str:
        return "q∞"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, QInf)

    def __hash__(self) -> int:
        return hash("q_inf")


Q_BOT = QBot()
Q_INF = QInf()


class ArrowMap(Atom):
    __slots__ = ("argument", "result", "_key", "_hash")

    def __init__(self, argument: "Conj", result: Atom):
        self.argument = argument
        self.result = result
        self._key = (2, argument.key(), result.key())
        self._hash = hash(self._key)

    def key(self) -> tuple:
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ArrowMap) and self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"{self.argument!r}→{self.result!r}"


class Conj:
    """A canonical finite set of atoms (duplicate-free, sorted)."""

    __slots__ = ("atoms", "_key", "_keyset", "_hash")

    def __init__(self, atoms: Iterable[Atom] = ()):
        unique = {a.key(): a for a in atoms}
        ordered = tuple(unique[k] for k in sorted(unique))
        self.atoms = ordered
        # Shorter conjunctions first, then lexicographic: this puts the
        # ground conjunctions in the order {}, {q⊥}, {q∞}, {q⊥,q∞}.
        self._key = (len(ordered), tuple(a.key() for a in ordered))
        self._keyset = frozenset(unique)
        self._hash = hash(self._key)

    def key(self) -> tuple:
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Conj) and self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def __contains__(self, atom: Atom) -> bool:
        return atom.key() in self._keyset

    def __iter__(self) -> Iterator[Atom]:
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def issubset(self, other: "Conj") -> bool:
        return self._keyset <= other._keyset

    def union(self, other: "Conj") -> "Conj":
        return Conj(self.atoms + other.atoms)

    def __repr__(self) -> str:
        return "∧{" + ",".join(repr(a) for a in self.atoms) + "}"


def conj(*atoms: Atom) -> Conj:
    return Conj(atoms)


EMPTY = Conj()
CONJ_INF = conj(Q_INF)
ARROW_INF = ArrowMap(CONJ_INF, Q_INF)  # the always-true arrow atom


def atom_fits(atom: Atom, t: SimpleType) -> bool:
    """Membership of an atom in the atom set of a type."""
    if isinstance(atom, QInf):
        return True
    if isinstance(atom, QBot):
        return isinstance(t, Ground)
    if isinstance(atom, ArrowMap):
        return (
            isinstance(t, Arrow)
            and conj_fits(atom.argument, t.argument)
            and atom_fits(atom.result, t.result)
        )
    return False


def conj_fits(c: Conj, t: SimpleType) -> bool:
    return all(atom_fits(a, t) for a in c)


@lru_cache(maxsize=None)
def enum_atoms(t: SimpleType) -> tuple[Atom, ...]:
    """All atoms of a type, in canonical order."""
    if isinstance(t, Ground):
        atoms: list[Atom] = [Q_BOT, Q_INF]
    else:
        atoms = [Q_INF]
        for c in enum_conj(t.argument):
            for res in enum_atoms(t.result):
                atoms.append(ArrowMap(c, res))
    return tuple(sorted(atoms, key=lambda a: a.key()))


@lru_cache(maxsize=None)
def enum_conj(t: SimpleType) -> tuple[Conj, ...]:
    """All conjunctions over a type, in canonical order (2^#atoms of them)."""
    atoms = enum_atoms(t)
    if len(atoms) > MAX_ENUM_ATOMS:
        raise AnalysisInfeasible(
            f"type {type_to_str(t)} has {len(atoms)} atoms; enumerating its "
            f"2^{len(atoms)} conjunctions is not feasible"
        )
    out = []
    for r in range(len(atoms) + 1):
        for subset in itertools.combinations(atoms, r):
            out.append(Conj(subset))
    return tuple(sorted(out, key=lambda c: c.key()))


# ---------------------------------------------------------------------------
# Environments


class Env:
    """A finite mapping from symbol names to conjunctive mappings."""

    __slots__ = ("entries",)

    def __init__(self, entries: Mapping[str, Conj] | None = None):
        self.entries: dict[str, Conj] = dict(entries or {})

    def get(self, name: str) -> Conj | None:
        return self.entries.get(name)

    def extended(self, more: Mapping[str, Conj]) -> "Env":
        """Extension: new names are added, existing entries are conjoined."""
        out = dict(self.entries)
        for name, c in more.items():
            out[name] = out[name].union(c) if name in out else c
        return Env(out)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Env) and self.entries == other.entries

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k} ▷ {v!r}" for k, v in self.entries.items())
        return f"Env({inner})"


# ---------------------------------------------------------------------------
# Goal-directed judgement (the slow, literal route)


def _sigma_atoms(sym: Symbol) -> tuple[Atom, ...]:
    """All (Sig) conclusions for a terminal: s1 -> .. -> si -> q_inf with
    1 <= i <= arity and some sj equal to the singleton {q_inf}."""
    out: list[Atom] = []
    arg_types = argument_types(sym.type)
    for i in range(1, len(arg_types) + 1):
        for sigmas in itertools.product(*(enum_conj(ty) for ty in arg_types[:i])):
            if not any(s == CONJ_INF for s in sigmas):
                continue
            atom: Atom = Q_INF
            for s in reversed(sigmas):
                atom = ArrowMap(s, atom)
            out.append(atom)
    return tuple(out)


def _matches_sigma_rule(sym: Symbol, atom: Atom) -> bool:
    sigmas = []
    cur = atom
    while isinstance(cur, ArrowMap):
        sigmas.append(cur.argument)
        cur = cur.result
    if not isinstance(cur, QInf) or not sigmas:
        return False
    if len(sigmas) > arity(sym.type):
        return False
    return any(s == CONJ_INF for s in sigmas)


def judge(env: Env, t: Term, goal: Atom | Conj) -> bool:
    """Whether  env |- t |> goal  is derivable from the six rules.

    Application goals enumerate candidate argument conjunctions, so this is
    only feasible when every argument type in `t` has a small atom set; it is
    the independent oracle against which the compositional semantics is
    tested.
    """
    memo: dict[tuple[Term, Atom], bool] = {}

    def atom_goal(term: Term, atom: Atom) -> bool:
        key = (term, atom)
        cached = memo.get(key)
        if cached is not None:
            return cached
        memo[key] = False  # terms shrink on recursion; this is belt and braces
        result = _derive(term, atom)
        memo[key] = result
        return result

    def _derive(term: Term, atom: Atom) -> bool:
        # (ArrI)
        if isinstance(term.type, Arrow) and atom == ARROW_INF:
            return True
        if not term.args:
            sym = term.head
            entry = env.get(sym.name)
            if entry is not None and atom in entry:  # (At)
                return True
            if sym.kind == TERMINAL and _matches_sigma_rule(sym, atom):  # (Sig)
                return True
            return False
        fun = Term(term.head, term.args[:-1])
        arg = term.args[-1]
        # (InfI)
        if isinstance(atom, QInf) and atom_goal(fun, Q_INF):
            return True
        # (App)
        for sigma in enum_conj(arg.type):
            if atom_goal(fun, ArrowMap(sigma, atom)) and all(
                atom_goal(arg, a) for a in sigma
            ):
                return True
        return False

    if isinstance(goal, Conj):  # (Set)
        return all(atom_goal(t, a) for a in goal)
    return atom_goal(t, goal)


# ---------------------------------------------------------------------------
# Compositional semantics (the fast route)


def sem_apply(fun: Conj, arg: Conj, result_type: SimpleType) -> Conj:
    """Semantics of an application from the semantics of its parts.

    Collects (App) results for every arrow atom whose argument conjunction
    the argument satisfies, propagates bare q_inf (InfI), and closes under
    the always-true arrow atom when the result is of arrow type (ArrI).
    """
    out: list[Atom] = []
    for atom in fun:
        if isinstance(atom, QInf):
            out.append(Q_INF)
        elif isinstance(atom, ArrowMap) and atom.argument.issubset(arg):
            out.append(atom.result)
    if isinstance(result_type, Arrow):
        out.append(ARROW_INF)
    return Conj(out)


@lru_cache(maxsize=None)
def _terminal_semantics(sym: Symbol) -> Conj:
    base = Conj(_sigma_atoms(sym))
    if isinstance(sym.type, Arrow):
        base = base.union(conj(ARROW_INF))
    return base


def _symbol_semantics(env: Env, sym: Symbol) -> Conj:
    if sym.kind == TERMINAL:
        return _terminal_semantics(sym)
    entry = env.get(sym.name)
    if entry is None:
        raise UnboundSymbol(f"{sym.kind} {sym.name} is not in the environment")
    if isinstance(sym.type, Arrow):
        return entry.union(conj(ARROW_INF))
    return entry


class _SemWalker:
    """Bottom-up semantics with caches that survive across terms.

    `sym_cache` holds the closed symbol semantics (stable for one
    environment); `apply_cache` memoizes sem_apply on its operand pair, which
    repeats heavily when the operator enumerates parameter assignments.
    """

    def __init__(self, env: Env):
        self.env = env
        self.sym_cache: dict[str, Conj] = {}
        self.apply_cache: dict[tuple[Conj, Conj], Conj] = {}

    def symbol(self, sym: Symbol, venv: Mapping[str, Conj] | None) -> Conj:
        if sym.kind == TERMINAL:
            return _terminal_semantics(sym)
        if venv is not None and sym.name in venv:
            entry = venv[sym.name]
            if isinstance(sym.type, Arrow):
                return entry.union(conj(ARROW_INF))
            return entry
        cached = self.sym_cache.get(sym.name)
        if cached is None:
            cached = _symbol_semantics(self.env, sym)
            self.sym_cache[sym.name] = cached
        return cached

    def walk(
        self,
        t: Term,
        venv: Mapping[str, Conj] | None = None,
        memo: dict[int, Conj] | None = None,
    ) -> Conj:
        if memo is None:
            memo = {}
        cached = memo.get(id(t))
        if cached is not None:
            return cached
        sem = self.symbol(t.head, venv)
        remaining = t.head.type
        for a in t.args:
            assert isinstance(remaining, Arrow)
            arg_sem = self.walk(a, venv, memo)
            remaining = remaining.result
            key = (sem, arg_sem)
            hit = self.apply_cache.get(key)
            if hit is None:
                hit = sem_apply(sem, arg_sem, remaining)
                self.apply_cache[key] = hit
            sem = hit
        memo[id(t)] = sem
        return sem


def _term_semantics(env: Env, t: Term, memo: dict[int, Conj] | None = None) -> Conj:
    """All derivable atoms of t, computed bottom-up."""
    return _SemWalker(env).walk(t, None, memo)


# ---------------------------------------------------------------------------
# The rule operator and its greatest fixpoint


def step_F(g: Scheme, env: Env) -> Env:
    """One application of the rule operator.

    For each rule F x1..xk -> e the new entry collects
      (i)   s1 -> .. -> sk -> q      when e matches q under xi |> si,
      (ii)  s1 -> .. -> si -> q_inf  (i <= k) when some sj contains q_inf,
      (iii) s1 -> .. -> sk -> q_bot  when some sj contains q_inf.
    """
    out: dict[str, Conj] = {}
    walker = _SemWalker(env)
    for name, f in g.nonterminals.items():
        rule = g.rules.get(name)
        if rule is None:
            raise AnalysisInfeasible(
                f"non-terminal {name} has no rule; the analysis is defined "
                f"for fully ruled schemes only"
            )
        arg_types = argument_types(f.type)
        conj_spaces = [enum_conj(ty) for ty in arg_types]
        atoms: list[Atom] = []

        def chain(sigmas: tuple[Conj, ...], q: Atom) -> Atom:
            cur = q
            for s in reversed(sigmas):
                cur = ArrowMap(s, cur)
            return cur

        for sigmas in itertools.product(*conj_spaces):
            venv = {p.name: s for p, s in zip(rule.params, sigmas)}
            body_sem = walker.walk(rule.body, venv)
            for q in (Q_BOT, Q_INF):
                if q in body_sem:
                    atoms.append(chain(sigmas, q))  # (i)
            if any(Q_INF in s for s in sigmas):
                atoms.append(chain(sigmas, Q_BOT))  # (iii)
        for i in range(1, len(arg_types) + 1):
            for sigmas in itertools.product(*conj_spaces[:i]):
                if any(Q_INF in s for s in sigmas):
                    atoms.append(chain(sigmas, Q_INF))  # (ii)
        out[name] = Conj(atoms)
    return Env(out)


def initial_env(g: Scheme) -> Env:
    """The full assignment: every fitting atom for every non-terminal."""
    return Env({name: Conj(enum_atoms(f.type)) for name, f in g.nonterminals.items()})


def theta_star(g: Scheme) -> Env:
    """The greatest environment closed under the judgement rules."""
    return Analysis(g).env


class Analysis:
    """Fixpoint analysis of one scheme plus memoized term semantics.

    Not safe to share across threads: the memo table is unsynchronized.
    """

    def __init__(self, g: Scheme, max_iterations: int | None = None):
        self.scheme = g
        bound = sum(len(enum_atoms(f.type)) for f in g.nonterminals.values())
        limit = max_iterations if max_iterations is not None else bound + 1
        env = initial_env(g)
        iterations = 0
        while True:
            nxt = step_F(g, env)
            for name in env:
                if not nxt.entries[name].issubset(env.entries[name]):
                    raise AssertionError(
                        f"rule operator grew the entry of {name}; "
                        f"iteration is not descending"
                    )
            if nxt == env:
                break
            env = nxt
            iterations += 1
            if iterations > limit:
                raise AnalysisInfeasible(
                    f"fixpoint not reached within {limit} iterations"
                )
        self.env = env
        self.iterations = iterations
        self.atom_bound = bound
        self._memo: dict[tuple[Term, tuple[tuple[str, Conj], ...]], Conj] = {}
        self._walker = _SemWalker(env)

    def semantics(self, t: Term, venv: Mapping[str, Conj] | None = None) -> Conj:
        """The conjunction of all atoms derivable for t under the fixpoint
        environment extended with `venv` for the term's free variables."""
        venv = dict(venv or {})
        free = _free_variables(t)
        missing = free - set(venv)
        if missing:
            raise UnboundSymbol(
                f"term has unbound variables: {', '.join(sorted(missing))}"
            )
        key = (t, tuple(sorted((n, venv[n]) for n in free)))
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        result = self._walker.walk(t, {n: venv[n] for n in free}, {})
        self._memo[key] = result
        return result

    def nonterminal_semantics(self, name: str) -> Conj:
        sym = self.scheme.nonterminals[name]
        return self.semantics(Term(sym))


def _free_variables(t: Term) -> set[str]:
    out: set[str] = set()
    stack = [t]
    while stack:
        node = stack.pop()
        if node.head.kind == VARIABLE:
            out.add(node.head.name)
        stack.extend(node.args)
    return out


def semantics(g: Scheme, t: Term, venv: Mapping[str, Conj] | None = None) -> Conj:
    """One-shot term semantics; prefer `Analysis` when calling repeatedly."""
    return Analysis(g).semantics(t, venv)
