"""Rewriting, derivation strategies and truncated value trees.

`redexes`/`step`/`derive` work on immutable terms and produce inspectable
traces.  `value_tree` runs the fair schedulers on a private mutable
representation: each node tracks how many redexes its subtree contains, so
sweeps skip settled regions and innermost detection is O(1).  Subtrees that
can never reach the requested output depth are left unexpanded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .core import (
    GROUND,
    NONTERMINAL,
    TERMINAL,
    VARIABLE,
    BOT,
    HorsError,
    PartialTree,
    Position,
    Symbol,
    Term,
    arity,
    instantiate,
    subterm_at,
    replace_at,
    term_to_str,
)
from .scheme import Scheme

UNRESTRICTED = "unrestricted"
OI = "oi"
IO = "io"

_POLICIES = (UNRESTRICTED, OI, IO)


class NotARedex(HorsError):
    """The addressed subterm cannot be rewritten."""


class PolicyViolation(HorsError):
    """A chooser picked a redex the active policy forbids."""


@dataclass(frozen=True)
class RedexInfo:
    """A rewritable subterm with its evaluation-policy classification.

    `is_oi`: no redex strictly above it; `is_io`: no redex inside any of its
    arguments.
    """

    position: Position
    nonterminal: Symbol
    is_oi: bool
    is_io: bool

    def allowed(self, policy: str) -> bool:
        if policy == OI:
            return self.is_oi
        if policy == IO:
            return self.is_io
        return True


@dataclass(frozen=True)
class EvalBudget:
    """Bounds for derivations: rewrite steps, term size, output depth."""

    max_steps: int = 10_000
    max_term_size: int = 100_000
    depth: int = 5

    def __post_init__(self) -> None:
        if self.max_steps < 1 or self.max_term_size < 1 or self.depth < 1:
            raise ValueError("budget components must be strictly positive")


@dataclass
class DerivationTrace:
    """Steps of a derivation: (term before, chosen redex, term after)."""

    steps: list[tuple[Term, RedexInfo, Term]]
    exhausted_budget: bool

    @property
    def terms(self) -> list[Term]:
        if not self.steps:
            return []
        return [self.steps[0][0]] + [after for _, _, after in self.steps]

    @property
    def final(self) -> Term | None:
        return self.steps[-1][2] if self.steps else None


@dataclass(frozen=True)
class ValueTreeResult:
    tree: PartialTree
    exhausted: bool
    steps_used: int


def _is_redex_head(g: Scheme, head: Symbol, nargs: int) -> bool:
    return (
        head.kind == NONTERMINAL
        and head.name in g.rules
        and nargs == arity(head.type)
    )


def redexes(g: Scheme, t: Term) -> list[RedexInfo]:
    """All redexes of a ground term in document order, with OI/IO flags."""
    contains: dict[int, bool] = {}
    post: list[tuple[Term, bool]] = [(t, False)]
    while post:
        node, expanded = post.pop()
        if expanded:
            own = _is_redex_head(g, node.head, len(node.args))
            contains[id(node)] = own or any(contains[id(a)] for a in node.args)
            continue
        post.append((node, True))
        for a in node.args:
            post.append((a, False))

    out: list[RedexInfo] = []
    pre: list[tuple[Term, Position, bool]] = [(t, (), False)]
    while pre:
        node, pos, above = pre.pop()
        own = _is_redex_head(g, node.head, len(node.args)) and node.type == GROUND
        if own:
            out.append(
                RedexInfo(
                    position=pos,
                    nonterminal=node.head,
                    is_oi=not above,
                    is_io=not any(contains[id(a)] for a in node.args),
                )
            )
        for i in range(len(node.args), 0, -1):
            pre.append((node.args[i - 1], pos + (i,), above or own))
    return out


def step(g: Scheme, t: Term, position: Position) -> Term:
    """One rewrite at `position`, which must address a redex."""
    sub = subterm_at(t, position)
    if not _is_redex_head(g, sub.head, len(sub.args)) or sub.type != GROUND:
        raise NotARedex(
            f"{term_to_str(sub)} at {'.'.join(map(str, position)) or 'root'} "
            f"is not a redex"
        )
    rule = g.rules[sub.head.name]
    mapping = {p.name: a for p, a in zip(rule.params, sub.args)}
    return replace_at(t, position, instantiate(rule.body, mapping))


Chooser = Callable[[Term, list[RedexInfo]], Optional[RedexInfo]]


def derive(
    g: Scheme,
    t0: Term,
    policy: str = UNRESTRICTED,
    budget: EvalBudget = EvalBudget(),
    chooser: Chooser | None = None,
) -> DerivationTrace:
    """A maximal derivation from t0 under the policy, within the budget.

    The default chooser is the fair scheduler: it snapshots the eligible
    redexes of the current term and rewrites them left to right before
    re-snapshotting (outermost ones under `oi`/`unrestricted`, innermost
    under `io`).  A custom chooser may return None to stop early, and must
    pick from the eligible list.
    """
    if policy not in _POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if t0.type != GROUND:
        raise NotARedex("derivations start from ground terms")
    steps: list[tuple[Term, RedexInfo, Term]] = []
    exhausted = False
    term = t0
    queue: list[Position] = []
    while True:
        if term.size > budget.max_term_size:
            exhausted = True
            break
        infos = redexes(g, term)
        eligible = [r for r in infos if r.allowed(policy)]
        if not eligible:
            break
        if len(steps) >= budget.max_steps:
            exhausted = True
            break
        if chooser is None:
            # Fair sweep: under `unrestricted` schedule the outermost ones,
            # which attains the value tree.
            sweep = [r for r in eligible if r.is_oi] if policy == UNRESTRICTED else eligible
            by_pos = {r.position: r for r in sweep}
            chosen = None
            while queue:
                p = queue.pop(0)
                if p in by_pos:
                    chosen = by_pos[p]
                    break
            if chosen is None:
                queue = [r.position for r in sweep]
                chosen = by_pos[queue.pop(0)]
        else:
            chosen = chooser(term, eligible)
            if chosen is None:
                break
            if all(chosen.position != r.position for r in eligible):
                raise PolicyViolation(
                    f"chooser picked {chosen.position} which is not an "
                    f"eligible {policy} redex"
                )
        after = step(g, term, chosen.position)
        steps.append((term, chosen, after))
        term = after
    return DerivationTrace(steps, exhausted)


# ---------------------------------------------------------------------------
# Fast evaluator for value trees.
#
# Visibility marks (`vis`):
#   >= 0  on an all-terminal path from the root, shallower than the horizon
#   -1    below a non-terminal head somewhere: invisible until that resolves
#   -2    on an all-terminal path at or beyond the horizon: permanently
#         irrelevant for the requested prefix, never scanned or rewritten

_INVIS = -1
_BEYOND = -2


class _MNode:
    __slots__ = ("sym", "kids", "parent", "nredex", "redex", "vis", "stamp")

    def __init__(self, sym: Symbol, kids: list["_MNode"]):
        self.sym = sym
        self.kids = kids
        self.parent: _MNode | None = None
        self.nredex = 0
        self.redex = False
        self.vis: int | None = None
        self.stamp = -1
        for k in kids:
            k.parent = self


@dataclass(frozen=True)
class _CompiledRule:
    params: tuple[str, ...]
    body: Term
    uses: dict[str, int]


class _Evaluator:
    def __init__(self, g: Scheme, start: Term, budget: EvalBudget):
        self.g = g
        self.budget = budget
        self.depth = budget.depth
        self.steps_used = 0
        self.exhausted = False
        self.rules: dict[str, _CompiledRule] = {}
        for name, rule in g.rules.items():
            uses: dict[str, int] = {p.name: 0 for p in rule.params}
            stack = [rule.body]
            while stack:
                node = stack.pop()
                if node.head.kind == VARIABLE and node.head.name in uses:
                    uses[node.head.name] += 1
                stack.extend(node.args)
            self.rules[name] = _CompiledRule(
                tuple(p.name for p in rule.params), rule.body, uses
            )
        self.root = self._from_term(start)
        self.size = start.size
        self._assign_vis(self.root, 0 if self.depth >= 1 else _BEYOND)

    # -- construction -------------------------------------------------

    def _is_redex(self, sym: Symbol, nkids: int) -> bool:
        return (
            sym.kind == NONTERMINAL
            and sym.name in self.rules
            and nkids == arity(sym.type)
        )

    def _from_term(self, t: Term) -> _MNode:
        done: dict[int, _MNode] = {}
        stack: list[tuple[Term, bool]] = [(t, False)]
        while stack:
            node, expanded = stack.pop()
            if not expanded:
                stack.append((node, True))
                for a in node.args:
                    stack.append((a, False))
                continue
            m = _MNode(node.head, [done[id(a)] for a in node.args])
            m.redex = self._is_redex(node.head, len(node.args))
            m.nredex = int(m.redex) + sum(k.nredex for k in m.kids)
            done[id(node)] = m
        return done[id(t)]

    def _child_vis(self, node: _MNode) -> int:
        if node.vis == _BEYOND:
            return _BEYOND
        if node.vis == _INVIS or node.sym.kind != TERMINAL:
            return _INVIS
        nxt = node.vis + 1
        return nxt if nxt <= self.depth - 1 else _BEYOND

    def _assign_vis(self, node: _MNode, vis: int) -> None:
        node.vis = vis
        stack = [node]
        while stack:
            n = stack.pop()
            cv = self._child_vis(n)
            for k in n.kids:
                if k.vis != cv:
                    k.vis = cv
                    stack.append(k)

    # -- rewriting ----------------------------------------------------

    def _deep_copy(self, node: _MNode) -> tuple[_MNode, int]:
        done: dict[int, _MNode] = {}
        count = 0
        stack: list[tuple[_MNode, bool]] = [(node, False)]
        while stack:
            n, expanded = stack.pop()
            if not expanded:
                stack.append((n, True))
                for k in n.kids:
                    stack.append((k, False))
                continue
            m = _MNode(n.sym, [done[id(k)] for k in n.kids])
            m.redex = n.redex
            m.nredex = n.nredex
            m.vis = n.vis
            done[id(n)] = m
            count += 1
        return done[id(node)], count

    def _subtree_size(self, node: _MNode) -> int:
        count = 0
        stack = [node]
        while stack:
            n = stack.pop()
            count += 1
            stack.extend(n.kids)
        return count

    def _fire(self, node: _MNode) -> None:
        """Rewrite the redex at `node` in place (one step)."""
        rule = self.rules[node.sym.name]
        argmap = dict(zip(rule.params, node.kids))
        moved: set[str] = set()
        delta_size = 0

        def build(bt: Term) -> _MNode:
            nonlocal delta_size
            head = bt.head
            if head.kind == VARIABLE and head.name in argmap:
                base = argmap[head.name]
                if head.name in moved:
                    base, copied = self._deep_copy(base)
                    delta_size += copied
                else:
                    moved.add(head.name)
                if not bt.args:
                    return base
                kids = base.kids + [build(a) for a in bt.args]
                m = _MNode(base.sym, kids)
            else:
                m = _MNode(head, [build(a) for a in bt.args])
                delta_size += 1
            m.redex = self._is_redex(m.sym, len(m.kids))
            m.nredex = int(m.redex) + sum(k.nredex for k in m.kids)
            return m

        inst = build(rule.body)
        for name, n in rule.uses.items():
            if n == 0:
                delta_size -= self._subtree_size(argmap[name])
        self.size += delta_size - 1

        old_nredex = node.nredex
        node.sym = inst.sym
        node.kids = inst.kids
        for k in node.kids:
            k.parent = node
        node.redex = inst.redex
        node.nredex = inst.nredex
        delta = node.nredex - old_nredex
        if delta:
            p = node.parent
            while p is not None:
                p.nredex += delta
                p = p.parent
        self._assign_vis(node, node.vis)  # type: ignore[arg-type]
        self.steps_used += 1
        if self.size > self.budget.max_term_size:
            self.exhausted = True

    def _budget_left(self) -> bool:
        if self.steps_used >= self.budget.max_steps:
            self.exhausted = True
        return not self.exhausted

    # -- fair outermost (value tree of unrestricted/OI derivations) ----

    def run_outermost(self) -> None:
        while True:
            fired = 0
            stack = [self.root]
            while stack:
                n = stack.pop()
                if n.vis == _BEYOND:
                    continue
                if n.redex:
                    if not self._budget_left():
                        return
                    self._fire(n)
                    fired += 1
                    if self.exhausted:
                        return
                    continue
                if n.sym.kind == TERMINAL:
                    for k in reversed(n.kids):
                        stack.append(k)
                # non-terminal head, not a redex: frozen forever, skip
            if fired == 0:
                return

    # -- fair parallel-innermost (IO value tree) ------------------------

    def _death_walk(self, node: _MNode, out: list[_MNode], round_no: int) -> None:
        p = node.parent
        while p is not None and not p.redex:
            p = p.parent
        if p is not None and p.nredex == 1 and p.vis != _BEYOND and p.stamp != round_no:
            p.stamp = round_no
            out.append(p)

    def run_innermost(self) -> None:
        current = [self.root]
        round_no = 0
        while current:
            round_no += 1
            nxt: list[_MNode] = []
            for w in current:
                if w.nredex > 0:
                    stack = [w]
                    while stack:
                        n = stack.pop()
                        if n.nredex == 0 or n.vis == _BEYOND:
                            continue
                        if n.redex and n.nredex == 1:
                            if not self._budget_left():
                                return
                            self._fire(n)
                            if self.exhausted:
                                return
                            if n.stamp != round_no:
                                n.stamp = round_no
                                nxt.append(n)
                            continue
                        for k in reversed(n.kids):
                            stack.append(k)
                if w.nredex == 0:
                    self._death_walk(w, nxt, round_no)
            current = nxt

    # -- output ---------------------------------------------------------

    def extract(self) -> PartialTree:
        def go(node: _MNode, depth: int) -> PartialTree:
            if depth <= 0 or node.sym.kind != TERMINAL:
                return BOT
            return PartialTree(node.sym, tuple(go(k, depth - 1) for k in node.kids))

        return go(self.root, self.depth)


def value_tree_report(
    g: Scheme,
    policy: str = UNRESTRICTED,
    budget: EvalBudget = EvalBudget(),
    start: Term | None = None,
) -> ValueTreeResult:
    """Depth-truncated value-tree prefix plus budget accounting.

    The result is always a lower bound of the true value tree: unresolved
    non-terminals and everything below the requested depth come out as
    bottom.
    """
    if policy not in _POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    start_term = start if start is not None else g.start_term()
    if start_term.type != GROUND:
        raise NotARedex("value trees are computed from ground start terms")
    ev = _Evaluator(g, start_term, budget)
    if policy == IO:
        ev.run_innermost()
    else:
        ev.run_outermost()
    return ValueTreeResult(ev.extract(), ev.exhausted, ev.steps_used)


def value_tree(
    g: Scheme,
    policy: str = UNRESTRICTED,
    budget: EvalBudget = EvalBudget(),
) -> PartialTree:
    """The depth-truncated prefix of the value tree under the given policy."""
    return value_tree_report(g, policy, budget).tree
