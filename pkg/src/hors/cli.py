"""Command-line driver: check, derive, valuetree, analyze, transform."""

from __future__ import annotations

import argparse
import json
import sys

from .core import HorsError, PartialTree
from .engine import (
    EvalBudget,
    derive,
    value_tree_report,
)
from .io2oi import label_scheme, self_correct_report
from .oi2io import bar_scheme
from .scheme import (
    InvalidScheme,
    Scheme,
    parse,
    prune_unreachable,
    render,
    scheme_order,
    validate,
)
from .typesys import Analysis, ArrowMap, Atom, Conj, QBot, QInf

SCHEMA_TREE = "hors.tree/1"
SCHEMA_ANALYSIS = "hors.analysis/1"

_POLICY = {"oi": "oi", "io": "io", "any": "unrestricted"}


def _read_scheme(path: str) -> Scheme:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


def _write_out(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _tree_lines(t: PartialTree, indent: int, lines: list[str]) -> None:
    label = "⊥" if t.label is None else t.label.name
    lines.append("  " * indent + label)
    for child in t.children:
        _tree_lines(child, indent + 1, lines)


def tree_text(t: PartialTree) -> str:
    lines: list[str] = []
    _tree_lines(t, 0, lines)
    return "\n".join(lines) + "\n"


def tree_json(t: PartialTree) -> dict:
    if t.label is None:
        return {"label": None}
    return {
        "label": t.label.name,
        "children": [tree_json(c) for c in t.children],
    }


def atom_text(a: Atom) -> str:
    if isinstance(a, QBot):
        return "q⊥"
    if isinstance(a, QInf):
        return "q∞"
    assert isinstance(a, ArrowMap)
    return f"{conj_text(a.argument)} -> {atom_text(a.result)}"


def conj_text(c: Conj) -> str:
    return "{" + ", ".join(atom_text(a) for a in c) + "}"


def atom_json(a: Atom):
    if isinstance(a, QBot):
        return "q_bot"
    if isinstance(a, QInf):
        return "q_inf"
    assert isinstance(a, ArrowMap)
    return {"arg": [atom_json(x) for x in a.argument], "res": atom_json(a.result)}


def _position_text(position: tuple[int, ...]) -> str:
    return ".".join(map(str, position)) if position else "ε"


def _budget(args: argparse.Namespace) -> EvalBudget:
    return EvalBudget(
        max_steps=args.steps,
        max_term_size=args.max_term,
        depth=getattr(args, "depth", 5),
    )


def cmd_check(args: argparse.Namespace) -> int:
    g = _read_scheme(args.input)
    diagnostics = validate(g)
    if diagnostics:
        for d in diagnostics:
            print(d, file=sys.stderr)
        return 1
    _write_out(
        f"ok: order {scheme_order(g)}, {len(g.nonterminals)} nonterminals\n",
        args.out,
    )
    return 0


def cmd_derive(args: argparse.Namespace) -> int:
    g = _read_scheme(args.input)
    trace = derive(g, g.start_term(), _POLICY[args.policy], _budget(args))
    lines: list[str] = []
    if args.trace:
        for i, (_, info, _) in enumerate(trace.steps):
            lines.append(
                f"{i} {_position_text(info.position)} {info.nonterminal.name} "
                f"OI={int(info.is_oi)} IO={int(info.is_io)}"
            )
    final = trace.steps[-1][2] if trace.steps else g.start_term()
    lines.append(str(final))
    _write_out("\n".join(lines) + "\n", args.out)
    if trace.exhausted_budget:
        print("warning: budget exhausted; derivation is incomplete", file=sys.stderr)
    return 0


def cmd_valuetree(args: argparse.Namespace) -> int:
    g = _read_scheme(args.input)
    result = value_tree_report(g, _POLICY[args.policy], _budget(args))
    if args.format == "structured":
        payload = {
            "schema": SCHEMA_TREE,
            "policy": args.policy,
            "depth": args.depth,
            "exhausted": result.exhausted,
            "steps_used": result.steps_used,
            "tree": tree_json(result.tree),
        }
        _write_out(json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n", args.out)
    else:
        _write_out(tree_text(result.tree), args.out)
    if result.exhausted:
        print("warning: budget exhausted; tree is a partial prefix", file=sys.stderr)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    g = _read_scheme(args.input)
    analysis = Analysis(g)
    if args.format == "structured":
        payload = {
            "schema": SCHEMA_ANALYSIS,
            "iterations": analysis.iterations,
            "nonterminals": {
                name: [atom_json(a) for a in analysis.env.entries[name]]
                for name in sorted(g.nonterminals)
            },
        }
        _write_out(json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n", args.out)
    else:
        lines = [
            f"{name} :: {conj_text(analysis.env.entries[name])}"
            for name in sorted(g.nonterminals)
        ]
        _write_out("\n".join(lines) + "\n", args.out)
    return 0


def cmd_transform(args: argparse.Namespace) -> int:
    g = _read_scheme(args.input)
    if args.to == "io":
        _write_out(render(bar_scheme(g)), args.out)
        return 0
    labeled = label_scheme(g)
    corrected, report = self_correct_report(labeled)
    if args.prune:
        corrected = prune_unreachable(corrected)
    _write_out(render(corrected), args.out)
    print(
        f"rules: {report.base_rules} before, {len(corrected.rules)} after "
        f"({report.voided_count} redirected to Void)",
        file=sys.stderr,
    )
    for ty, n in report.nbvar_table:
        print(f"nbvar[{ty}] = {n}", file=sys.stderr)
    if report.voided_rules:
        print("voided: " + " ".join(report.voided_rules), file=sys.stderr)
    if report.unreachable:
        kept = "pruned" if args.prune else "kept"
        print(
            f"unreachable annotated copies: {len(report.unreachable)} ({kept})",
            file=sys.stderr,
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hors",
        description="Evaluate and transform higher-order recursion schemes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, depth: bool = False) -> None:
        p.add_argument("input", help="scheme file")
        p.add_argument("--out", help="write output to this file instead of stdout")
        p.add_argument("--steps", type=int, default=10_000)
        p.add_argument("--max-term", type=int, default=100_000, dest="max_term")
        if depth:
            p.add_argument("--depth", type=int, default=5)

    p = sub.add_parser("check", help="validate a scheme file")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("derive", help="run one fair derivation")
    common(p)
    p.add_argument("--policy", choices=("oi", "io", "any"), default="any")
    p.add_argument("--trace", action="store_true", help="emit the step dump")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("valuetree", help="compute a value-tree prefix")
    common(p, depth=True)
    p.add_argument("--policy", choices=("oi", "io", "any"), default="any")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.set_defaults(func=cmd_valuetree)

    p = sub.add_parser("analyze", help="run the divergence type analysis")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("transform", help="rewrite the scheme for a target policy")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--to", choices=("io", "oi"), required=True)
    p.add_argument(
        "--prune",
        action="store_true",
        help="drop annotated non-terminals unreachable from the start",
    )
    p.set_defaults(func=cmd_transform)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InvalidScheme as e:
        for d in e.diagnostics:
            print(d, file=sys.stderr)
        return 1
    except HorsError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
