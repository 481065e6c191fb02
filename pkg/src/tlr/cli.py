"""Command-line front end.

Exit codes are a stable contract: 0 ok/accepted, 1 usage or I/O error,
2 grammar not LR(1), 3 rejected/invalid, 4 nothing to check, 5 differential
mismatch.
"""

from __future__ import annotations

import argparse
import sys

from .difftest import run_difftest
from .errors import Conflict, GrammarSyntaxError, NotAViablePrefix, TlrError
from .grammar import (END, Grammar, ScriptedProvider, parse_grammar_text,
                      parse_transformation_text)
from .lr1 import build_tables, dump_tables
from .oracle import dump_tree, enumerate_proper_trees, oracle_conservation
from .parser import INVALID_TRANSFORMATION, ParserState
from .validity import compute_conservation, is_valid

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_LR1 = 2
EXIT_REJECTED = 3
EXIT_NOTHING_TO_CHECK = 4
EXIT_MISMATCH = 5


def _read(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_grammar(path) -> Grammar:
    return parse_grammar_text(_read(path))


def _tokens(g: Grammar, text: str):
    by_name = {s.name: s for s in g.terminals}
    toks = []
    for name in text.split():
        if name not in by_name or name == END.name:
            raise TlrError(f"unknown terminal {name!r}")
        toks.append(by_name[name])
    return toks


def _symbols(g: Grammar, text: str):
    by_name = {s.name: s for s in g.terminals | g.nonterminals}
    out = []
    for name in text.split():
        if name not in by_name:
            raise TlrError(f"unknown symbol {name!r}")
        out.append(by_name[name])
    return out


def cmd_tables(args) -> int:
    g = _load_grammar(args.grammar)
    try:
        tables = build_tables(g)
    except Conflict as exc:
        print(f"not LR(1): {exc}")
        return EXIT_NOT_LR1
    sys.stdout.write(dump_tables(tables))
    return EXIT_OK


def cmd_parse(args) -> int:
    g = _load_grammar(args.grammar)
    if args.tokens_file:
        text = _read(args.tokens_file)
    else:
        text = args.tokens or ""
    provider = None
    if args.delta_script:
        deltas = [parse_transformation_text(_read(p), g)
                  for p in args.delta_script.split(",")]
        provider = ScriptedProvider(deltas, cycle=args.cycle)
    results = []
    lines = text.splitlines() if args.per_line else [text]
    code = EXIT_OK
    for line in lines:
        if not line.strip() and args.per_line:
            continue
        toks = _tokens(g, line)
        result = ParserState(g, toks, provider).run()
        if args.trace:
            sys.stdout.write(result.trace())
        verdict = "accepted" if result.accepted else \
            f"rejected ({result.reason}: {result.detail})"
        print(verdict)
        results.append(result)
        if not result.accepted:
            code = EXIT_REJECTED
    return code


def cmd_check_delta(args) -> int:
    g = _load_grammar(args.grammar)
    toks = _tokens(g, _read(args.tokens_file) if args.tokens_file else (args.tokens or ""))
    delta = parse_transformation_text(_read(args.delta), g)
    state = ParserState(g, toks)
    hit = {}

    while not state.done:
        a = state.lookahead
        from .lr1 import Reduce
        act = state.tables.action.get((state.stack.top_state, a))
        if isinstance(act, Reduce) and act.production in g.transformative:
            popped = state.stack.pop(len(act.production.body))
            dest = state.tables.goto[(popped.top_state, act.production.head)]
            hit["stack"] = popped.push(dest, act.production.head)
            hit["lookahead"] = a
            break
        state.step()
    if not hit:
        print("no transformative reduction reached")
        return EXIT_NOTHING_TO_CHECK
    conservation = compute_conservation(g, hit["stack"], hit["lookahead"],
                                        state.tables)
    verdict = is_valid(g, delta, conservation)
    violating = set(verdict.violations)
    for prod, value in sorted(conservation.items(), key=lambda kv: str(kv[0])):
        status = "violated" if prod in violating else \
            ("conserved" if value >= 1 else "free")
        reason = "no conserving counterpart" if prod in violating else ""
        print(f"{prod}\t{value}\t{status}\t{reason}")
    print(f"verdict\t{'valid' if verdict.valid else 'invalid'}")
    return EXIT_OK if verdict.valid else EXIT_REJECTED


def cmd_oracle(args) -> int:
    g = _load_grammar(args.grammar)
    prefix = _symbols(g, args.prefix)
    by_name = {s.name: s for s in g.terminals}
    if args.lookahead not in by_name:
        raise TlrError(f"unknown terminal {args.lookahead!r}")
    lookahead = by_name[args.lookahead]
    trees = enumerate_proper_trees(g, prefix, lookahead, pinned=not args.relaxed)
    print(f"{len(trees)} proper simplified trees")
    for i, st in enumerate(sorted(trees, key=lambda t: dump_tree(t.root))):
        print(f"tree {i}")
        sys.stdout.write(dump_tree(st.root))
    z = oracle_conservation(g, prefix, lookahead, trees=trees)
    for prod, value in sorted(z.items(), key=lambda kv: str(kv[0])):
        print(f"{prod}\t{value}")
    return EXIT_OK


def cmd_difftest(args) -> int:
    def progress(done, total, cfgs):
        if args.verbose:
            print(f"case {done}/{total}, {cfgs} configurations", file=sys.stderr)

    report = run_difftest(args.seed, args.cases, progress=progress)
    if report.ok:
        print(f"ok: {report.cases} grammars, {report.configurations} "
              f"configurations, 0 mismatches")
        return EXIT_OK
    print("mismatch found; minimized counterexample:")
    _, mismatch = report.minimized
    sys.stdout.write(mismatch.bundle())
    return EXIT_MISMATCH


def make_arg_parser():
    ap = argparse.ArgumentParser(prog="tlr",
                                 description="transformative LR(1) toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tables", help="dump canonical LR(1) tables")
    p.add_argument("-g", "--grammar", required=True)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("parse", help="parse token strings")
    p.add_argument("-g", "--grammar", required=True)
    p.add_argument("-t", "--tokens-file")
    p.add_argument("--tokens", help="inline whitespace-separated terminals")
    p.add_argument("--delta-script", help="comma-separated transformation files")
    p.add_argument("--cycle", action="store_true",
                   help="repeat the delta script instead of padding with the identity")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--per-line", action="store_true",
                   help="one sentence per input line instead of per file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("check-delta", help="check a transformation at the first transform point")
    p.add_argument("-g", "--grammar", required=True)
    p.add_argument("-t", "--tokens-file")
    p.add_argument("--tokens")
    p.add_argument("-d", "--delta", required=True)
    p.set_defaults(func=cmd_check_delta)

    p = sub.add_parser("oracle", help="enumerate proper simplified trees")
    p.add_argument("-g", "--grammar", required=True)
    p.add_argument("--prefix", required=True, help="space-separated symbol string")
    p.add_argument("--lookahead", required=True)
    p.add_argument("--relaxed", action="store_true",
                   help="sentential-form decompositions, not just parser stacks")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("difftest", help="conservation vs oracle over random grammars")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cases", type=int, default=200)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_difftest)
    return ap


def main(argv=None) -> int:
    ap = make_arg_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except Conflict as exc:
        print(f"not LR(1): {exc}", file=sys.stderr)
        return EXIT_NOT_LR1
    except NotAViablePrefix as exc:
        print(f"not a viable prefix: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, GrammarSyntaxError, TlrError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
