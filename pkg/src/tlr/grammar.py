"""Grammar data model, transformation application, and the textual formats.

A grammar here is always a *transformative* context-free grammar: an ordinary
CFG plus a distinguished subset of transformative productions whose reduction
triggers a grammar transformation.  The component that decides *which*
transformation to apply is not part of the grammar value; it is supplied to
the parser as a :class:`DeltaProvider`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import (
    AddAlreadyPresent,
    DuplicateSymbol,
    EndMarkerInBody,
    GrammarSyntaxError,
    RemoveNotPresent,
    RemovesTransformative,
    TransformativeNotInP,
    UnknownSymbolInBody,
)

TERMINAL = "terminal"
NONTERMINAL = "nonterminal"

END_NAME = "$end"

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True, order=True)
class Symbol:
    """A grammar symbol; identity is (name, kind)."""

    name: str
    kind: str

    @property
    def is_terminal(self):
        return self.kind == TERMINAL

    @property
    def is_nonterminal(self):
        return self.kind == NONTERMINAL

    def __str__(self):
        return self.name


END = Symbol(END_NAME, TERMINAL)


def terminal(name: str) -> Symbol:
    return Symbol(name, TERMINAL)


def nonterminal(name: str) -> Symbol:
    return Symbol(name, NONTERMINAL)


@dataclass(frozen=True, order=True)
class Production:
    """head -> body; an empty body denotes an epsilon rule."""

    head: Symbol
    body: tuple[Symbol, ...]

    def __str__(self):
        rhs = " ".join(s.name for s in self.body) if self.body else "ε"
        return f"{self.head.name} -> {rhs}"


class Grammar:
    """Immutable transformative context-free grammar.

    Productions keep insertion order for deterministic output; equality and
    all semantic operations use set semantics.
    """

    __slots__ = ("terminals", "nonterminals", "productions", "start",
                 "transformative", "_pset", "_by_head")

    def __init__(self, terminals, nonterminals, productions, start, transformative):
        object.__setattr__(self, "terminals", frozenset(terminals))
        object.__setattr__(self, "nonterminals", frozenset(nonterminals))
        object.__setattr__(self, "productions", tuple(productions))
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "transformative", frozenset(transformative))
        object.__setattr__(self, "_pset", frozenset(self.productions))
        by_head: dict[Symbol, tuple[Production, ...]] = {}
        for p in self.productions:
            by_head.setdefault(p.head, ())
            by_head[p.head] += (p,)
        object.__setattr__(self, "_by_head", by_head)

    def __setattr__(self, *_):
        raise AttributeError("Grammar is immutable")

    @property
    def production_set(self) -> frozenset[Production]:
        return self._pset

    def productions_for(self, head: Symbol) -> tuple[Production, ...]:
        return self._by_head.get(head, ())

    @property
    def symbols(self) -> frozenset[Symbol]:
        return self.terminals | self.nonterminals

    def __eq__(self, other):
        if not isinstance(other, Grammar):
            return NotImplemented
        return (self.terminals == other.terminals
                and self.nonterminals == other.nonterminals
                and self._pset == other._pset
                and self.start == other.start
                and self.transformative == other.transformative)

    def __hash__(self):
        return hash((self.terminals, self.nonterminals, self._pset,
                     self.start, self.transformative))

    def __repr__(self):
        return (f"Grammar(start={self.start.name}, "
                f"|Σ|={len(self.terminals)}, |N|={len(self.nonterminals)}, "
                f"|P|={len(self.productions)}, |T|={len(self.transformative)})")


@dataclass(frozen=True)
class Transformation:
    """A grammar transformation: nonterminals to add, productions to add and
    to remove.  The empty transformation is an identity."""

    new_nonterminals: frozenset[Symbol] = frozenset()
    add: frozenset[Production] = frozenset()
    remove: frozenset[Production] = frozenset()

    @property
    def is_empty(self):
        return not (self.new_nonterminals or self.add or self.remove)

    def __str__(self):
        return f"+{len(self.add)}/-{len(self.remove)}"


EMPTY_TRANSFORMATION = Transformation()


def _check_body(grammar_symbols, prod):
    for sym in prod.body:
        if sym == END:
            raise EndMarkerInBody(f"{END_NAME} in body of {prod}")
        if sym not in grammar_symbols:
            raise UnknownSymbolInBody(f"unknown symbol {sym.name!r} in {prod}")


def make_grammar(terminals, nonterminals, productions, start, transformative=()):
    """Validate the pieces and build an immutable Grammar.

    The end marker is added to the terminal alphabet automatically; it may
    never appear in a production body.
    """
    terminals = list(dict.fromkeys(terminals))
    nonterminals = list(dict.fromkeys(nonterminals))
    if END not in terminals:
        terminals = terminals + [END]
    names: dict[str, Symbol] = {}
    for sym in list(terminals) + list(nonterminals):
        if sym.name in names:
            raise DuplicateSymbol(f"name {sym.name!r} declared more than once")
        names[sym.name] = sym
    symbols = set(terminals) | set(nonterminals)
    if start not in set(nonterminals):
        raise UnknownSymbolInBody(f"start symbol {start.name!r} not a declared nonterminal")
    seen = []
    for prod in productions:
        if prod.head not in set(nonterminals):
            raise UnknownSymbolInBody(f"head {prod.head.name!r} of {prod} not a nonterminal")
        _check_body(symbols, prod)
        if prod not in seen:
            seen.append(prod)
    pset = set(seen)
    for prod in transformative:
        if prod not in pset:
            raise TransformativeNotInP(f"transformative {prod} not in the production set")
    return Grammar(terminals, nonterminals, seen, start, transformative)


def apply_transformation(g: Grammar, d: Transformation) -> Grammar:
    """Return the transformed grammar ΔG; ``g`` is left untouched."""
    pset = g.production_set
    for prod in d.remove:
        if prod not in pset:
            raise RemoveNotPresent(f"cannot remove absent production {prod}")
        if prod in g.transformative:
            raise RemovesTransformative(f"cannot remove transformative {prod}")
    symbols = g.symbols | d.new_nonterminals
    for prod in d.add:
        if prod in pset:
            raise AddAlreadyPresent(f"{prod} already present")
        if not prod.head.is_nonterminal or prod.head not in symbols:
            raise UnknownSymbolInBody(f"head {prod.head.name!r} of added {prod} unknown")
        _check_body(symbols, prod)
    productions = [p for p in g.productions if p not in d.remove]
    productions += [p for p in sorted(d.add) if p not in set(productions)]
    nonterminals = set(g.nonterminals) | set(d.new_nonterminals)
    return Grammar(g.terminals, nonterminals, productions, g.start, g.transformative)


# --------------------------------------------------------------------------
# Delta providers
# --------------------------------------------------------------------------

# A DeltaProvider is any callable
#   (scanned: tuple[Symbol, ...], memory: bytes, grammar: Grammar, trace=())
#     -> (new_memory: bytes, Transformation)
# called at each transformative reduction.  ``scanned`` holds the terminals
# shifted since the previous reduction; ``trace`` carries the event history
# so hosts that want the full transformative yield can reconstruct it.
DeltaProvider = Callable[..., tuple[bytes, Transformation]]


def empty_provider(scanned, memory, grammar, trace=()):
    """Provider that always emits the identity transformation."""
    return memory, EMPTY_TRANSFORMATION


class ScriptedProvider:
    """Map the ordinal of each transformative reduction to a fixed
    transformation (1st call -> first entry, and so on).

    Past the end of the script the provider emits the identity, unless
    ``cycle`` is set, in which case the script repeats.
    """

    def __init__(self, transformations: Sequence[Transformation], cycle=False):
        self.transformations = list(transformations)
        self.cycle = cycle
        self.calls = 0

    def __call__(self, scanned, memory, grammar, trace=()):
        i = self.calls
        self.calls += 1
        if not self.transformations:
            return memory, EMPTY_TRANSFORMATION
        if i >= len(self.transformations):
            if not self.cycle:
                return memory, EMPTY_TRANSFORMATION
            i %= len(self.transformations)
        return memory, self.transformations[i]


# --------------------------------------------------------------------------
# Textual formats
# --------------------------------------------------------------------------

def _tokenize(text):
    """Yield (token, line, col); '#' starts a comment to end of line."""
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0]
        col = 0
        for m in re.finditer(r"\S+", body):
            col = m.start() + 1
            tok = m.group(0)
            # ';' terminates a rule and may be glued to the last token
            while tok:
                if tok == ";" or tok == "|":
                    yield tok, lineno, col
                    break
                stripped = tok.rstrip(";")
                if stripped != tok:
                    n_semis = len(tok) - len(stripped)
                    if stripped:
                        yield stripped, lineno, col
                    for _ in range(n_semis):
                        yield ";", lineno, col + len(stripped)
                    break
                yield tok, lineno, col
                break


def _check_ident(tok, line, col):
    if tok == END_NAME:
        return
    if not _IDENT_RE.match(tok):
        raise GrammarSyntaxError(f"invalid symbol name {tok!r}", line, col)


class _TokenStream:
    def __init__(self, text):
        self.toks = list(_tokenize(text))
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else (None, 0, 0)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, what):
        tok, line, col = self.next()
        if tok != what:
            raise GrammarSyntaxError(f"expected {what!r}, found {tok!r}", line, col)


def _parse_rule_bodies(ts, names, head, collect, line0, col0):
    """Parse 'A -> X Y | Z ;' bodies after the arrow into ``collect``."""
    body = []
    while True:
        tok, line, col = ts.next()
        if tok is None:
            raise GrammarSyntaxError("unterminated rule (missing ';')", line0, col0)
        if tok == ";":
            collect.append(Production(head, tuple(body)))
            return
        if tok == "|":
            collect.append(Production(head, tuple(body)))
            body = []
            continue
        if tok == END_NAME:
            raise GrammarSyntaxError(f"{END_NAME} is reserved", line, col)
        _check_ident(tok, line, col)
        if tok not in names:
            raise UnknownSymbolInBody(f"undeclared symbol {tok!r} at {line}:{col}")
        body.append(names[tok])


def parse_grammar_text(text: str) -> Grammar:
    """Parse the grammar file format.

    Directives: ``%terminals a b``, ``%start S``, ``%transform A -> X ;``.
    Plain rules ``A -> X Y | Z ;`` declare nonterminals implicitly by
    appearing as a head.  ``$end`` is implicit and reserved.
    """
    ts = _TokenStream(text)
    term_names: list[str] = []
    start_name = None
    # first pass over the token list to find heads (they may be referenced
    # before their own rules appear)
    head_names: list[str] = []
    toks = ts.toks
    for i, (tok, line, col) in enumerate(toks):
        if tok == "->" and i > 0:
            prev, pl, pc = toks[i - 1]
            if prev in ("%transform", ";", "|", None):
                raise GrammarSyntaxError("missing head before '->'", line, col)
            if prev.startswith("%"):
                continue
            _check_ident(prev, pl, pc)
            if prev not in head_names:
                head_names.append(prev)
    i = 0
    while True:
        tok, line, col = ts.peek()
        if tok is None:
            break
        if tok == "%terminals":
            ts.next()
            while True:
                nxt, nl, nc = ts.peek()
                if nxt is None or nxt.startswith("%") or (ts.pos + 1 < len(toks) and toks[ts.pos + 1][0] == "->"):
                    break
                ts.next()
                if nxt == ";":
                    break
                _check_ident(nxt, nl, nc)
                if nxt in term_names:
                    raise DuplicateSymbol(f"terminal {nxt!r} declared twice")
                term_names.append(nxt)
        elif tok == "%start":
            ts.next()
            nxt, nl, nc = ts.next()
            if nxt is None:
                raise GrammarSyntaxError("missing start symbol", line, col)
            _check_ident(nxt, nl, nc)
            start_name = nxt
        else:
            break
    for name in term_names:
        if name in head_names:
            raise DuplicateSymbol(f"{name!r} is both a terminal and a rule head")
    names: dict[str, Symbol] = {n: terminal(n) for n in term_names}
    names[END_NAME] = END
    for n in head_names:
        names[n] = nonterminal(n)
    productions: list[Production] = []
    transformative: list[Production] = []
    while True:
        tok, line, col = ts.next()
        if tok is None:
            break
        if tok == "%transform":
            head_tok, hl, hc = ts.next()
            if head_tok is None or head_tok not in names or not names[head_tok].is_nonterminal:
                raise GrammarSyntaxError(f"unknown rule head {head_tok!r}", hl, hc)
            ts.expect("->")
            marked: list[Production] = []
            _parse_rule_bodies(ts, names, names[head_tok], marked, hl, hc)
            for prod in marked:
                if prod not in productions:
                    raise TransformativeNotInP(f"%transform re-lists unknown {prod}")
                if prod not in transformative:
                    transformative.append(prod)
        elif tok in names and names[tok].is_nonterminal:
            ts.expect("->")
            _parse_rule_bodies(ts, names, names[tok], productions, line, col)
        else:
            raise GrammarSyntaxError(f"unexpected token {tok!r}", line, col)
    if start_name is None:
        raise GrammarSyntaxError("missing %start directive", 1, 1)
    if start_name not in names or not names[start_name].is_nonterminal:
        raise GrammarSyntaxError(f"start symbol {start_name!r} has no rule", 1, 1)
    return make_grammar(
        [names[n] for n in term_names],
        [names[n] for n in head_names],
        productions,
        names[start_name],
        transformative,
    )


def parse_transformation_text(text: str, g: Grammar) -> Transformation:
    """Parse a transformation file against grammar ``g``.

    Lines: ``%nonterminal X``, ``%add H -> B ;``, ``%remove H -> B ;``.
    An empty file denotes the identity transformation.
    """
    ts = _TokenStream(text)
    new_nts: list[Symbol] = []
    names = {s.name: s for s in g.symbols}
    add: list[Production] = []
    remove: list[Production] = []
    while True:
        tok, line, col = ts.next()
        if tok is None:
            break
        if tok == "%nonterminal":
            nxt, nl, nc = ts.next()
            if nxt is None:
                raise GrammarSyntaxError("missing nonterminal name", line, col)
            _check_ident(nxt, nl, nc)
            if nxt in names:
                raise DuplicateSymbol(f"{nxt!r} already exists in the grammar")
            sym = nonterminal(nxt)
            names[nxt] = sym
            new_nts.append(sym)
        elif tok in ("%add", "%remove"):
            head_tok, hl, hc = ts.next()
            if head_tok is None:
                raise GrammarSyntaxError("missing rule head", line, col)
            ts.expect("->")
            target = add if tok == "%add" else remove
            # %nonterminal names must be declared before first use
            head = names.get(head_tok)
            if head is None or not head.is_nonterminal:
                raise GrammarSyntaxError(f"unknown rule head {head_tok!r}", hl, hc)
            _parse_rule_bodies(ts, names, head, target, hl, hc)
        else:
            raise GrammarSyntaxError(f"unexpected token {tok!r}", line, col)
    d = Transformation(frozenset(new_nts), frozenset(add), frozenset(remove))
    validate_transformation(g, d)
    return d


def validate_transformation(g: Grammar, d: Transformation) -> None:
    """Raise if ``d`` violates the Transformation invariants relative to ``g``."""
    pset = g.production_set
    for prod in d.remove:
        if prod not in pset:
            raise RemoveNotPresent(f"cannot remove absent production {prod}")
        if prod in g.transformative:
            raise RemovesTransformative(f"cannot remove transformative {prod}")
    symbols = g.symbols | d.new_nonterminals
    for prod in d.add:
        if prod in pset:
            raise AddAlreadyPresent(f"{prod} already present")
        _check_body(symbols, prod)


def render_grammar(g: Grammar) -> str:
    """Serialize ``g`` in the grammar file format; inverse of parse_grammar_text."""
    lines = []
    terms = [s.name for s in sorted(g.terminals) if s != END]
    lines.append("%terminals " + " ".join(terms))
    lines.append(f"%start {g.start.name}")
    for p in g.productions:
        rhs = " ".join(s.name for s in p.body)
        lines.append(f"{p.head.name} -> {rhs} ;" if rhs else f"{p.head.name} -> ;")
    for p in g.productions:
        if p in g.transformative:
            rhs = " ".join(s.name for s in p.body)
            lines.append(f"%transform {p.head.name} -> {rhs} ;" if rhs
                         else f"%transform {p.head.name} -> ;")
    return "\n".join(lines) + "\n"


def render_transformation(d: Transformation) -> str:
    lines = []
    for sym in sorted(d.new_nonterminals):
        lines.append(f"%nonterminal {sym.name}")
    for p in sorted(d.remove):
        rhs = " ".join(s.name for s in p.body)
        lines.append(f"%remove {p.head.name} -> {rhs} ;" if rhs else f"%remove {p.head.name} -> ;")
    for p in sorted(d.add):
        rhs = " ".join(s.name for s in p.body)
        lines.append(f"%add {p.head.name} -> {rhs} ;" if rhs else f"%add {p.head.name} -> ;")
    return "\n".join(lines) + "\n"
