"""Canonical LR(1) machinery: FIRST sets, item-set family, action/goto
tables, the LR(1) membership test, and the restacking function.

State numbering is deterministic: breadth-first from the initial state, with
transition symbols visited terminals-first, each group in name order.  Two
equal grammars therefore always get identical tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import Conflict, NotAViablePrefix, UnknownSymbol
from .grammar import END, Grammar, Production, Symbol, nonterminal


class _Epsilon:
    """Marker for the empty string in FIRST sets; not a grammar symbol."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ε"


EPSILON = _Epsilon()


def augmented_production(g: Grammar) -> Production:
    """The production S' -> S; S' takes the start name plus a prime, which
    cannot collide with declared identifiers."""
    return Production(nonterminal(g.start.name + "'"), (g.start,))


def nullable_set(g: Grammar) -> frozenset[Symbol]:
    """Nonterminals that derive the empty string."""
    nullable: set[Symbol] = set()
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.head not in nullable and all(s in nullable for s in p.body):
                nullable.add(p.head)
                changed = True
    return frozenset(nullable)


def _first_map(g: Grammar, nullable: frozenset[Symbol]) -> dict[Symbol, frozenset[Symbol]]:
    first: dict[Symbol, set[Symbol]] = {t: {t} for t in g.terminals}
    for nt in g.nonterminals:
        first[nt] = set()
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            acc = first[p.head]
            before = len(acc)
            for sym in p.body:
                acc |= first[sym]
                if sym not in nullable:
                    break
            if len(acc) != before:
                changed = True
    return {s: frozenset(v) for s, v in first.items()}


def first(g: Grammar, alpha: Iterable[Symbol]):
    """FIRST₁ of a symbol string: terminals that can begin a derivation of
    ``alpha``, plus EPSILON iff alpha derives the empty string."""
    alpha = tuple(alpha)
    for sym in alpha:
        if sym not in g.symbols:
            raise UnknownSymbol(f"{sym.name!r} is not a symbol of the grammar")
    nullable = nullable_set(g)
    fmap = _first_map(g, nullable)
    out: set = set()
    for sym in alpha:
        out |= fmap[sym]
        if sym not in nullable:
            return frozenset(out)
    return frozenset(out | {EPSILON})


@dataclass(frozen=True, order=True)
class Item:
    """An LR(1) item [A -> α·β, a]."""

    production: Production
    dot: int
    lookahead: Symbol

    def __post_init__(self):
        assert 0 <= self.dot <= len(self.production.body)

    @property
    def at_end(self):
        return self.dot == len(self.production.body)

    @property
    def next_symbol(self):
        body = self.production.body
        return body[self.dot] if self.dot < len(body) else None

    @property
    def core(self):
        return (self.production, self.dot)

    def advanced(self):
        return Item(self.production, self.dot + 1, self.lookahead)

    def __str__(self):
        names = [s.name for s in self.production.body]
        names.insert(self.dot, "·")
        return f"[{self.production.head.name} -> {' '.join(names)}, {self.lookahead.name}]"


@dataclass(frozen=True)
class ItemSet:
    items: frozenset[Item]
    id: int = -1

    def __iter__(self):
        return iter(self.items)

    def canonical(self) -> tuple[Item, ...]:
        return tuple(sorted(self.items))

    def kernel(self) -> frozenset[Item]:
        return frozenset(i for i in self.items if i.dot > 0)

    def __str__(self):
        return "\n".join(str(i) for i in self.canonical())


@dataclass(frozen=True)
class Shift:
    state: int


@dataclass(frozen=True)
class Reduce:
    production: Production


@dataclass(frozen=True)
class Accept:
    pass


ACCEPT = Accept()


class _Lr1Context:
    """Grammar-derived data shared by closure/goto during construction."""

    def __init__(self, g: Grammar):
        self.grammar = g
        self.augment = augmented_production(g)
        self.nullable = nullable_set(g)
        self.fmap = _first_map(g, self.nullable)

    def first_of_string(self, symbols, tail_lookahead: Symbol) -> frozenset[Symbol]:
        out: set[Symbol] = set()
        for sym in symbols:
            out |= self.fmap[sym]
            if sym not in self.nullable:
                return frozenset(out)
        out.add(tail_lookahead)
        return frozenset(out)


def _closure(ctx: _Lr1Context, items: Iterable[Item]) -> frozenset[Item]:
    g = ctx.grammar
    done: set[Item] = set(items)
    work = list(done)
    while work:
        item = work.pop()
        nxt = item.next_symbol
        if nxt is None or not nxt.is_nonterminal:
            continue
        beta = item.production.body[item.dot + 1:]
        lookaheads = ctx.first_of_string(beta, item.lookahead)
        for prod in g.productions_for(nxt):
            for la in lookaheads:
                if la is EPSILON:
                    continue
                new = Item(prod, 0, la)
                if new not in done:
                    done.add(new)
                    work.append(new)
    return frozenset(done)


def closure(g: Grammar, items: Iterable[Item]) -> ItemSet:
    """Least superset of ``items`` closed under the LR(1) closure rule."""
    return ItemSet(_closure(_Lr1Context(g), items))


def _goto(ctx: _Lr1Context, items: frozenset[Item], x: Symbol) -> frozenset[Item]:
    moved = [i.advanced() for i in items if i.next_symbol == x]
    if not moved:
        return frozenset()
    return _closure(ctx, moved)


def goto_set(g: Grammar, i: ItemSet, x: Symbol) -> ItemSet:
    """Goto on item set ``i`` and symbol ``x``; an empty result means the
    goto is undefined."""
    return ItemSet(_goto(_Lr1Context(g), i.items, x))


def _symbol_order(g: Grammar):
    terms = sorted(g.terminals)
    nts = sorted(g.nonterminals)
    return terms + nts


class ParseTables:
    """Canonical LR(1) tables plus the item-set family they came from."""

    __slots__ = ("grammar", "augment", "states", "action", "goto", "accept_state")

    def __init__(self, grammar, augment, states, action, goto, accept_state):
        self.grammar = grammar
        self.augment = augment
        self.states = states            # tuple[ItemSet, ...]
        self.action = action            # dict[(int, Symbol) -> Shift|Reduce|Accept]
        self.goto = goto                # dict[(int, Symbol) -> int], all symbols
        self.accept_state = accept_state

    def state_items(self, k: int) -> ItemSet:
        return self.states[k]

    def action_for(self, state: int, term: Symbol):
        return self.action.get((state, term))

    def goto_for(self, state: int, sym: Symbol):
        return self.goto.get((state, sym))


def build_tables(g: Grammar) -> ParseTables:
    """Knuth's canonical construction.  Raises Conflict if any action cell
    would hold two values; no conflicted table is ever returned."""
    ctx = _Lr1Context(g)
    aug = ctx.augment
    initial = _closure(ctx, [Item(aug, 0, END)])
    order = _symbol_order(g)
    key_to_id = {frozenset(initial): 0}
    states = [initial]
    goto: dict[tuple[int, Symbol], int] = {}
    queue = [0]
    while queue:
        k = queue.pop(0)
        items = states[k]
        for sym in order:
            target = _goto(ctx, items, sym)
            if not target:
                continue
            key = frozenset(target)
            if key not in key_to_id:
                key_to_id[key] = len(states)
                states.append(target)
                queue.append(len(states) - 1)
            goto[(k, sym)] = key_to_id[key]
    action: dict[tuple[int, Symbol], object] = {}
    accept_state = None

    def put(k, term, act):
        prev = action.get((k, term))
        if prev is not None and prev != act:
            raise Conflict(k, term, (prev, act))
        action[(k, term)] = act

    for k, items in enumerate(states):
        for item in sorted(items):
            nxt = item.next_symbol
            if nxt is not None and nxt.is_terminal:
                put(k, nxt, Shift(goto[(k, nxt)]))
            elif nxt is None:
                if item.production == aug:
                    put(k, item.lookahead, ACCEPT)
                    accept_state = k
                else:
                    put(k, item.lookahead, Reduce(item.production))
    return ParseTables(g, aug, tuple(ItemSet(s, i) for i, s in enumerate(states)),
                       action, goto, accept_state)


def is_lr1(g: Grammar):
    """(True, None) iff the canonical construction succeeds, else
    (False, the Conflict)."""
    try:
        build_tables(g)
        return True, None
    except Conflict as c:
        return False, c


@dataclass(frozen=True)
class ParseStack:
    """Sequence of (state, symbol) pairs; entry 0 is always (0, None) and the
    symbol string read bottom to top is a viable prefix."""

    entries: tuple[tuple[int, Symbol | None], ...] = ((0, None),)

    def push(self, state: int, symbol: Symbol) -> "ParseStack":
        return ParseStack(self.entries + ((state, symbol),))

    def pop(self, n: int) -> "ParseStack":
        assert n < len(self.entries)
        return ParseStack(self.entries[:len(self.entries) - n]) if n else self

    @property
    def top_state(self) -> int:
        return self.entries[-1][0]

    @property
    def top_symbol(self) -> Symbol | None:
        return self.entries[-1][1]

    def symbols(self) -> tuple[Symbol, ...]:
        return tuple(sym for _, sym in self.entries[1:])

    def __len__(self):
        return len(self.entries)

    def __str__(self):
        return " ".join(s.name for s in self.symbols()) or "ε"


def restack(t: ParseTables, alpha: Iterable[Symbol]) -> ParseStack:
    """Rebuild the stack for a symbol string by folding goto from state 0;
    fails with NotAViablePrefix at the first undefined goto."""
    stack = ParseStack()
    for idx, sym in enumerate(alpha):
        nxt = t.goto.get((stack.top_state, sym))
        if nxt is None:
            raise NotAViablePrefix(idx, sym)
        stack = stack.push(nxt, sym)
    return stack


def dump_tables(t: ParseTables) -> str:
    """Stable text dump: one block per state listing items, then the
    action/goto matrix in TSV."""
    out = []
    for st in t.states:
        out.append(f"state {st.id}")
        for item in st.canonical():
            out.append(f"  {item}")
    g = t.grammar
    terms = sorted(g.terminals)
    nts = sorted(g.nonterminals)
    out.append("")
    out.append("\t".join(["state"] + [s.name for s in terms] + [s.name for s in nts]))
    for k in range(len(t.states)):
        row = [str(k)]
        for term in terms:
            act = t.action.get((k, term))
            if act is None:
                row.append(".")
            elif isinstance(act, Shift):
                row.append(f"s{act.state}")
            elif isinstance(act, Reduce):
                row.append(f"r({act.production})")
            else:
                row.append("acc")
        for nt in nts:
            dst = t.goto.get((k, nt))
            row.append("." if dst is None else f"g{dst}")
        out.append("\t".join(row))
    return "\n".join(out) + "\n"
