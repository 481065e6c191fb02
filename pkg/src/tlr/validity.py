"""Conservation-function computation and the validity verdict.

The conservation function maps each production of the current grammar to how
much of it the in-progress parse has committed to: -1 for uninvolved ("free")
productions, body-length + 1 for entirely conserved ones, and a positive
prefix length otherwise.  A transformation is valid when the transformed
production set keeps a matching counterpart for every conserved production.

The computation traces, through the LR(1) item sets along the parse stack,
every way the lookahead could be derived next:

* scanning the tail of an item for the lookahead (possibly through nullable
  symbols), recording pivot positions;
* when a tail derives the empty string, popping to where the item began and
  chaining to the items that introduced it, then retrying from there; such a
  chain hop only counts when an item carrying the parse lookahead is present
  (the completed production must be one the parser could legally follow with
  the lookahead);
* once the lookahead is located, tracing all ancestor items down the stack,
  which are conserved through the symbol just after their dot.

Pairs recorded while climbing stay pending until some continuation actually
reaches the lookahead; pending pairs of a failed branch are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .errors import NotAtNonterminalTop
from .grammar import END, Grammar, Production, Symbol, Transformation
from .lr1 import Item, ParseStack, ParseTables, build_tables, nullable_set, _first_map


class VisitPair(NamedTuple):
    """(production, i): some trace visited the first i symbols of the
    production (i = len(body) + 1 means the whole production plus its end)."""

    production: Production
    count: int


class ConservationMap:
    """Total map production -> conservation value for one stack/lookahead
    configuration.  Includes the augmented production."""

    __slots__ = ("values",)

    def __init__(self, values: dict):
        self.values = dict(values)

    def value(self, production: Production) -> int:
        return self.values[production]

    def conserved(self):
        return {p: v for p, v in self.values.items() if v >= 1}

    def free(self):
        return {p for p, v in self.values.items() if v == -1}

    def is_entirely_conserved(self, production: Production) -> bool:
        return self.values[production] == len(production.body) + 1

    def items(self):
        return self.values.items()

    def __eq__(self, other):
        if not isinstance(other, ConservationMap):
            return NotImplemented
        return self.values == other.values

    def __str__(self):
        parts = [f"{p}: {v}" for p, v in sorted(self.values.items(),
                                                key=lambda kv: str(kv[0]))]
        return "; ".join(parts)


class _Core(NamedTuple):
    production: Production
    dot: int

    @property
    def head(self):
        return self.production.head

    @property
    def next_symbol(self):
        body = self.production.body
        return body[self.dot] if self.dot < len(body) else None


class _Context:
    """Per-computation state: grammar facts, item sets, lookahead, caches."""

    def __init__(self, g: Grammar, tables: ParseTables, lookahead: Symbol,
                 memoize=True):
        self.g = g
        self.tables = tables
        self.lookahead = lookahead
        self.memoize = memoize
        self.nullable = nullable_set(g)
        self._first = _first_map(g, self.nullable)
        self._sym_cache: dict[Symbol, tuple] = {}

    def derives_lookahead(self, x: Symbol) -> bool:
        if x.is_terminal:
            return x == self.lookahead
        return self.lookahead in self._first[x]

    def is_nullable(self, x: Symbol) -> bool:
        return x in self.nullable

    # -- Procedure: first-derivation pivot of a symbol string ---------------

    def string_pivot(self, body) -> tuple[int, bool]:
        """(k, f): k = len(body)+1 if the string is nullable; otherwise the
        last position that can start a derivation of the lookahead after a
        nullable prefix, or -1; f = whether the lookahead is derivable."""
        k, f = -1, False
        for i, x in enumerate(body, 1):
            fx, ex = self.derives_lookahead(x), self.is_nullable(x)
            if fx or ex:
                k = i
            if fx:
                f = True
            if not ex:
                return (k, True) if f else (-1, False)
        return len(body) + 1, f

    # -- Procedures: transformative-first for symbol / string ---------------

    def t_first_symbol(self, x: Symbol, visited: frozenset) -> tuple[frozenset, bool, bool]:
        """(pairs, f, e): every production-prefix visited while deriving the
        lookahead or the empty string from x."""
        if x.is_terminal:
            return frozenset(), x == self.lookahead, False
        if self.memoize and not visited and x in self._sym_cache:
            return self._sym_cache[x]
        pairs: set = set()
        f = self.derives_lookahead(x)
        e = self.is_nullable(x)
        for prod in self.g.productions_for(x):
            if prod in visited:
                continue
            k, f_p = self.string_pivot(prod.body)
            e_p = k == len(prod.body) + 1
            if f_p or e_p:
                sub, _, _ = self.t_first_string(prod.body, visited | {prod})
                pairs |= sub
                pairs.add(VisitPair(prod, k))
        result = (frozenset(pairs), f, e)
        if self.memoize and not visited:
            self._sym_cache[x] = result
        return result

    def t_first_string(self, gamma, visited: frozenset) -> tuple[frozenset, bool, int]:
        """(pairs, f, k) for a symbol string; k as in string_pivot."""
        pairs: set = set()
        k, f = -1, False
        for i, x in enumerate(gamma, 1):
            sub, fx, ex = self.t_first_symbol(x, visited)
            if fx or ex:
                k = i
            if fx:
                f = True
            pairs |= sub
            if not ex:
                if not f:
                    return frozenset(), False, -1
                return frozenset(pairs), f, k
        return frozenset(pairs), f, len(gamma) + 1


class _ScanResult(NamedTuple):
    hits: frozenset          # pairs flushed by finding the lookahead in the tail
    found: bool              # lookahead derivable within the tail
    tail_nullable: bool      # the whole tail derives epsilon
    pending: frozenset       # pairs awaiting a success above this item


def _scan_tail(ctx: _Context, core: _Core, base: int) -> _ScanResult:
    """Walk the item tail beyond ``base`` matched symbols, per the
    find-following loop: record a pivot pair on each lookahead hit, keep
    epsilon-way pairs pending, stop at the first non-nullable symbol."""
    prod = core.production
    body = prod.body
    n = len(body)
    hits: set = set()
    pending: set = set()
    found = False
    for i in range(base, n):
        y = body[i]
        if y.is_terminal:
            if y == ctx.lookahead:
                hits |= pending
                hits.add(VisitPair(prod, i + 1))
                found = True
            return _ScanResult(frozenset(hits), found, False, frozenset())
        sub, fx, ex = ctx.t_first_symbol(y, frozenset())
        if fx or ex:
            pending |= sub
        if fx:
            hits |= pending
            hits.add(VisitPair(prod, i + 1))
            pending = set()
            found = True
        if not ex:
            return _ScanResult(frozenset(hits), found, False, frozenset())
    pending.add(VisitPair(prod, n + 1))
    if prod == ctx.tables.augment and ctx.lookahead == END:
        # implicit end marker follows the start production
        hits |= pending
        found = True
    return _ScanResult(frozenset(hits), found, True, frozenset(pending))


def _state_cores(item_set) -> dict[_Core, set]:
    cores: dict[_Core, set] = {}
    for item in item_set:
        cores.setdefault(_Core(item.production, item.dot), set()).add(item.lookahead)
    return cores


class _Walk:
    """The item-set walk behind the conservation computation."""

    def __init__(self, ctx: _Context, stack: ParseStack):
        self.ctx = ctx
        self.stack = stack
        self.nodes: dict[tuple[int, _Core], dict] = {}
        self._anc_memo: dict[tuple[int, _Core], frozenset] = {}

    def _state_at(self, level: int) -> int:
        return self.stack.entries[level][0]

    def _cores_at(self, level: int) -> dict[_Core, set]:
        items = self.ctx.tables.state_items(self._state_at(level))
        return _state_cores(items.items)

    def _ensure_node(self, level: int, core: _Core, is_seed: bool):
        key = (level, core)
        if key in self.nodes:
            return self.nodes[key]
        base = core.dot if is_seed else core.dot + 1
        scan = _scan_tail(self.ctx, core, base)
        cores_here = self._cores_at(level)
        gate = scan.tail_nullable and self.ctx.lookahead in cores_here.get(core, ())
        node = {
            "scan": scan,
            "gate": gate,
            "seed": is_seed,
            "parents": (),
            "succ": False,
        }
        self.nodes[key] = node
        if gate:
            plevel = level - core.dot
            parent_cores = self._cores_at(plevel)
            parents = []
            for pcore in parent_cores:
                if pcore.next_symbol == core.head:
                    parents.append((plevel, pcore))
                    self._ensure_node(plevel, pcore, False)
            node["parents"] = tuple(parents)
        return node

    def propagate(self):
        """Mark every node from whose context the lookahead is reachable."""
        changed = True
        while changed:
            changed = False
            for node in self.nodes.values():
                if node["succ"]:
                    continue
                if node["scan"].found or any(
                        self.nodes[p]["succ"] for p in node["parents"]):
                    node["succ"] = True
                    changed = True

    def collect(self, with_ancestors=True) -> frozenset:
        pairs: set = set()
        for (level, core), node in self.nodes.items():
            scan = node["scan"]
            if scan.found:
                pairs |= scan.hits
                if with_ancestors:
                    pairs |= self._ancestors(level, core)
            if scan.tail_nullable and node["gate"] and any(
                    self.nodes[p]["succ"] for p in node["parents"]):
                pairs |= scan.pending
            if not node["seed"] and node["succ"]:
                pairs.add(VisitPair(core.production, core.dot + 1))
        return frozenset(pairs)

    def run(self) -> frozenset:
        top = len(self.stack.entries) - 1
        seeds = [c for c in self._cores_at(top) if c.dot >= 1]
        for core in sorted(seeds, key=lambda c: (str(c.production), c.dot)):
            self._ensure_node(top, core, True)
        self.propagate()
        return self.collect()

    # -- ancestor tracing (invoked at every item where the lookahead was
    #    actually found) ----------------------------------------------------

    def _reverse_closure(self, level: int, seed: _Core) -> list[_Core]:
        cores_here = self._cores_at(level)
        member = {seed}
        work = [seed]
        while work:
            cur = work.pop()
            if cur.dot != 0:
                continue
            for cand in cores_here:
                if cand.next_symbol == cur.head and cand not in member:
                    member.add(cand)
                    work.append(cand)
        return sorted(member, key=lambda c: (str(c.production), c.dot))

    def _ancestors(self, level: int, core: _Core) -> frozenset:
        key = (level, core)
        if key in self._anc_memo:
            return self._anc_memo[key]
        self._anc_memo[key] = frozenset()  # cycle guard; dot>=1 hops always descend
        plevel = level - core.dot
        j0 = _Core(core.production, 0)
        out: set = set()
        if j0 in self._cores_at(plevel):
            for member in self._reverse_closure(plevel, j0):
                out.add(VisitPair(member.production, member.dot + 1))
                if member.dot >= 1:
                    out |= self._ancestors(plevel, member)
        result = frozenset(out)
        self._anc_memo[key] = result
        return result


def compute_conservation(g: Grammar, stack: ParseStack, lookahead: Symbol,
                         tables: ParseTables | None = None,
                         memoize=True) -> ConservationMap:
    """Conservation function for the configuration (stack, lookahead).

    The stack's symbol string must be a viable prefix ending in a
    nonterminal, as the parser guarantees right after a reduction.
    """
    top = stack.top_symbol
    if top is None or not top.is_nonterminal:
        raise NotAtNonterminalTop(f"stack top is {top.name if top else 'ε'}")
    if tables is None:
        tables = build_tables(g)
    ctx = _Context(g, tables, lookahead, memoize=memoize)
    pairs = _Walk(ctx, stack).run()
    values = {p: -1 for p in g.productions}
    values[tables.augment] = -1
    for prod, count in pairs:
        if count > values.get(prod, -1):
            values[prod] = count
    return ConservationMap(values)


def find_following(g: Grammar, stack: ParseStack, item: Item, lookahead: Symbol,
                   tables: ParseTables | None = None):
    """All ways the lookahead could be included by ``item`` (a top-state item
    with the dot past position 0), assuming its production gets reduced.

    Returns (pairs, found): the success-witnessed visit pairs and whether any
    derivation of the lookahead was found.
    """
    if tables is None:
        tables = build_tables(g)
    ctx = _Context(g, tables, lookahead)
    walk = _Walk(ctx, stack)
    top = len(stack.entries) - 1
    core = _Core(item.production, item.dot)
    walk._ensure_node(top, core, True)
    walk.propagate()
    pairs = walk.collect(with_ancestors=False)
    found = walk.nodes[(top, core)]["succ"]
    return pairs, found


def trace_ancestors(g: Grammar, stack: ParseStack, item: Item, lookahead: Symbol,
                    tables: ParseTables | None = None) -> frozenset:
    """Ancestor items of ``item`` down the stack; each is conserved through
    the symbol just after its dot.  Meant to be called once the lookahead is
    known to be derivable from the item's context."""
    if tables is None:
        tables = build_tables(g)
    ctx = _Context(g, tables, lookahead)
    walk = _Walk(ctx, stack)
    top = len(stack.entries) - 1
    return walk._ancestors(top, _Core(item.production, item.dot))


def t_first_symbol(g: Grammar, x: Symbol, lookahead: Symbol, visited=frozenset()):
    """(pairs, visited', f, e) for a single symbol; f iff x derives a string
    starting with the lookahead, e iff x derives the empty string."""
    ctx = _Context(g, _TablesStub(g), lookahead, memoize=False)
    pairs, f, e = ctx.t_first_symbol(x, frozenset(visited))
    visited2 = frozenset(visited) | {p for p, _ in pairs}
    return pairs, visited2, f, e


def t_first_string(g: Grammar, gamma, lookahead: Symbol, visited=frozenset()):
    """(pairs, visited', f, k) for a symbol string; k = len+1 when the string
    is nullable, a pivot position when it derives the lookahead, else -1."""
    ctx = _Context(g, _TablesStub(g), lookahead, memoize=False)
    pairs, f, k = ctx.t_first_string(tuple(gamma), frozenset(visited))
    visited2 = frozenset(visited) | {p for p, _ in pairs}
    return pairs, visited2, f, k


class _TablesStub:
    """t_first procedures never touch the item sets; avoid building them."""

    def __init__(self, g):
        from .lr1 import augmented_production
        self.augment = augmented_production(g)

    def state_items(self, k):  # pragma: no cover - not reachable from t_first
        raise AssertionError("item sets not available")


@dataclass(frozen=True)
class Verdict:
    valid: bool
    violations: tuple[Production, ...] = ()

    def __bool__(self):
        return self.valid

    def __str__(self):
        if self.valid:
            return "valid"
        return "invalid: " + "; ".join(f"{p} not conserved" for p in self.violations)


def is_valid(g: Grammar, d: Transformation, v: ConservationMap) -> Verdict:
    """Check that the transformed production set conserves every conserved
    production recorded in ``v``."""
    new_pset = (g.production_set | d.add) - d.remove
    violations = []
    for prod, val in v.items():
        if val < 1:
            continue
        if prod not in g.production_set:
            continue  # the augmented production is re-added implicitly
        n = len(prod.body)
        if val == n + 1:
            ok = prod in new_pset
        else:
            prefix = prod.body[:val]
            ok = any(phi.head == prod.head and phi.body[:val] == prefix
                     for phi in new_pset)
        if not ok:
            violations.append(prod)
    violations.sort()
    return Verdict(not violations, tuple(violations))
