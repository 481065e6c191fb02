"""Ground-truth conservation via parse trees.

The checker in :mod:`tlr.validity` walks item sets; this module answers the
same question by brute force over trees.  A *simplified tree* for a
configuration (stack string ``βB``, lookahead ``a``) is a parse tree pruned
to the stack boundary: the stack symbols become truncation leaves, everything
ordered after the lookahead's leaf is dropped, and interior nodes therefore
only need a *prefix* of their production on their children.  The *proper*
simplified trees additionally bound repetition along ancestor chains, which
makes the set finite; its conservation values coincide with the full
definition, so exhaustively enumerating it gives an independent oracle.

Epsilon subtrees hanging between the stack top and the lookahead are kept in
one canonical (minimal) shape to keep the enumerated set small; the
conservation values their alternative expansions would contribute are folded
in afterwards by a nullable-closure pass, which adds exactly the
entirely-conserved values any expansion could realize.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import count
from typing import Iterable

from .errors import BoundaryMismatch, NotAViablePrefix, NotInLanguage
from .grammar import END, Grammar, Production, Symbol
from .lr1 import (EPSILON, ParseTables, Reduce, Shift, Accept,
                  augmented_production, build_tables, nullable_set)


@dataclass(frozen=True)
class Node:
    """Ordered tree node: interior nodes carry a Production, leaves a Symbol
    or the epsilon marker."""

    label: object
    children: tuple["Node", ...] = ()

    @property
    def is_interior(self):
        return isinstance(self.label, Production)

    @property
    def head_symbol(self):
        if isinstance(self.label, Production):
            return self.label.head
        return self.label

    def __str__(self):
        return dump_tree(self)


def dump_tree(root: Node) -> str:
    """Indented dump, one node per line, preorder (the paper's node order)."""
    out = []

    def rec(node, depth):
        pad = "  " * depth
        if isinstance(node.label, Production):
            out.append(pad + str(node.label))
        elif node.label is EPSILON:
            out.append(pad + "ε")
        else:
            out.append(pad + node.label.name)
        for child in node.children:
            rec(child, depth + 1)

    rec(root, 0)
    return "\n".join(out) + "\n"


def preorder_paths(root: Node):
    """(path, node) pairs in preorder; a path is the tuple of child indices.

    Tuple comparison of paths realizes the paper's total node order:
    ancestors before descendants, siblings left to right.
    """
    out = []

    def rec(node, path):
        out.append((path, node))
        for i, child in enumerate(node.children):
            rec(child, path + (i,))

    rec(root, ())
    return out


def node_at(root: Node, path) -> Node:
    node = root
    for i in path:
        node = node.children[i]
    return node


def tree_yield(root: Node) -> tuple[Symbol, ...]:
    """Leaf labels in order, epsilon leaves dropped."""
    out = []

    def rec(node):
        if not node.children:
            if node.label is not EPSILON and not isinstance(node.label, Production):
                out.append(node.label)
            return
        for child in node.children:
            rec(child)

    rec(root)
    return tuple(out)


def tree_height(root: Node) -> int:
    if not root.children:
        return 0
    return 1 + max(tree_height(c) for c in root.children)


def is_parse_proper(root: Node) -> bool:
    """Every interior node's child-head string is a prefix of its body."""
    for _, node in preorder_paths(root):
        if not isinstance(node.label, Production):
            continue
        body = node.label.body
        if not body:
            if not all(c.label is EPSILON for c in node.children):
                return False
            continue
        heads = tuple(c.head_symbol for c in node.children if c.label is not EPSILON)
        if heads != body[:len(heads)]:
            return False
    return True


def is_parse_complete(root: Node) -> bool:
    """Every interior node's child-head string equals its body."""
    for _, node in preorder_paths(root):
        if not isinstance(node.label, Production):
            continue
        body = node.label.body
        if not body:
            if not (len(node.children) == 1 and node.children[0].label is EPSILON):
                return False
            continue
        heads = tuple(c.head_symbol for c in node.children if c.label is not EPSILON)
        if heads != body:
            return False
    return True


# --------------------------------------------------------------------------
# Parse trees from the LR reduce sequence
# --------------------------------------------------------------------------

EPS_LEAF = Node(EPSILON)


def derive_parse_tree(g: Grammar, sentence: Iterable[Symbol],
                      tables: ParseTables | None = None) -> Node:
    """The unique parse tree of ``sentence`` (without the end marker), built
    from the canonical parser's reduce sequence."""
    if tables is None:
        tables = build_tables(g)
    toks = list(sentence) + [END]
    pos = 0
    states = [0]
    forest: list[Node] = []
    while True:
        a = toks[pos]
        act = tables.action.get((states[-1], a))
        if act is None:
            raise NotInLanguage(f"no action in state {states[-1]} on {a.name}")
        if isinstance(act, Shift):
            forest.append(Node(a))
            states.append(act.state)
            pos += 1
        elif isinstance(act, Reduce):
            n = len(act.production.body)
            children = tuple(forest[len(forest) - n:]) if n else (EPS_LEAF,)
            if n:
                del forest[len(forest) - n:]
                del states[len(states) - n:]
            forest.append(Node(act.production, children))
            nxt = tables.goto.get((states[-1], act.production.head))
            if nxt is None:
                raise NotInLanguage("goto undefined after reduction")
            states.append(nxt)
        else:
            assert isinstance(act, Accept)
            assert len(forest) == 1
            return forest[0]


# --------------------------------------------------------------------------
# Simplified trees
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SimplifiedTree:
    """A pruned tree for a configuration: root is the augmented node, the
    yield is the stack string followed by the lookahead (lookahead absent
    when it is the end marker)."""

    root: Node
    prefix_len: int
    lookahead: Symbol

    def symbol_leaf_paths(self):
        return [p for p, n in preorder_paths(self.root)
                if not n.children and isinstance(n.label, Symbol)]

    @property
    def b_path(self):
        return self.symbol_leaf_paths()[self.prefix_len - 1]

    @property
    def a_path(self):
        if self.lookahead == END:
            return None
        return self.symbol_leaf_paths()[-1]

    def __str__(self):
        return dump_tree(self.root)


def _is_strict_prefix(p, q):
    return len(p) < len(q) and q[:len(p)] == p


def conservation_of_tree(st: SimplifiedTree) -> dict:
    """H values per production: max over that production's nodes."""
    bpath = st.b_path
    apath = st.a_path
    out: dict[Production, int] = {}
    for path, node in preorder_paths(st.root):
        if not isinstance(node.label, Production):
            continue
        n = len(node.label.body)  # children match body slots; epsilon leaves aside
        if apath is None:
            if _is_strict_prefix(path, bpath) or path > bpath:
                h = n + 1
            else:
                h = -1
        else:
            if _is_strict_prefix(path, apath):
                h = apath[len(path)] + 1
            elif _is_strict_prefix(path, bpath):
                h = n + 1
            elif bpath < path < apath:
                h = n + 1
            else:
                h = -1
        if h > out.get(node.label, -1):
            out[node.label] = h
    return {p: h for p, h in out.items() if h != -1}


def simplify(t: Node, prefix_len: int, b_index: int, g: Grammar) -> SimplifiedTree:
    """Prune a full parse tree to the configuration whose stack string has
    ``prefix_len`` symbols, the last of which is the node at preorder index
    ``b_index``.

    The stack symbols before B are recovered by decomposing the forest left
    of B's ancestor path into exactly prefix_len - 1 constituents (whole
    subtrees; epsilon subtrees may be skipped, which corresponds to stack
    symbols already expanded to nothing in the sentential form).
    """
    order = preorder_paths(t)
    if not 0 <= b_index < len(order):
        raise BoundaryMismatch(f"b_index {b_index} out of range")
    bpath, bnode = order[b_index]
    if not isinstance(bnode.label, Production):
        raise BoundaryMismatch("the B node must be a nonterminal's node")
    term_paths = [p for p, n in order
                  if not n.children and isinstance(n.label, Symbol)]
    after = [p for p in term_paths if p > bpath and not _is_strict_prefix(bpath, p)]
    apath = min(after) if after else None
    lookahead = node_at(t, apath).label if apath else END

    # forest strictly left of the B path
    pre: list[tuple[tuple, Node]] = []
    for depth in range(len(bpath)):
        parent_path = bpath[:depth]
        parent = node_at(t, parent_path)
        for i in range(bpath[depth]):
            pre.append((parent_path + (i,), parent.children[i]))

    def options(path, node):
        # ways one subtree contributes constituents, preferring it whole
        if not node.children:
            if node.label is EPSILON:
                return [()]
            return [(path,)]
        opts = [(path,)]
        child_opts = [options(path + (i,), c) for i, c in enumerate(node.children)]
        combos = [()]
        for co in child_opts:
            combos = [acc + pick for acc in combos for pick in co]
        for combo in combos:
            if combo != (path,):
                opts.append(combo)
        # epsilon-yield interior nodes may vanish entirely
        if not tree_yield(node):
            opts.append(())
        return opts

    need = prefix_len - 1

    def search(idx, remaining):
        if idx == len(pre):
            return [] if remaining == 0 else None
        for opt in options(*pre[idx]):
            if len(opt) > remaining:
                continue
            rest = search(idx + 1, remaining - len(opt))
            if rest is not None:
                return list(opt) + rest
        return None

    chosen = search(0, need)
    if chosen is None:
        raise BoundaryMismatch(
            f"cannot decompose the prefix region into {need} constituents")
    constituents = set(chosen) | {bpath}

    def rebuild(path, node):
        if path in constituents:
            return Node(node.head_symbol)
        if not node.children:
            return Node(node.label)
        kept = []
        for i, child in enumerate(node.children):
            cpath = path + (i,)
            if apath is not None and cpath > apath and not _is_strict_prefix(cpath, apath):
                break
            kept.append(rebuild(cpath, child))
        return Node(node.label, tuple(kept))

    aug = augmented_production(g)
    root = Node(aug, (rebuild((), t),))
    return SimplifiedTree(root, prefix_len, lookahead)


# --------------------------------------------------------------------------
# Properness
# --------------------------------------------------------------------------

def _ancestor_chain(path):
    return [path[:k] for k in range(len(path))]


def _b_segments(st: SimplifiedTree):
    """The prefix-ancestral interstitial segments: runs of B-ancestors
    between consecutive branching ancestors.  An ancestor branches when a
    child off the path to B carries a nonempty yield (a stack constituent,
    or the spine leading to the lookahead)."""
    bpath = st.b_path
    ancestors = _ancestor_chain(bpath)
    segments = []
    cur = []
    for anc in ancestors:  # ascending (root-first) order
        node = node_at(st.root, anc)
        on_path = bpath[len(anc)]
        branching = any(tree_yield(c) for k, c in enumerate(node.children)
                        if k != on_path)
        if branching:
            segments.append(cur)
            cur = []
        else:
            cur.append(anc)
    segments.append(cur)
    return segments


def is_proper_above_b(st: SimplifiedTree) -> bool:
    for seg in _b_segments(st):
        labels: dict = {}
        for path in seg:
            lbl = node_at(st.root, path).label
            labels[lbl] = labels.get(lbl, 0) + 1
            if labels[lbl] > 2:
                return False
    return True


def is_proper_above_a(st: SimplifiedTree) -> bool:
    apath = st.a_path
    if apath is None:
        return True
    bpath = st.b_path
    labels: dict = {}
    for anc in _ancestor_chain(apath):
        if _is_strict_prefix(anc, bpath) or anc == bpath[:len(anc)]:
            continue
        lbl = node_at(st.root, anc).label
        labels[lbl] = labels.get(lbl, 0) + 1
        if labels[lbl] > 2:
            return False
    return True


# --------------------------------------------------------------------------
# The proper projection operator (Φ then Λ with a decision function)
# --------------------------------------------------------------------------

def rho_zero(st, n1, n2, n3):
    return 0


def make_rho(production: Production, n: int):
    """Decision function keeping the designated (production, H=n) node: pick
    the lower splice when such a node sits strictly between the first two
    triple members."""

    def rho(st, n1, n2, n3):
        hs = conservation_paths(st)
        for path, (lbl, h) in hs.items():
            if lbl == production and h == n and n1 < path < n2 and _is_strict_prefix(path, n2):
                return 0
        return 1

    return rho


def conservation_paths(st: SimplifiedTree) -> dict:
    """path -> (production, H) for every interior node with defined H."""
    bpath = st.b_path
    apath = st.a_path
    out = {}
    for path, node in preorder_paths(st.root):
        if not isinstance(node.label, Production):
            continue
        n = len(node.label.body)
        if apath is None:
            if _is_strict_prefix(path, bpath) or (path > bpath and not _is_strict_prefix(path, bpath)):
                out[path] = (node.label, n + 1)
            continue
        if _is_strict_prefix(path, apath):
            out[path] = (node.label, apath[len(path)] + 1)
        elif _is_strict_prefix(path, bpath):
            out[path] = (node.label, n + 1)
        elif bpath < path < apath:
            out[path] = (node.label, n + 1)
    return out


def _splice(root: Node, gone: tuple, keep: tuple) -> Node:
    """Replace the subtree at ``gone`` with the subtree at ``keep`` (a
    descendant of ``gone``)."""
    keep_node = node_at(root, keep)

    def rec(path, node):
        if path == gone:
            return keep_node
        i = gone[len(path)]
        children = list(node.children)
        children[i] = rec(path + (i,), node.children[i])
        return Node(node.label, tuple(children))

    if gone == ():
        return keep_node
    return rec((), root)


def _least_triple(paths_and_labels):
    """Least (N1, N2, N3) among same-labeled triples on an ancestor chain."""
    by_label: dict = {}
    for path, lbl in paths_and_labels:
        by_label.setdefault(lbl, []).append(path)
    best = None
    for paths in by_label.values():
        paths.sort()
        if len(paths) >= 3:
            cand = tuple(paths[:3])
            if best is None or cand < best:
                best = cand
    return best


def _b_triple(st: SimplifiedTree):
    for seg in _b_segments(st):
        triple = _least_triple([(p, node_at(st.root, p).label) for p in seg])
        if triple:
            return triple
    return None


def _a_triple(st: SimplifiedTree):
    apath = st.a_path
    if apath is None:
        return None
    bpath = st.b_path
    chain = [p for p in _ancestor_chain(apath) if p != bpath[:len(p)]]
    return _least_triple([(p, node_at(st.root, p).label) for p in chain])


def make_proper(st: SimplifiedTree, rho=rho_zero) -> SimplifiedTree:
    """Apply the B-side projection to its limit, then the lookahead-side one,
    yielding a proper simplified tree with the same yield."""
    while True:
        triple = _b_triple(st)
        if triple is None:
            break
        n1, n2, n3 = triple
        if rho(st, n1, n2, n3) == 0:
            st = SimplifiedTree(_splice(st.root, n1, n2), st.prefix_len, st.lookahead)
        else:
            st = SimplifiedTree(_splice(st.root, n2, n3), st.prefix_len, st.lookahead)
    while True:
        triple = _a_triple(st)
        if triple is None:
            break
        n1, n2, n3 = triple
        if rho(st, n1, n2, n3) == 0:
            st = SimplifiedTree(_splice(st.root, n1, n2), st.prefix_len, st.lookahead)
        else:
            st = SimplifiedTree(_splice(st.root, n2, n3), st.prefix_len, st.lookahead)
    return st


# --------------------------------------------------------------------------
# Canonical epsilon subtrees
# --------------------------------------------------------------------------

def _canonical_eps_trees(g: Grammar) -> dict[Symbol, Node]:
    nullable = nullable_set(g)
    size: dict[Symbol, int] = {}
    tree: dict[Symbol, Node] = {}
    changed = True
    while changed:
        changed = False
        for prod in g.productions:
            if prod.head not in nullable:
                continue
            if any(s not in tree for s in prod.body):
                if prod.body:
                    continue
            total = 1 + sum(size[s] for s in prod.body)
            if prod.head not in size or total < size[prod.head]:
                size[prod.head] = total
                children = tuple(tree[s] for s in prod.body) if prod.body else (EPS_LEAF,)
                tree[prod.head] = Node(prod, children)
                changed = True
    return tree


# --------------------------------------------------------------------------
# Enumeration of the proper simplified tree set
# --------------------------------------------------------------------------

_EMPTY_CHAIN = frozenset()


def _bump(chain: frozenset, prod: Production) -> frozenset | None:
    d = dict(chain)
    n = d.get(prod, 0) + 1
    if n > 2:
        return None
    d[prod] = n
    return frozenset(d.items())


class _Enumerator:
    """Top-down generator of candidate trees for one configuration.

    In pinned mode (the default) subtree shapes are restricted to those a
    continuation of the actual parse could realize: interior structure may
    only cover slices reaching the stack top, and epsilon fillers may only
    hang at or beyond the stack top.  The relaxed mode admits every
    sentential-form decomposition (useful for prefixes that never occur as
    parser stacks).
    """

    def __init__(self, g: Grammar, prefix, lookahead: Symbol, pinned=True):
        self.g = g
        self.prefix = tuple(prefix)
        self.lookahead = lookahead
        self.pinned = pinned
        self.nullable = nullable_set(g)
        self.eps_tree = _canonical_eps_trees(g)
        self.memo: dict = {}

    def gen(self, x: Symbol, i: int, j: int, with_a: bool, chain: frozenset):
        key = (x, i, j, with_a, chain)
        if key in self.memo:
            return self.memo[key]
        self.memo[key] = ()  # cycle cut; every cycle repeats a production
        n_stack = len(self.prefix)
        out: list[Node] = []
        if not with_a:
            if i == j and x.is_nonterminal and x in self.nullable:
                if not self.pinned or i == n_stack:
                    out.append(self.eps_tree[x])
            if j == i + 1 and self.prefix[i] == x:
                out.append(Node(x))
        else:
            if x.is_terminal and x == self.lookahead and i == j:
                out.append(Node(x))
        if with_a:
            expandable = x.is_nonterminal
        else:
            # interior structure over an already-reduced slice that stops
            # short of the stack top cannot arise in any continuation
            expandable = (x.is_nonterminal and i < j
                          and (not self.pinned or j == n_stack))
        if expandable:
            cover = (i, j, with_a)
            for prod in self.g.productions_for(x):
                chain2 = _bump(chain, prod)
                if chain2 is None:
                    continue
                out.extend(self._expand(prod, i, j, with_a, cover, chain2))
        result = tuple(out)
        self.memo[key] = result
        return result

    def _seq(self, symbols, i, j, cover, chain2):
        """All ways ``symbols`` cover the slice [i, j) exactly, as children
        tuples (no lookahead inside)."""
        if not symbols:
            return [()] if i == j else []
        x, rest = symbols[0], symbols[1:]
        out = []
        for mid in range(i, j + 1):
            ccover = (i, mid, False)
            cchain = chain2 if ccover == cover else _EMPTY_CHAIN
            heads = self.gen(x, i, mid, False, cchain)
            if not heads:
                continue
            for tail in self._seq(rest, mid, j, cover, chain2):
                for h in heads:
                    out.append((h,) + tail)
        return out

    def _expand(self, prod, i, j, with_a, cover, chain2):
        body = prod.body
        n = len(body)
        out = []
        if not with_a:
            if not body:
                if i == j:
                    out.append(Node(prod, (EPS_LEAF,)))
                return out
            for children in self._seq(body, i, j, cover, chain2):
                out.append(Node(prod, children))
            return out
        # the lookahead sits inside the last kept child; later body symbols
        # are cut away, which is what makes the node merely parse-proper
        for m in range(1, n + 1):
            a_sym = body[m - 1]
            for mid in range(i, j + 1):
                ccover = (mid, j, True)
                cchain = chain2 if ccover == cover else _EMPTY_CHAIN
                tails = self.gen(a_sym, mid, j, True, cchain)
                if not tails:
                    continue
                for heads in self._seq(body[:m - 1], i, mid, cover, chain2):
                    for t in tails:
                        out.append(Node(prod, heads + (t,)))
        return out

    def roots(self):
        aug = augmented_production(self.g)
        n = len(self.prefix)
        with_a = self.lookahead != END
        chain = _bump(_EMPTY_CHAIN, aug)
        return [Node(aug, (t,))
                for t in self.gen(self.g.start, 0, n, with_a, chain)]


def enumerate_proper_trees(g: Grammar, prefix, lookahead: Symbol,
                           pinned=True) -> frozenset[SimplifiedTree]:
    """Exactly the proper simplified trees for the configuration: yield is
    the prefix followed by the lookahead, parse-proper, repetition-bounded
    above the stack top and above the lookahead."""
    prefix = tuple(prefix)
    if not prefix or not prefix[-1].is_nonterminal:
        raise NotAViablePrefix(max(len(prefix) - 1, 0),
                               prefix[-1] if prefix else None)
    trees = _enumerate_raw(g, prefix, lookahead, pinned)
    if not trees:
        lookaheads = sorted(g.terminals)
        reachable = any(_enumerate_raw(g, prefix, la, pinned)
                        for la in lookaheads if la != lookahead)
        if not reachable:
            raise NotAViablePrefix(len(prefix) - 1, prefix[-1])
    return frozenset(trees)


def _enumerate_raw(g, prefix, lookahead, pinned=True):
    enum = _Enumerator(g, prefix, lookahead, pinned)
    out = []
    expected_yield = prefix + ((lookahead,) if lookahead != END else ())
    for root in enum.roots():
        st = SimplifiedTree(root, len(prefix), lookahead)
        if tree_yield(root) != expected_yield:
            continue
        if not (is_proper_above_b(st) and is_proper_above_a(st)):
            continue
        out.append(st)
    return out


def oracle_conservation(g: Grammar, prefix, lookahead: Symbol,
                        trees: frozenset[SimplifiedTree] | None = None,
                        pinned=True):
    """The proper simplified conservation function: per production, the
    maximum H over every node of every proper simplified tree, else -1."""
    from .validity import ConservationMap

    prefix = tuple(prefix)
    if trees is None:
        trees = enumerate_proper_trees(g, prefix, lookahead, pinned)
    aug = augmented_production(g)
    values = {p: -1 for p in g.productions}
    values[aug] = -1
    eps_roots: set[Symbol] = set()
    for st in trees:
        for prod, h in conservation_of_tree(st).items():
            if h > values.get(prod, -1):
                values[prod] = h
        bpath = st.b_path
        for path, node in preorder_paths(st.root):
            if isinstance(node.label, Production) and path > bpath and \
                    not _is_strict_prefix(path, bpath) and not tree_yield(node):
                eps_roots.add(node.label.head)
    # every production usable in some epsilon expansion of a witnessed filler
    # is entirely conserved, whatever canonical shape the trees carry
    if eps_roots:
        nullable = nullable_set(g)
        reach = set(eps_roots)
        changed = True
        usable: set[Production] = set()
        while changed:
            changed = False
            for prod in g.productions:
                if prod in usable or prod.head not in reach:
                    continue
                if all(s in nullable for s in prod.body):
                    usable.add(prod)
                    for s in prod.body:
                        if s not in reach:
                            reach.add(s)
                    changed = True
        for prod in usable:
            v = len(prod.body) + 1
            if v > values[prod]:
                values[prod] = v
    return ConservationMap(values)
