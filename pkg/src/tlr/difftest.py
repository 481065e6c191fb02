"""Differential testing: the item-set conservation computation against the
tree-enumeration oracle, over randomly generated small LR(1) grammars.

Grammars are kept at desk scale (few symbols, short bodies) so that the
oracle's exhaustive enumeration stays fast.  Configurations are explored
systematically: every stack the parser can reach within a bounded number of
shifts, sampled at each post-reduction moment (the only points where a
transformation can be requested).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .grammar import (Grammar, Production, Symbol, make_grammar, nonterminal,
                      render_grammar, terminal)
from .lr1 import Accept, ParseStack, Reduce, Shift, build_tables, is_lr1
from .oracle import oracle_conservation
from .validity import compute_conservation

_TERM_NAMES = ["a", "b", "c", "d"]
_NT_NAMES = ["S", "A", "B", "C"]


def random_grammar(rng: random.Random, max_terminals=4, max_nonterminals=4,
                   max_productions=8, max_body=3, max_tries=500) -> Grammar:
    """Rejection-sample a random LR(1) grammar whose language is nonempty
    within derivation depth 8."""
    for _ in range(max_tries):
        n_term = rng.randint(1, max_terminals)
        n_nt = rng.randint(1, max_nonterminals)
        terms = [terminal(n) for n in _TERM_NAMES[:n_term]]
        nts = [nonterminal(n) for n in _NT_NAMES[:n_nt]]
        n_prod = rng.randint(n_nt, max_productions)
        prods = []
        for i in range(n_prod):
            head = nts[i] if i < n_nt else rng.choice(nts)
            body_len = min(rng.choice([0, 1, 1, 2, 2, 3]), max_body)
            body = tuple(rng.choice(terms + nts) for _ in range(body_len))
            prod = Production(head, body)
            if prod not in prods:
                prods.append(prod)
        try:
            g = make_grammar(terms, nts, prods, nts[0])
        except Exception:
            continue
        if not _productive_within(g, depth=8):
            continue
        if not _all_reachable(g):
            continue
        ok, _ = is_lr1(g)
        if ok:
            return g
    raise RuntimeError("could not sample an LR(1) grammar; loosen the bounds")


def _all_reachable(g: Grammar) -> bool:
    reach = {g.start}
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.head in reach:
                for s in p.body:
                    if s.is_nonterminal and s not in reach:
                        reach.add(s)
                        changed = True
    return reach == set(g.nonterminals)


def _productive_within(g: Grammar, depth: int) -> bool:
    """True when the start symbol derives a terminal string within ``depth``
    rounds of the min-height fixpoint."""
    height = {t: 0 for t in g.terminals}
    for _ in range(depth):
        changed = False
        for p in g.productions:
            if all(s in height for s in p.body):
                h = 1 + max([height[s] for s in p.body], default=0)
                if h < height.get(p.head, depth + 1):
                    height[p.head] = h
                    changed = True
        if not changed:
            break
    return g.start in height and height[g.start] <= depth


@dataclass(frozen=True)
class Configuration:
    """A transform-point: the stack just after a reduction (head pushed) and
    the lookahead, plus the shifted tokens that led there."""

    stack: ParseStack
    lookahead: Symbol
    shifted: tuple[Symbol, ...]


def reachable_configurations(g: Grammar, tables=None, max_shifts=6,
                             limit=2000) -> list[Configuration]:
    """Every post-reduction configuration reachable with at most
    ``max_shifts`` shifts, by exhaustive exploration over lookahead choices."""
    if tables is None:
        tables = build_tables(g)
    terms = sorted(g.terminals)
    configs: list[Configuration] = []
    seen_cfg = set()
    seen_state = set()

    def explore(stack: ParseStack, shifted, lookahead, shifts_left):
        key = (stack.entries, lookahead)
        if key in seen_state or len(configs) >= limit:
            return
        if len(stack.entries) > 8 + 4 * max_shifts:  # runaway guard
            return
        seen_state.add(key)
        act = tables.action.get((stack.top_state, lookahead))
        if act is None or isinstance(act, Accept):
            return
        if isinstance(act, Shift):
            if shifts_left == 0:
                return
            new_stack = stack.push(act.state, lookahead)
            for la in terms:
                explore(new_stack, shifted + (lookahead,), la, shifts_left - 1)
            return
        assert isinstance(act, Reduce)
        prod = act.production
        popped = stack.pop(len(prod.body))
        dest = tables.goto.get((popped.top_state, prod.head))
        if dest is None:
            return
        new_stack = popped.push(dest, prod.head)
        ckey = (new_stack.entries, lookahead)
        if ckey not in seen_cfg:
            seen_cfg.add(ckey)
            configs.append(Configuration(new_stack, lookahead, shifted))
        explore(new_stack, shifted, lookahead, shifts_left)

    for la in terms:
        explore(ParseStack(), (), la, max_shifts)
    return configs


@dataclass
class Mismatch:
    grammar: Grammar
    configuration: Configuration
    production: Production
    computed: int
    oracle: int

    def bundle(self) -> str:
        """Counterexample as a grammar file plus the token prefix."""
        toks = " ".join(s.name for s in self.configuration.shifted)
        return (render_grammar(self.grammar)
                + f"# prefix: {toks}\n"
                + f"# lookahead: {self.configuration.lookahead.name}\n"
                + f"# production {self.production}: "
                + f"computed {self.computed}, oracle {self.oracle}\n")


def compare_configuration(g: Grammar, cfg: Configuration, tables=None):
    """Return the list of per-production disagreements between the item-set
    computation and the tree oracle at one configuration."""
    if tables is None:
        tables = build_tables(g)
    computed = compute_conservation(g, cfg.stack, cfg.lookahead, tables)
    oracle = oracle_conservation(g, cfg.stack.symbols(), cfg.lookahead)
    out = []
    for prod, val in computed.items():
        other = oracle.values.get(prod, -1)
        if val != other:
            out.append(Mismatch(g, cfg, prod, val, other))
    return out


def check_grammar(g: Grammar, max_shifts=6) -> list[Mismatch]:
    tables = build_tables(g)
    mismatches: list[Mismatch] = []
    for cfg in reachable_configurations(g, tables, max_shifts):
        mismatches.extend(compare_configuration(g, cfg, tables))
        if mismatches:
            break
    return mismatches


def minimize(g: Grammar, max_shifts=6) -> tuple[Grammar, Mismatch]:
    """Greedy production removal preserving some mismatch."""
    mismatches = check_grammar(g, max_shifts)
    assert mismatches
    current = g
    best = mismatches[0]
    changed = True
    while changed:
        changed = False
        for prod in list(current.productions):
            keep = [p for p in current.productions if p != prod]
            if not keep:
                continue
            try:
                smaller = make_grammar(sorted(current.terminals),
                                       sorted(current.nonterminals),
                                       keep, current.start,
                                       current.transformative - {prod})
                ok, _ = is_lr1(smaller)
                if not ok or not _productive_within(smaller, 8):
                    continue
                found = check_grammar(smaller, max_shifts)
            except Exception:
                continue
            if found:
                current = smaller
                best = found[0]
                changed = True
                break
    return current, best


@dataclass
class DiffTestReport:
    cases: int
    configurations: int
    mismatch: Mismatch | None = None
    minimized: tuple | None = None

    @property
    def ok(self):
        return self.mismatch is None


def run_difftest(seed: int, cases: int, max_shifts=6,
                 progress=None) -> DiffTestReport:
    """Generate ``cases`` random LR(1) grammars and compare the conservation
    computation against the oracle on every reachable configuration."""
    rng = random.Random(seed)
    total_cfg = 0
    for i in range(cases):
        g = random_grammar(rng)
        tables = build_tables(g)
        cfgs = reachable_configurations(g, tables, max_shifts)
        total_cfg += len(cfgs)
        for cfg in cfgs:
            found = compare_configuration(g, cfg, tables)
            if found:
                minimized = minimize(g, max_shifts)
                return DiffTestReport(i + 1, total_cfg, found[0], minimized)
        if progress is not None:
            progress(i + 1, cases, total_cfg)
    return DiffTestReport(cases, total_cfg)
