"""The transformative LR parsing loop.

Parsing proceeds exactly like canonical LR(1) until a transformative
production is reduced.  At that point the delta provider is consulted, the
returned transformation is checked for validity against the current stack
(with the reduced head conceptually pushed) and lookahead, and on success the
grammar is replaced, tables are rebuilt from scratch, and the stack is
restacked through the new goto function.  An invalid transformation, a
transformed grammar that is not LR(1), or a failed restack each reject the
input with that reason.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable

from .errors import (Conflict, GrammarError, NotAViablePrefix, TlrError,
                     UnknownSymbol)
from .grammar import (END, DeltaProvider, Grammar, Production, Symbol,
                      Transformation, apply_transformation, empty_provider,
                      validate_transformation)
from .lr1 import Accept, ParseStack, Reduce, Shift, build_tables, restack
from .validity import Verdict, compute_conservation, is_valid

log = logging.getLogger(__name__)

SYNTAX_ERROR = "syntax-error"
INVALID_TRANSFORMATION = "invalid-transformation"
NOT_LR1 = "transformed-grammar-not-lr1"
RESTACK_FAILED = "restack-failed"
PROVIDER_ERROR = "provider-error"


@dataclass(frozen=True)
class ParseEvent:
    kind: str                      # shift | reduce | transform | accept | reject
    symbol: Symbol | None = None
    production: Production | None = None
    transformation: Transformation | None = None
    accepted: bool | None = None
    reason: str | None = None
    detail: str = ""

    def render(self) -> str:
        if self.kind == "shift":
            return f"SHIFT {self.symbol.name}"
        if self.kind == "reduce":
            return f"REDUCE {self.production}"
        if self.kind == "transform":
            status = "accepted" if self.accepted else f"rejected ({self.reason})"
            extra = f": {self.detail}" if self.detail else ""
            return f"TRANSFORM {status} {self.transformation}{extra}".rstrip()
        if self.kind == "accept":
            return "ACCEPT"
        return f"REJECT {self.reason}: {self.detail}".rstrip(": ")


@dataclass
class ParseResult:
    accepted: bool
    reason: str | None
    detail: str
    events: list[ParseEvent]

    def trace(self) -> str:
        return "\n".join(e.render() for e in self.events) + "\n"


class TransformObservation:
    """Snapshot handed to an observer at each transform point."""

    def __init__(self, pre_grammar, pre_tables, stack_after_pop, head,
                 lookahead, transformation, verdict, conservation):
        self.pre_grammar = pre_grammar
        self.pre_tables = pre_tables
        self.stack_after_pop = stack_after_pop
        self.head = head
        self.lookahead = lookahead
        self.transformation = transformation
        self.verdict = verdict
        self.conservation = conservation


class ParserState:
    """One in-flight parse; exclusively owned by its driver."""

    def __init__(self, grammar: Grammar, tokens, provider: DeltaProvider | None = None,
                 observer: Callable[[TransformObservation], None] | None = None):
        self.grammar = grammar
        self.tables = build_tables(grammar)
        self.stack = ParseStack()
        self.provider = provider if provider is not None else empty_provider
        self.observer = observer
        self.scanned_since_reduction: tuple[Symbol, ...] = ()
        self.provider_memory: bytes = b""
        toks = list(tokens)
        for t in toks:
            if t not in grammar.terminals or t == END:
                raise UnknownSymbol(f"token {t.name!r} is not an input terminal")
        self.tokens = toks + [END]
        self.cursor = 0
        self.events: list[ParseEvent] = []
        self.verdict: ParseResult | None = None

    @property
    def lookahead(self) -> Symbol:
        return self.tokens[self.cursor]

    @property
    def done(self) -> bool:
        return self.verdict is not None

    def _finish(self, accepted, reason=None, detail=""):
        kind = "accept" if accepted else "reject"
        self.events.append(ParseEvent(kind, reason=reason, detail=detail))
        self.verdict = ParseResult(accepted, reason, detail, self.events)
        return self.events[-1]

    def step(self) -> ParseEvent:
        """Perform exactly one shift, reduce (with any transformation), or
        halt action."""
        assert not self.done
        a = self.lookahead
        act = self.tables.action.get((self.stack.top_state, a))
        if act is None:
            return self._finish(False, SYNTAX_ERROR,
                                f"state {self.stack.top_state}, lookahead {a.name}")
        if isinstance(act, Shift):
            self.stack = self.stack.push(act.state, a)
            self.scanned_since_reduction += (a,)
            self.cursor += 1
            event = ParseEvent("shift", symbol=a)
            self.events.append(event)
            return event
        if isinstance(act, Accept):
            return self._finish(True)
        assert isinstance(act, Reduce)
        prod = act.production
        self.stack = self.stack.pop(len(prod.body))
        event = ParseEvent("reduce", production=prod)
        self.events.append(event)
        if prod in self.grammar.transformative:
            terr = self._transform_step(prod)
            if terr is not None:
                return terr
        self.scanned_since_reduction = ()
        dest = self.tables.goto.get((self.stack.top_state, prod.head))
        if dest is None:
            # cannot happen after a validity-checked transformation
            log.error("internal: goto undefined for %s after reduction", prod.head)
            return self._finish(False, RESTACK_FAILED,
                                f"goto undefined for {prod.head.name}")
        self.stack = self.stack.push(dest, prod.head)
        return event

    def _transform_step(self, prod: Production) -> ParseEvent | None:
        """Algorithm 2: consult the provider, validate, rebuild, restack.

        Called right after popping the reduced body, before pushing the goto
        for the head.  Returns a terminal reject event on failure."""
        a = self.lookahead
        try:
            memory, delta = self.provider(self.scanned_since_reduction,
                                          self.provider_memory, self.grammar,
                                          tuple(self.events))
        except TlrError as exc:
            return self._finish(False, PROVIDER_ERROR, str(exc))
        # validate against the viable prefix ending in the reduced head
        head_goto = self.tables.goto.get((self.stack.top_state, prod.head))
        assert head_goto is not None, "uncovered state must accept the head"
        validation_stack = self.stack.push(head_goto, prod.head)
        try:
            validate_transformation(self.grammar, delta)
        except GrammarError as exc:
            self.events.append(ParseEvent("transform", transformation=delta,
                                          accepted=False,
                                          reason=INVALID_TRANSFORMATION,
                                          detail=str(exc)))
            self._observe(validation_stack, prod.head, a, delta,
                          Verdict(False, ()), None)
            return self._finish(False, INVALID_TRANSFORMATION, str(exc))
        conservation = compute_conservation(self.grammar, validation_stack,
                                            a, self.tables)
        verdict = is_valid(self.grammar, delta, conservation)
        self._observe(validation_stack, prod.head, a, delta, verdict, conservation)
        if not verdict:
            detail = str(verdict)
            self.events.append(ParseEvent("transform", transformation=delta,
                                          accepted=False,
                                          reason=INVALID_TRANSFORMATION,
                                          detail=detail))
            return self._finish(False, INVALID_TRANSFORMATION, detail)
        self.provider_memory = memory
        if delta.is_empty:
            self.events.append(ParseEvent("transform", transformation=delta,
                                          accepted=True))
            return None
        try:
            new_grammar = apply_transformation(self.grammar, delta)
        except GrammarError as exc:  # structurally impossible after is_valid
            return self._finish(False, INVALID_TRANSFORMATION, str(exc))
        try:
            new_tables = build_tables(new_grammar)
        except Conflict as exc:
            self.events.append(ParseEvent("transform", transformation=delta,
                                          accepted=False, reason=NOT_LR1,
                                          detail=str(exc)))
            return self._finish(False, NOT_LR1, str(exc))
        try:
            new_stack = restack(new_tables, self.stack.symbols())
        except NotAViablePrefix as exc:
            # the validity check is supposed to fail first; reaching this
            # indicates an internal inconsistency
            log.error("internal: restack failed after a valid transformation: %s", exc)
            self.events.append(ParseEvent("transform", transformation=delta,
                                          accepted=False, reason=RESTACK_FAILED,
                                          detail=str(exc)))
            return self._finish(False, RESTACK_FAILED, str(exc))
        self.grammar = new_grammar
        self.tables = new_tables
        self.stack = new_stack
        self.events.append(ParseEvent("transform", transformation=delta,
                                      accepted=True))
        return None

    def _observe(self, stack, head, lookahead, delta, verdict, conservation):
        if self.observer is not None:
            self.observer(TransformObservation(
                self.grammar, self.tables, stack, head, lookahead, delta,
                verdict, conservation))

    def run(self) -> ParseResult:
        while not self.done:
            self.step()
        return self.verdict


def parse(g: Grammar, tokens: Iterable[Symbol], provider: DeltaProvider | None = None,
          observer=None) -> ParseResult:
    """Parse a token string (the end marker is appended automatically).

    Returns the verdict plus the full event trace; a rejection reason is one
    of syntax-error, invalid-transformation, transformed-grammar-not-lr1,
    restack-failed, or provider-error.
    """
    return ParserState(g, tokens, provider, observer).run()
