"""Exception types shared across the toolkit."""


class TlrError(Exception):
    """Base class for all toolkit errors."""


class GrammarError(TlrError):
    """A grammar or transformation violates a structural invariant."""


class DuplicateSymbol(GrammarError):
    pass


class UnknownSymbol(GrammarError):
    pass


class UnknownSymbolInBody(GrammarError):
    pass


class TransformativeNotInP(GrammarError):
    pass


class EndMarkerInBody(GrammarError):
    pass


class RemoveNotPresent(GrammarError):
    pass


class AddAlreadyPresent(GrammarError):
    pass


class RemovesTransformative(GrammarError):
    pass


class GrammarSyntaxError(TlrError):
    """Malformed grammar or transformation text."""

    def __init__(self, message, line, col):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class Conflict(TlrError):
    """The grammar is not LR(1); table construction found a conflict."""

    def __init__(self, state, terminal, contenders):
        names = ", ".join(sorted(str(c) for c in contenders))
        super().__init__(f"conflict in state {state} on {terminal.name}: {names}")
        self.state = state
        self.terminal = terminal
        self.contenders = tuple(contenders)


class NotAViablePrefix(TlrError):
    def __init__(self, position, symbol=None):
        what = f" at symbol {symbol.name!r}" if symbol is not None else ""
        super().__init__(f"goto undefined at index {position}{what}")
        self.position = position
        self.symbol = symbol


class NotAtNonterminalTop(TlrError):
    pass


class NotInLanguage(TlrError):
    pass


class BoundaryMismatch(TlrError):
    pass
