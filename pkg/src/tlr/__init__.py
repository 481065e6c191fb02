"""Toolkit for transformative LR(1) languages: grammars whose production set
changes during a left-to-right parse, with a validity test guaranteeing the
parse terminates."""

from .grammar import (EMPTY_TRANSFORMATION, END, Grammar, Production,
                      ScriptedProvider, Symbol, Transformation,
                      apply_transformation, empty_provider, make_grammar,
                      nonterminal, parse_grammar_text,
                      parse_transformation_text, render_grammar,
                      render_transformation, terminal)
from .lr1 import (EPSILON, Item, ItemSet, ParseStack, ParseTables,
                  build_tables, closure, dump_tables, first, goto_set, is_lr1,
                  restack)
from .oracle import (SimplifiedTree, derive_parse_tree, dump_tree,
                     enumerate_proper_trees, make_proper, oracle_conservation,
                     simplify)
from .parser import ParseEvent, ParseResult, ParserState, parse
from .validity import (ConservationMap, Verdict, VisitPair,
                       compute_conservation, find_following, is_valid,
                       t_first_string, t_first_symbol, trace_ancestors)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
