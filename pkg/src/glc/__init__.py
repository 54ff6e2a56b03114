"""Reasoning about contradictions and disagreements between guideline recommendations."""

from .dsl import DSLError, ParseError, format_atom, format_kb, parse_kb
from .kb import (
    Atom,
    Classification,
    Finding,
    KnowledgeBase,
    Verdict,
    check_internal_consistency,
    classify_pair,
    closure,
    derive,
    find_findings,
    lattice_and,
)
from .lattice import (
    BOTTOM,
    INF,
    NEG_INF,
    EnumKind,
    EnumVal,
    Interval,
    IntervalKind,
    Role,
    SetKind,
    SetVal,
    Sort,
    is_bottom,
    leq,
    meet,
)

__version__ = "0.1.0"
