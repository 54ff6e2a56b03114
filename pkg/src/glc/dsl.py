"""Reader and writer for the ``.gkb`` knowledge-base format.

Example::

    # sorts, sources, then recommendations
    sort age: interval(years) role condition;
    sort frequency: interval(months) role action;
    sort modality: set {mammography, cbe} role action;
    source ACS;
    recommend screening { age: [50,74], frequency: [12,12] } @ ACS;

Statements end with ``;``.  On a syntax error the parser skips to the next
``;`` and carries on, so a file with several bad statements reports all of
them.  Declarations may appear in any order; references are resolved after
the whole file has been read.

The word ``bottom`` stands for the empty meet of any sort, so derived atoms
can be written back out and read again; it is reserved as an alphabet member.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .kb import Atom, KBError, KnowledgeBase, MalformedAtomError
from .lattice import (
    BOTTOM,
    INF,
    NEG_INF,
    EnumKind,
    EnumVal,
    Interval,
    IntervalKind,
    LatticeError,
    Role,
    SetKind,
    SetVal,
    Sort,
    validate_value,
)

BOTTOM_WORD = "bottom"


@dataclass(frozen=True)
class ParseError:
    line: int
    column: int
    message: str
    excerpt: str = ""

    def __str__(self):
        where = f"{self.line}:{self.column}"
        return f"{where}: {self.message}" + (f" (near {self.excerpt!r})" if self.excerpt else "")


class DSLError(Exception):
    """Raised by :func:`parse_kb` with every error found in one pass."""

    def __init__(self, errors: list[ParseError]):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>-?(?:inf\b|\d+(?:\.\d+)?(?:/\d+)?))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[:;,{}\[\]()@])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "number" | "punct" | "eof"
    text: str
    line: int
    column: int


def tokenize_dsl(text: str) -> tuple[list[Token], list[ParseError]]:
    tokens, errors = [], []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if m is None:
            errors.append(ParseError(line, column, "unexpected character", text[pos]))
            pos += 1
            continue
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and chunk == "inf":
                kind = "number"
            tokens.append(Token(kind, chunk, line, column))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens, errors


class _Syntax(Exception):
    def __init__(self, token: Token, message: str):
        self.error = ParseError(token.line, token.column, message, token.text)


# syntactic statements, resolved after the full pass
@dataclass
class _SortStmt:
    tok: Token
    name: str
    kind: object
    role: Role


@dataclass
class _SourceStmt:
    tok: Token
    name: str


@dataclass
class _AtomStmt:
    tok: Token
    predicate: str
    params: list  # (name_token, value_syntax)
    source_toks: list


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "eof":
            raise _Syntax(self.tok, f"expected {text!r}")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise _Syntax(self.tok, f"expected {what}")
        return self.advance()

    def idlist(self) -> list[Token]:
        out = [self.ident()]
        while self.tok.text == ",":
            self.advance()
            out.append(self.ident())
        return out

    def resync(self):
        while self.tok.kind != "eof" and self.tok.text != ";":
            self.advance()
        if self.tok.text == ";":
            self.advance()

    def statements(self, errors: list[ParseError]) -> list:
        stmts = []
        while self.tok.kind != "eof":
            try:
                stmts.append(self.statement())
            except _Syntax as exc:
                errors.append(exc.error)
                self.resync()
        return stmts

    def statement(self):
        head = self.tok
        if head.kind == "ident" and head.text == "sort":
            return self.sortdecl()
        if head.kind == "ident" and head.text == "source":
            self.advance()
            name = self.ident("source id")
            self.expect(";")
            return _SourceStmt(head, name.text)
        if head.kind == "ident" and head.text == "recommend":
            return self.atomdecl()
        raise _Syntax(head, "expected 'sort', 'source' or 'recommend'")

    def sortdecl(self) -> _SortStmt:
        head = self.advance()
        name = self.ident("sort name")
        self.expect(":")
        kind_tok = self.ident("sort kind")
        try:
            if kind_tok.text == "interval":
                self.expect("(")
                unit = self.ident("unit")
                self.expect(")")
                kind = IntervalKind(unit.text)
            elif kind_tok.text in ("enum", "set"):
                self.expect("{")
                members = self.idlist()
                self.expect("}")
                for t in members:
                    if t.text == BOTTOM_WORD:
                        raise _Syntax(t, f"{BOTTOM_WORD!r} is reserved and cannot be an alphabet member")
                alphabet = [t.text for t in members]
                kind = EnumKind(alphabet) if kind_tok.text == "enum" else SetKind(alphabet)
            else:
                raise _Syntax(kind_tok, "expected 'interval', 'enum' or 'set'")
        except LatticeError as exc:
            raise _Syntax(kind_tok, str(exc)) from None
        if self.tok.text != "role":
            raise _Syntax(self.tok, "expected 'role'")
        self.advance()
        role_tok = self.ident("role")
        if role_tok.text not in ("condition", "action"):
            raise _Syntax(role_tok, "expected 'condition' or 'action'")
        self.expect(";")
        return _SortStmt(head, name.text, kind, Role(role_tok.text))

    def atomdecl(self) -> _AtomStmt:
        head = self.advance()
        pred = self.ident("predicate")
        self.expect("{")
        params = []
        if self.tok.text != "}":
            params.append(self.param())
            while self.tok.text == ",":
                self.advance()
                params.append(self.param())
        self.expect("}")
        self.expect("@")
        sources = self.idlist()
        self.expect(";")
        return _AtomStmt(head, pred.text, params, sources)

    def param(self):
        name = self.ident("sort name")
        self.expect(":")
        tok = self.tok
        if tok.text == "[":
            self.advance()
            lo = self.bound()
            self.expect(",")
            hi = self.bound()
            self.expect("]")
            return name, ("interval", tok, lo, hi)
        if tok.text == "{":
            self.advance()
            members = self.idlist()
            self.expect("}")
            return name, ("set", tok, members)
        if tok.kind == "ident":
            self.advance()
            return name, ("enum", tok, tok.text)
        raise _Syntax(tok, "expected a value")

    def bound(self):
        tok = self.tok
        if tok.kind != "number":
            raise _Syntax(tok, "expected a number, 'inf' or '-inf'")
        self.advance()
        if tok.text in ("inf", "+inf"):
            return INF
        if tok.text == "-inf":
            return NEG_INF
        return Fraction(tok.text)


def _resolve_value(sort: Sort, syntax, errors: list[ParseError]):
    tag, tok = syntax[0], syntax[1]
    if tag == "enum" and syntax[2] == BOTTOM_WORD:
        return BOTTOM
    expected = {IntervalKind: "an interval", EnumKind: "an enum", SetKind: "a set"}[type(sort.kind)]
    if not expected.endswith(tag):
        errors.append(ParseError(tok.line, tok.column, f"sort {sort.name!r} expects {expected} value", tok.text))
        return None
    try:
        if tag == "interval":
            value = Interval(syntax[2], syntax[3])
        elif tag == "enum":
            value = EnumVal(syntax[2])
        else:
            names = [t.text for t in syntax[2]]
            if len(set(names)) != len(names):
                raise LatticeError("duplicate set member")
            value = SetVal(frozenset(names))
        validate_value(sort, value)
    except LatticeError as exc:
        errors.append(ParseError(tok.line, tok.column, str(exc), tok.text))
        return None
    return value


def parse_kb(text: str) -> KnowledgeBase:
    """Parse ``.gkb`` text; raises :class:`DSLError` listing every problem."""
    tokens, errors = tokenize_dsl(text)
    stmts = _Parser(tokens).statements(errors)

    sorts: dict[str, Sort] = {}
    sources: list[str] = []
    for st in stmts:
        if isinstance(st, _SortStmt):
            if st.name in sorts:
                errors.append(ParseError(st.tok.line, st.tok.column, f"duplicate sort {st.name!r}", st.name))
            else:
                sorts[st.name] = Sort(st.name, st.kind, st.role)
        elif isinstance(st, _SourceStmt):
            if st.name in sources:
                errors.append(ParseError(st.tok.line, st.tok.column, f"duplicate source {st.name!r}", st.name))
            else:
                sources.append(st.name)

    atoms = []
    for st in (s for s in stmts if isinstance(s, _AtomStmt)):
        ok = True
        params = {}
        for name_tok, syntax in st.params:
            sort = sorts.get(name_tok.text)
            if sort is None:
                errors.append(ParseError(name_tok.line, name_tok.column, f"unknown sort {name_tok.text!r}", name_tok.text))
                ok = False
                continue
            if name_tok.text in params:
                errors.append(ParseError(name_tok.line, name_tok.column, f"duplicate parameter for sort {name_tok.text!r}", name_tok.text))
                ok = False
                continue
            value = _resolve_value(sort, syntax, errors)
            if value is None:
                ok = False
            params[name_tok.text] = value
        for src in st.source_toks:
            if src.text not in sources:
                errors.append(ParseError(src.line, src.column, f"unknown source {src.text!r}", src.text))
                ok = False
        if ok:
            atoms.append(Atom(st.predicate, params, [t.text for t in st.source_toks]))

    if errors:
        errors.sort(key=lambda e: (e.line, e.column))
        raise DSLError(errors)
    try:
        return KnowledgeBase(tuple(sorts.values()), tuple(atoms), tuple(sources))
    except (KBError, LatticeError) as exc:
        raise DSLError([ParseError(1, 1, str(exc))]) from None


# --- formatting ----------------------------------------------------------------


def format_number(x) -> str:
    if x == INF:
        return "inf"
    if x == NEG_INF:
        return "-inf"
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    d = x.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    places = max(twos, fives)
    scaled = abs(x.numerator) * 10**places // x.denominator
    digits = str(scaled).rjust(places + 1, "0")
    sign = "-" if x < 0 else ""
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def format_value(sort: Sort, value) -> str:
    if value is BOTTOM:
        return BOTTOM_WORD
    if isinstance(value, Interval):
        return f"[{format_number(value.lo)},{format_number(value.hi)}]"
    if isinstance(value, EnumVal):
        return value.symbol
    order = {sym: i for i, sym in enumerate(sort.kind.alphabet)}
    members = sorted(value.members, key=lambda m: (order.get(m, len(order)), m))
    return "{" + ",".join(members) + "}"


def format_atom(kb: KnowledgeBase, atom: Atom) -> str:
    try:
        kb.validate_atom(atom)
    except LatticeError as exc:
        raise MalformedAtomError(str(exc)) from None
    params = ", ".join(f"{name}: {format_value(kb.sort(name), v)}" for name, v in sorted(atom.params.items()))
    body = "{ " + params + " }" if params else "{}"
    return f"recommend {atom.predicate} {body} @ {','.join(sorted(atom.provenance))};"


def format_sort(sort: Sort) -> str:
    kind = sort.kind
    if isinstance(kind, IntervalKind):
        text = f"interval({kind.unit})"
    else:
        word = "enum" if isinstance(kind, EnumKind) else "set"
        text = word + " {" + ", ".join(kind.alphabet) + "}"
    return f"sort {sort.name}: {text} role {sort.role.value};"


def format_kb(kb: KnowledgeBase) -> str:
    lines = [format_sort(s) for s in kb.sorts]
    lines += [f"source {s};" for s in kb.sources]
    lines += [format_atom(kb, a) for a in kb.atoms]
    return "\n".join(lines) + "\n"


def parse_value(sort: Sort, text: str):
    """Parse a single value in ``.gkb`` syntax (e.g. ``[12,12]``) for ``sort``."""
    tokens, errors = tokenize_dsl(text)
    if errors:
        raise DSLError(errors)
    parser = _Parser(tokens)
    try:
        name = Token("ident", sort.name, 1, 1)
        parser.tokens = [name, Token("punct", ":", 1, 1)] + tokens
        _, syntax = parser.param()
        if parser.tok.kind != "eof":
            raise _Syntax(parser.tok, "trailing input after value")
    except _Syntax as exc:
        raise DSLError([exc.error]) from None
    value = _resolve_value(sort, syntax, errors)
    if errors:
        raise DSLError(errors)
    return value
