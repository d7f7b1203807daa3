"""Tokenizer and recursive-descent parser for the SQL subset plus control
commands (CALL verb(args), SET var = value, SHOW name).

The subset: SELECT with projection or COUNT(*), comma-separated FROM,
WHERE with AND-ed comparison filters and equi-joins, INSERT ... VALUES,
and EXPLAIN / EXPLAIN ANALYZE prefixes. The full grammar is documented in
docs/grammar.ebnf.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError, UnsupportedFeatureError
from .sqlast import (
    CALL_ARITY,
    COMPARE_OPS,
    ColumnRef,
    Comparison,
    ControlCommand,
    ControlVerb,
    Literal,
    QueryAst,
    QueryClass,
)

_KEYWORDS = {
    "SELECT",
    "FROM",
    "WHERE",
    "AND",
    "OR",
    "NOT",
    "INSERT",
    "INTO",
    "VALUES",
    "EXPLAIN",
    "ANALYZE",
    "COUNT",
    "CALL",
    "SET",
    "SHOW",
    "NULL",
    "GROUP",
    "ORDER",
    "BY",
    "LIMIT",
}

_PUNCT = ("<=", ">=", "<>", "=", "<", ">", ",", "(", ")", "{", "}", ".", ";", "*", "-")


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD | IDENT | NUMBER | STRING | PUNCT | EOF
    value: object
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def error(msg: str):
        raise ParseError(msg, line, col)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "-" and i + 1 < n and text[i + 1] == "-":  # line comment
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    error("unterminated string literal")
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                if text[j] == "\n":
                    error("unterminated string literal")
                buf.append(text[j])
                j += 1
            tokens.append(Token("STRING", "".join(buf), start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_float = False
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            raw = text[i:j]
            value = float(raw) if is_float else int(raw)
            tokens.append(Token("NUMBER", value, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            upper = word.upper()
            if upper in _KEYWORDS:
                tokens.append(Token("KEYWORD", upper, start_line, start_col))
            else:
                # identifiers are case-insensitive, folded to lower case
                tokens.append(Token("IDENT", word.lower(), start_line, start_col))
            col += j - i
            i = j
            continue
        matched = None
        for p in _PUNCT:
            if text.startswith(p, i):
                matched = p
                break
        if matched is None:
            error(f"unexpected character {ch!r}")
        tokens.append(Token("PUNCT", matched, start_line, start_col))
        i += len(matched)
        col += len(matched)
    tokens.append(Token("EOF", None, line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # --- token helpers ---

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def error(self, msg: str):
        raise ParseError(msg, self.cur.line, self.cur.column)

    def advance(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        return self.cur.kind == "KEYWORD" and self.cur.value in words

    def at_punct(self, *values: str) -> bool:
        return self.cur.kind == "PUNCT" and self.cur.value in values

    def expect_keyword(self, word: str) -> Token:
        if not self.at_keyword(word):
            self.error(f"expected {word}")
        return self.advance()

    def expect_punct(self, value: str) -> Token:
        if not self.at_punct(value):
            self.error(f"expected {value!r}")
        return self.advance()

    def expect_ident(self) -> str:
        if self.cur.kind != "IDENT":
            self.error("expected identifier")
        return self.advance().value

    # --- entry ---

    def parse_statement(self):
        if self.at_keyword("CALL"):
            stmt = self.parse_call()
        elif self.at_keyword("SET"):
            stmt = self.parse_set()
        elif self.at_keyword("SHOW"):
            stmt = self.parse_show()
        elif self.at_keyword("EXPLAIN"):
            stmt = self.parse_explain()
        elif self.at_keyword("SELECT"):
            stmt = self.parse_select(QueryClass.SELECT)
        elif self.at_keyword("INSERT"):
            stmt = self.parse_insert()
        else:
            self.error("expected SELECT, INSERT, EXPLAIN, CALL, SET, or SHOW")
        if self.at_punct(";"):
            self.advance()
        if self.cur.kind != "EOF":
            self.error("unexpected trailing input")
        return stmt

    # --- queries ---

    def parse_explain(self) -> QueryAst:
        self.expect_keyword("EXPLAIN")
        klass = QueryClass.EXPLAIN
        if self.at_keyword("ANALYZE"):
            self.advance()
            klass = QueryClass.EXPLAIN_ANALYZE
        if not self.at_keyword("SELECT"):
            self.error("EXPLAIN expects a SELECT statement")
        return self.parse_select(klass)

    def parse_select(self, klass: QueryClass) -> QueryAst:
        self.expect_keyword("SELECT")
        count_star = False
        select: tuple[ColumnRef, ...] | None = None
        if self.at_punct("*"):
            self.advance()
        elif self.at_keyword("COUNT"):
            self.advance()
            self.expect_punct("(")
            self.expect_punct("*")
            self.expect_punct(")")
            count_star = True
        else:
            items = [self.parse_column_ref()]
            while self.at_punct(","):
                self.advance()
                items.append(self.parse_column_ref())
            select = tuple(items)
        self.expect_keyword("FROM")
        tables = [self.expect_ident()]
        while self.at_punct(","):
            self.advance()
            tables.append(self.expect_ident())
        where: list[Comparison] = []
        if self.at_keyword("WHERE"):
            self.advance()
            where.append(self.parse_comparison())
            while True:
                if self.at_keyword("AND"):
                    self.advance()
                    where.append(self.parse_comparison())
                elif self.at_keyword("OR"):
                    raise UnsupportedFeatureError("OR is not supported")
                else:
                    break
        if self.at_keyword("GROUP", "ORDER", "LIMIT"):
            raise UnsupportedFeatureError(f"{self.cur.value} BY/LIMIT is not supported")
        return QueryAst(
            query_class=klass,
            tables=tuple(tables),
            select=select,
            count_star=count_star,
            where=tuple(where),
        )

    def parse_insert(self) -> QueryAst:
        self.expect_keyword("INSERT")
        self.expect_keyword("INTO")
        table = self.expect_ident()
        self.expect_keyword("VALUES")
        rows = [self.parse_value_row()]
        while self.at_punct(","):
            self.advance()
            rows.append(self.parse_value_row())
        return QueryAst(
            query_class=QueryClass.INSERT,
            tables=(table,),
            insert_values=tuple(rows),
        )

    def parse_value_row(self) -> tuple:
        self.expect_punct("(")
        values = [self.parse_literal().value]
        while self.at_punct(","):
            self.advance()
            values.append(self.parse_literal().value)
        self.expect_punct(")")
        return tuple(values)

    def parse_column_ref(self) -> ColumnRef:
        first = self.expect_ident()
        if self.at_punct("."):
            self.advance()
            return ColumnRef(first, self.expect_ident())
        return ColumnRef(None, first)

    def parse_literal(self) -> Literal:
        if self.at_keyword("NULL"):
            self.advance()
            return Literal(None)
        if self.at_punct("-"):
            self.advance()
            if self.cur.kind != "NUMBER":
                self.error("expected number after '-'")
            return Literal(-self.advance().value)
        if self.cur.kind == "NUMBER":
            return Literal(self.advance().value)
        if self.cur.kind == "STRING":
            return Literal(self.advance().value)
        self.error("expected literal")

    def parse_operand(self):
        if self.cur.kind == "IDENT":
            return self.parse_column_ref()
        return self.parse_literal()

    def parse_comparison(self) -> Comparison:
        left = self.parse_operand()
        if not (self.cur.kind == "PUNCT" and self.cur.value in COMPARE_OPS):
            self.error("expected comparison operator")
        op = self.advance().value
        right = self.parse_operand()
        return Comparison(left, op, right)

    # --- control commands ---

    def parse_call(self) -> ControlCommand:
        self.expect_keyword("CALL")
        name = self.expect_ident().upper()
        try:
            verb = ControlVerb(name)
        except ValueError:
            raise UnsupportedFeatureError(f"unknown procedure {name}") from None
        if verb in (ControlVerb.SET, ControlVerb.SHOW):
            raise UnsupportedFeatureError(f"{name} is not callable")
        self.expect_punct("(")
        args: list = []
        if not self.at_punct(")"):
            args.append(self.parse_call_arg())
            while self.at_punct(","):
                self.advance()
                args.append(self.parse_call_arg())
        closing = self.expect_punct(")")
        expected = CALL_ARITY[verb]
        if len(args) != expected:
            raise ParseError(
                f"{name} takes {expected} arguments, got {len(args)}",
                closing.line,
                closing.column,
            )
        return ControlCommand(verb, tuple(args))

    def parse_call_arg(self):
        if self.at_punct("{"):
            self.advance()
            items: set[str] = set()
            if not self.at_punct("}"):
                items.add(self.parse_set_member())
                while self.at_punct(","):
                    self.advance()
                    items.add(self.parse_set_member())
            self.expect_punct("}")
            return frozenset(items)
        if self.cur.kind == "STRING" or self.cur.kind == "NUMBER":
            return self.advance().value
        if self.at_punct("-"):
            return self.parse_literal().value
        if self.cur.kind == "IDENT":
            return self.advance().value
        self.error("expected argument")

    def parse_set_member(self) -> str:
        if self.cur.kind == "STRING":
            return self.advance().value
        if self.cur.kind == "IDENT":
            return self.advance().value
        self.error("expected string or identifier inside set")

    def parse_set(self) -> ControlCommand:
        self.expect_keyword("SET")
        name = self.expect_ident()
        self.expect_punct("=")
        if self.cur.kind in ("STRING", "NUMBER"):
            value = self.advance().value
        elif self.at_punct("-"):
            value = self.parse_literal().value
        elif self.cur.kind == "IDENT":
            value = self.advance().value
        elif self.at_keyword("NULL"):
            self.advance()
            value = None
        else:
            self.error("expected value")
        return ControlCommand(ControlVerb.SET, (name, value))

    def parse_show(self) -> ControlCommand:
        self.expect_keyword("SHOW")
        if self.cur.kind == "IDENT":
            name = self.advance().value
        elif self.cur.kind == "KEYWORD":
            name = self.advance().value.lower()
        else:
            self.error("expected name after SHOW")
        return ControlCommand(ControlVerb.SHOW, (name,))


def parse(text: str) -> QueryAst | ControlCommand:
    """Parse one statement; raises ParseError with a 1-based position."""
    return _Parser(tokenize(text)).parse_statement()
