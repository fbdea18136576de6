"""Concrete syntax: lexer and recursive-descent parser.

Grammar (loosest binding first):

    expr    := union ('+[' weight ']' expr)?          -- right-associative
    union   := seqexp ('&' seqexp)*                   -- left-associative
    seqexp  := unary (';' unary)*                     -- left-associative
    unary   := '!' unary | postfix
    postfix := atom '*'*
    atom    := 'drop' | 'skip' | IDENT '=' NAT | IDENT ':=' NAT
             | 'if' expr 'then' expr 'else' expr
             | 'while' expr 'do' expr
             | 'do' expr 'while' expr
             | 'var' IDENT ':=' NAT 'in' expr
             | 'choice' '{' weight ':' expr (',' weight ':' expr)* '}'
             | '(' expr ')'

Weights are ``a/b`` rationals, integers, or decimal literals (converted
exactly, e.g. ``0.8`` becomes ``4/5``).  ``//`` comments run to end of line.
A program file may start with a header ``fields { name : size ; ... }``
declaring the universe.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ParseError, WellFormednessError
from .syntax import (
    Assign, Choice, DoWhile, Drop, If, NaryChoice, Neg, Program, Seq, Skip,
    Star, Test, Union, Var, While, validate,
)
from .universe import FieldDecl, PacketUniverse

KEYWORDS = {
    "drop", "skip", "if", "then", "else", "while", "do", "var", "in",
    "choice", "fields",
}

_SYMBOLS = [":=", "+[", "=", ";", "&", "!", "*", "(", ")", "{", "}", ":", ",", "]", "/"]


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind  # 'ident' | 'nat' | 'number' | symbol text | 'eof'
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind!r}, {self.text!r})"


def _lex(src: str) -> list[_Token]:
    toks = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            kind = "nat"
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
                kind = "number"
            toks.append(_Token(kind, src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Token("ident", src[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if src.startswith(sym, i):
                toks.append(_Token(sym, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def next(self) -> _Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind) -> _Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text or t.kind!r}", t.line, t.col)
        return self.next()

    def at_keyword(self, word) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text == word

    def expect_keyword(self, word) -> _Token:
        t = self.peek()
        if not self.at_keyword(word):
            raise ParseError(f"expected {word!r}, found {t.text or t.kind!r}", t.line, t.col)
        return self.next()

    # -- weights ---------------------------------------------------------

    def weight(self) -> Fraction:
        t = self.peek()
        if t.kind == "number":
            self.next()
            w = Fraction(t.text)  # exact decimal conversion
        elif t.kind == "nat":
            self.next()
            num = int(t.text)
            if self.peek().kind == "/":
                self.next()
                den = int(self.expect("nat").text)
                if den == 0:
                    raise ParseError("weight denominator is zero", t.line, t.col)
                w = Fraction(num, den)
            else:
                w = Fraction(num)
        else:
            raise ParseError(f"expected a weight, found {t.text or t.kind!r}", t.line, t.col)
        if not (0 <= w <= 1):
            raise ParseError(f"weight {w} outside [0, 1]", t.line, t.col)
        return w

    def nat(self) -> int:
        return int(self.expect("nat").text)

    # -- expression grammar ------------------------------------------------

    def expr(self) -> Program:
        left = self.union()
        if self.peek().kind == "+[":
            self.next()
            w = self.weight()
            self.expect("]")
            right = self.expr()
            return Choice(w, left, right)
        return left

    def union(self) -> Program:
        out = self.seqexp()
        while self.peek().kind == "&":
            self.next()
            out = Union(out, self.seqexp())
        return out

    def seqexp(self) -> Program:
        out = self.unary()
        while self.peek().kind == ";":
            self.next()
            out = Seq(out, self.unary())
        return out

    def unary(self) -> Program:
        if self.peek().kind == "!":
            self.next()
            return Neg(self.unary())
        return self.postfix()

    def postfix(self) -> Program:
        out = self.atom()
        while self.peek().kind == "*":
            self.next()
            out = Star(out)
        return out

    def atom(self) -> Program:
        t = self.peek()
        if t.kind == "(":
            self.next()
            out = self.expr()
            self.expect(")")
            return out
        if t.kind != "ident":
            raise ParseError(f"expected a program, found {t.text or t.kind!r}", t.line, t.col)
        word = t.text
        if word == "drop":
            self.next()
            return Drop()
        if word == "skip":
            self.next()
            return Skip()
        if word == "if":
            self.next()
            guard = self.expr()
            self.expect_keyword("then")
            then = self.expr()
            self.expect_keyword("else")
            other = self.expr()
            return If(guard, then, other)
        if word == "while":
            self.next()
            guard = self.expr()
            self.expect_keyword("do")
            return While(guard, self.expr())
        if word == "do":
            self.next()
            body = self.expr()
            self.expect_keyword("while")
            return DoWhile(body, self.expr())
        if word == "var":
            self.next()
            name = self.field_name()
            self.expect(":=")
            value = self.nat()
            self.expect_keyword("in")
            return Var(name, value, self.expr())
        if word == "choice":
            self.next()
            self.expect("{")
            branches = []
            while True:
                w = self.weight()
                self.expect(":")
                branches.append((self.expr(), w))
                if self.peek().kind != ",":
                    break
                self.next()
            self.expect("}")
            return NaryChoice(tuple((q, w) for q, w in branches))
        if word in KEYWORDS:
            raise ParseError(f"unexpected keyword {word!r}", t.line, t.col)
        # Field test or assignment.
        self.next()
        nxt = self.peek()
        if nxt.kind == "=":
            self.next()
            return Test(word, self.nat())
        if nxt.kind == ":=":
            self.next()
            return Assign(word, self.nat())
        raise ParseError(f"expected '=' or ':=' after field {word!r}", nxt.line, nxt.col)

    def field_name(self) -> str:
        t = self.expect("ident")
        if t.text in KEYWORDS:
            raise ParseError(f"{t.text!r} is a reserved word", t.line, t.col)
        return t.text

    # -- fields header -------------------------------------------------------

    def fields_header(self) -> PacketUniverse | None:
        if not self.at_keyword("fields"):
            return None
        self.next()
        self.expect("{")
        decls = []
        while not self.peek().kind == "}":
            name = self.field_name()
            self.expect(":")
            size = self.nat()
            decls.append(FieldDecl(name, size))
            if self.peek().kind == ";":
                self.next()
        self.expect("}")
        return PacketUniverse(decls)


def parse(text: str, universe: PacketUniverse) -> Program:
    """Parse a program expression and validate it against ``universe``."""
    p = _Parser(_lex(text))
    prog = p.expr()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    validate(prog, universe)
    return prog


def parse_file_text(text: str, universe: PacketUniverse | None = None):
    """Parse an optional ``fields`` header followed by one program expression.

    Returns ``(universe, program)``.  A universe passed in must agree with
    the header if both are present.
    """
    p = _Parser(_lex(text))
    header = p.fields_header()
    if header is not None and universe is not None and header != universe:
        raise WellFormednessError("program header disagrees with the supplied universe")
    uni = header or universe
    if uni is None:
        raise WellFormednessError("no universe: pass one or add a fields header")
    prog = p.expr()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    validate(prog, uni)
    return uni, prog
