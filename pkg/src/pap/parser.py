"""Lexer and recursive-descent parser for the surface syntax.

Grammar (LL(1) given one token of lookahead and the primitive registry):

    ty  := "real" | "bool" | "unit" | tyatom "*" ty | tyatom "->" ty | "(" ty ")"
    t   := "fun" "(" ident ":" ty ")" "->" t
         | "mu" ident "(" ident ":" ty ")" ":" ty "->" t
         | "if" t "then" t "else" t
         | "let" ident "=" t "in" t
         | "match" t "with" "(" ident "," ident ")" "->" t
         | app
    app := atom { atom }
    atom:= float | "true" | "false" | "()" | "sample" | "score" "(" t ")"
         | ident | ident "(" t { "," t } ")"      -- registered primitive
         | "(" t ")" | "(" t "," t ")"

An identifier is a variable when lexically bound (binders may shadow
primitive names), a primitive call when it names a registered primitive,
and an error otherwise. `parse` returns the desugared term.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import primitives
from .syntax import (
    BOOL,
    REAL,
    UNIT_T,
    App,
    ArrowT,
    ConstBool,
    ConstReal,
    ConstUnit,
    If,
    Lam,
    Let,
    MatchPair,
    Mu,
    Pair,
    Prim,
    ProdT,
    Sample,
    Score,
    Term,
    Type,
    Var,
    desugar,
)

KEYWORDS = frozenset(
    "fun mu if then else let in match with sample score true false real bool unit".split()
)


class PapSyntaxError(Exception):
    """Malformed input, with 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class UnknownPrimitiveError(PapSyntaxError):
    """An identifier is neither bound nor a registered primitive."""

    def __init__(self, name: str, line: int, col: int):
        super().__init__(f"unknown primitive or unbound variable '{name}'", line, col)
        self.name = name


@dataclass(frozen=True)
class Token:
    kind: str  # NUM IDENT LPAREN RPAREN COMMA COLON ARROW STAR EOF
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":  # comment to end of line
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if c == "-" and i + 1 < n and source[i + 1] == ">":
            toks.append(Token("ARROW", "->", line, start_col))
            i += 2
            col += 2
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and (source[i + 1].isdigit() or source[i + 1] == ".")):
            j = i + 1 if c == "-" else i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == ".":
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise PapSyntaxError(f"bad numeric literal '{text}'", line, start_col)
            toks.append(Token("NUM", text, line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] in "_'"):
                j += 1
            toks.append(Token("IDENT", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        punct = {
            "(": "LPAREN",
            ")": "RPAREN",
            ",": "COMMA",
            ":": "COLON",
            "*": "STAR",
            "=": "EQUALS",
        }
        if c in punct:
            toks.append(Token(punct[c], c, line, start_col))
            i += 1
            col += 1
            continue
        raise PapSyntaxError(f"unexpected character {c!r}", line, start_col)
    toks.append(Token("EOF", "", line, col))
    return toks


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0
        self.scope: list[str] = []

    # -- token plumbing ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise PapSyntaxError(
                f"expected {what}, found {tok.text!r}" if tok.text else f"expected {what}, found end of input",
                tok.line,
                tok.col,
            )
        return self.next()

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.text != word:
            raise PapSyntaxError(
                f"expected '{word}', found {tok.text!r}" if tok.text else f"expected '{word}', found end of input",
                tok.line,
                tok.col,
            )
        return self.next()

    def expect_name(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.text in KEYWORDS:
            raise PapSyntaxError(f"expected {what}, found {tok.text!r}", tok.line, tok.col)
        return self.next()

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.text == word

    # -- types -------------------------------------------------------------

    def parse_type(self) -> Type:
        left = self.parse_type_prod()
        if self.peek().kind == "ARROW":
            self.next()
            return ArrowT(left, self.parse_type())
        return left

    def parse_type_prod(self) -> Type:
        left = self.parse_type_atom()
        if self.peek().kind == "STAR":
            self.next()
            return ProdT(left, self.parse_type_prod())
        return left

    def parse_type_atom(self) -> Type:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text in ("real", "bool", "unit"):
            self.next()
            return {"real": REAL, "bool": BOOL, "unit": UNIT_T}[tok.text]
        if tok.kind == "LPAREN":
            self.next()
            ty = self.parse_type()
            self.expect("RPAREN", "')'")
            return ty
        raise PapSyntaxError(f"expected a type, found {tok.text!r}", tok.line, tok.col)

    # -- terms -------------------------------------------------------------

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == "IDENT":
            if tok.text == "fun":
                return self.parse_fun()
            if tok.text == "mu":
                return self.parse_mu()
            if tok.text == "if":
                return self.parse_if()
            if tok.text == "let":
                return self.parse_let()
            if tok.text == "match":
                return self.parse_match()
        return self.parse_app()

    def parse_fun(self) -> Term:
        start = self.expect_keyword("fun")
        self.expect("LPAREN", "'('")
        name = self.expect_name("a parameter name")
        self.expect("COLON", "':'")
        ty = self.parse_type()
        self.expect("RPAREN", "')'")
        self.expect("ARROW", "'->'")
        self.scope.append(name.text)
        body = self.parse_term()
        self.scope.pop()
        return Lam(name.text, ty, body, span=(start.line, start.col))

    def parse_mu(self) -> Term:
        start = self.expect_keyword("mu")
        fname = self.expect_name("a function name")
        self.expect("LPAREN", "'('")
        param = self.expect_name("a parameter name")
        self.expect("COLON", "':'")
        ty1 = self.parse_type()
        self.expect("RPAREN", "')'")
        self.expect("COLON", "':'")
        # the result type stops before '->' so the body-introducing arrow is
        # unambiguous; arrow-typed results need parentheses
        ty2 = self.parse_type_prod()
        self.expect("ARROW", "'->'")
        self.scope.extend((fname.text, param.text))
        body = self.parse_term()
        self.scope.pop()
        self.scope.pop()
        return Mu(fname.text, param.text, ty1, ty2, body, span=(start.line, start.col))

    def parse_if(self) -> Term:
        start = self.expect_keyword("if")
        cond = self.parse_term()
        self.expect_keyword("then")
        then = self.parse_term()
        self.expect_keyword("else")
        orelse = self.parse_term()
        return If(cond, then, orelse, span=(start.line, start.col))

    def parse_let(self) -> Term:
        start = self.expect_keyword("let")
        name = self.expect_name("a binder name")
        self.expect("EQUALS", "'='")
        bound = self.parse_term()
        self.expect_keyword("in")
        self.scope.append(name.text)
        body = self.parse_term()
        self.scope.pop()
        return Let(name.text, bound, body, span=(start.line, start.col))

    def parse_match(self) -> Term:
        start = self.expect_keyword("match")
        scrut = self.parse_term()
        self.expect_keyword("with")
        self.expect("LPAREN", "'('")
        left = self.expect_name("a binder name")
        self.expect("COMMA", "','")
        right = self.expect_name("a binder name")
        self.expect("RPAREN", "')'")
        self.expect("ARROW", "'->'")
        self.scope.extend((left.text, right.text))
        body = self.parse_term()
        self.scope.pop()
        self.scope.pop()
        return MatchPair(scrut, left.text, right.text, body, span=(start.line, start.col))

    def parse_app(self) -> Term:
        t = self.parse_atom()
        while self.starts_atom():
            arg = self.parse_atom()
            t = App(t, arg, span=t.span)
        return t

    def starts_atom(self) -> bool:
        tok = self.peek()
        if tok.kind in ("NUM", "LPAREN"):
            return True
        if tok.kind == "IDENT":
            return tok.text not in KEYWORDS or tok.text in ("true", "false", "sample", "score")
        return False

    def parse_atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "NUM":
            self.next()
            return ConstReal(float(tok.text), span=(tok.line, tok.col))
        if tok.kind == "LPAREN":
            self.next()
            if self.peek().kind == "RPAREN":
                self.next()
                return ConstUnit(span=(tok.line, tok.col))
            t = self.parse_term()
            if self.peek().kind == "COMMA":
                self.next()
                snd = self.parse_term()
                self.expect("RPAREN", "')'")
                return Pair(t, snd, span=(tok.line, tok.col))
            self.expect("RPAREN", "')'")
            return t
        if tok.kind == "IDENT":
            if tok.text == "true":
                self.next()
                return ConstBool(True, span=(tok.line, tok.col))
            if tok.text == "false":
                self.next()
                return ConstBool(False, span=(tok.line, tok.col))
            if tok.text == "sample":
                self.next()
                return Sample(span=(tok.line, tok.col))
            if tok.text == "score":
                self.next()
                self.expect("LPAREN", "'('")
                arg = self.parse_term()
                self.expect("RPAREN", "')'")
                return Score(arg, span=(tok.line, tok.col))
            if tok.text in KEYWORDS:
                raise PapSyntaxError(f"unexpected keyword '{tok.text}'", tok.line, tok.col)
            self.next()
            name = tok.text
            if name in self.scope:
                return Var(name, span=(tok.line, tok.col))
            if primitives.has_prim(name):
                return self.parse_prim_call(name, tok)
            raise UnknownPrimitiveError(name, tok.line, tok.col)
        raise PapSyntaxError(
            f"expected a term, found {tok.text!r}" if tok.text else "unexpected end of input",
            tok.line,
            tok.col,
        )

    def parse_prim_call(self, name: str, tok: Token) -> Term:
        spec = primitives.lookup(name)
        self.expect("LPAREN", f"'(' after primitive '{name}'")
        args = [self.parse_term()]
        while self.peek().kind == "COMMA":
            self.next()
            args.append(self.parse_term())
        self.expect("RPAREN", "')'")
        if len(args) != spec.arity:
            raise PapSyntaxError(
                f"primitive '{name}' expects {spec.arity} argument(s), got {len(args)}",
                tok.line,
                tok.col,
            )
        return Prim(name, tuple(args), span=(tok.line, tok.col))


def parse(source: str) -> Term:
    """Parse a single term and return it desugared (no `Let` nodes)."""
    return desugar(parse_surface(source))


def parse_surface(source: str) -> Term:
    """Parse a single term, keeping `let` nodes."""
    parser = _Parser(tokenize(source))
    t = parser.parse_term()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise PapSyntaxError(f"trailing input starting at {tok.text!r}", tok.line, tok.col)
    return t
