"""Parser for the engine's infix expression grammar.

Accepts what :func:`rpnevo.genome.to_infix` emits, plus ordinary
human-written arithmetic: ``+ - * /`` with usual precedence, parentheses,
``expr^2`` for squaring, unary minus, decimal literals, variables ``x0,
x1, ...`` and the unary functions by name (``sqrt(x0 + 1)``, ``inv(x1)``,
``sq(x0)``). Produces a viable RPN genome; evaluation order of the genome
matches the textual structure exactly.
"""

from __future__ import annotations

import re

from .genome import Genome, Token, const, op, var
from .ops import OP_ARITY, OP_IDS

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<sym>[-+*/^()]))"
)

_FUNC_NAMES = {name for name, i in OP_IDS.items() if OP_ARITY[i] == 1}


class ParseError(ValueError):
    pass


def _lex(text: str) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ParseError(f"cannot tokenize expression at: {rest[:20]!r}")
        pos = m.end()
        if m.group("num") is not None:
            out.append(("num", m.group("num")))
        elif m.group("name") is not None:
            out.append(("name", m.group("name")))
        else:
            out.append(("sym", m.group("sym")))
    return out


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]], arity: int) -> None:
        self.tokens = tokens
        self.pos = 0
        self.arity = arity
        self.out: list[Token] = []

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of expression")
        self.pos += 1
        return tok

    def expect(self, sym: str) -> None:
        tok = self.take()
        if tok != ("sym", sym):
            raise ParseError(f"expected {sym!r}, found {tok[1]!r}")

    def parse(self) -> list[Token]:
        self.expr()
        if self.peek() is not None:
            raise ParseError(f"trailing input: {self.peek()[1]!r}")
        return self.out

    def expr(self) -> None:
        self.term()
        while self.peek() in (("sym", "+"), ("sym", "-")):
            sym = self.take()[1]
            self.term()
            self.out.append(op("add" if sym == "+" else "sub"))

    def term(self) -> None:
        self.unary()
        while self.peek() in (("sym", "*"), ("sym", "/")):
            sym = self.take()[1]
            self.unary()
            self.out.append(op("mul" if sym == "*" else "div"))

    def unary(self) -> None:
        if self.peek() == ("sym", "-"):
            self.take()
            nxt = self.peek()
            after = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
            if nxt is not None and nxt[0] == "num" and after != ("sym", "^"):
                # negative literal, not 0 - x  (but -3^2 stays -(3^2))
                self.take()
                self.out.append(const(-float(nxt[1])))
                return
            self.out.append(const(0.0))
            self.unary()
            self.out.append(op("sub"))
            return
        self.power()

    def power(self) -> None:
        self.atom()
        self.power_suffix()

    def power_suffix(self) -> None:
        while self.peek() == ("sym", "^"):
            self.take()
            kind, text = self.take()
            if kind != "num" or float(text) != 2.0:
                raise ParseError("only ^2 is supported (the squaring operator)")
            self.out.append(op("sq"))

    def atom(self) -> None:
        kind, text = self.take()
        if kind == "num":
            self.out.append(const(float(text)))
            return
        if kind == "name":
            if re.fullmatch(r"x\d+", text):
                idx = int(text[1:])
                if idx >= self.arity:
                    raise ParseError(f"variable {text} out of range for arity {self.arity}")
                self.out.append(var(idx))
                return
            if text in _FUNC_NAMES:
                self.expect("(")
                self.expr()
                self.expect(")")
                self.out.append(op(text))
                return
            raise ParseError(f"unknown name: {text!r}")
        if (kind, text) == ("sym", "("):
            self.expr()
            self.expect(")")
            return
        raise ParseError(f"unexpected token: {text!r}")


def parse_infix(text: str, arity: int) -> Genome:
    """Parse an infix expression into a viable genome."""
    tokens = _lex(text)
    if not tokens:
        raise ParseError("empty expression")
    rpn = _Parser(tokens, arity).parse()
    return Genome.from_tokens(rpn, arity)
