"""Parseur de la grammaire des symboles."""

import re
from dataclasses import dataclass
from typing import List, Optional

import structlog

from app.core.exceptions import SymbolSyntaxError, UnknownIdentifierError
from app.models.symbol_expr import (
    Const,
    LevelPower,
    SymbolExpr,
    Z,
    ZBAR,
    Bump,
    add,
    conjugate,
    exp_,
    mul,
    neg,
    power,
    recip,
    to_text,
)

logger = structlog.get_logger()

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

FUNCTIONS = {"conj", "exp", "bump", "bumpd"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = _TOKEN.match(text, position)
        if match is None or match.end() == position:
            offset = position + len(text[position:]) - len(text[position:].lstrip())
            raise SymbolSyntaxError(f"caractère inattendu '{text[offset]}'", offset, text)
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(kind), match.start(kind)))
        position = match.end()
    return tokens


class SymbolParser:
    """Descente récursive: expr, terme, unaire, puissance, atome."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0

    # Navigation
    def peek(self) -> Optional[Token]:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def position(self) -> int:
        token = self.peek()
        return token.position if token else len(self.text)

    def accept(self, text: str) -> bool:
        token = self.peek()
        if token is not None and token.kind in ("op", "name") and token.text == text:
            self.index += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            raise SymbolSyntaxError(f"'{text}' attendu", self.position(), self.text)

    # Grammaire
    def parse(self) -> SymbolExpr:
        expr = self.expression()
        if self.peek() is not None:
            raise SymbolSyntaxError("fin d'expression attendue", self.position(), self.text)
        return expr

    def expression(self) -> SymbolExpr:
        expr = self.term()
        while True:
            if self.accept("+"):
                expr = add(expr, self.term())
            elif self.accept("-"):
                expr = add(expr, neg(self.term()))
            else:
                return expr

    def term(self) -> SymbolExpr:
        expr = self.unary()
        while True:
            if self.accept("*"):
                expr = mul(expr, self.unary())
            elif self.accept("/"):
                position = self.position()
                denominator = self.unary()
                try:
                    expr = mul(expr, recip(denominator))
                except ZeroDivisionError:
                    raise SymbolSyntaxError("division par zéro", position, self.text)
            else:
                return expr

    def unary(self) -> SymbolExpr:
        if self.accept("-"):
            return neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.postfix()

    def postfix(self) -> SymbolExpr:
        base = self.atom()
        if not self.accept("^"):
            return base
        position = self.position()
        if isinstance(base, LevelPower):
            return LevelPower(base.rho * self.signed_number())
        exponent = self.signed_number()
        if exponent < 0 or exponent != int(exponent):
            raise SymbolSyntaxError("exposant entier positif attendu", position, self.text)
        return power(base, int(exponent))

    def signed_number(self) -> float:
        if self.accept("("):
            value = self.signed_number()
            self.expect(")")
            return value
        sign = -1.0 if self.accept("-") else 1.0
        token = self.peek()
        if token is None or token.kind != "number":
            raise SymbolSyntaxError("nombre attendu", self.position(), self.text)
        self.index += 1
        return sign * float(token.text)

    def atom(self) -> SymbolExpr:
        token = self.peek()
        if token is None:
            raise SymbolSyntaxError("expression attendue", len(self.text), self.text)
        if token.kind == "number":
            self.index += 1
            return Const(float(token.text))
        if token.kind == "op":
            if token.text == "(":
                self.index += 1
                expr = self.expression()
                self.expect(")")
                return expr
            raise SymbolSyntaxError("expression attendue", token.position, self.text)

        self.index += 1
        name = token.text
        if name == "z":
            return Z
        if name == "i":
            return Const(1j)
        if name == "N":
            return LevelPower(1.0)
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(name, token.position)

        self.expect("(")
        arguments = [self.expression()]
        while self.accept(","):
            arguments.append(self.expression())
        self.expect(")")
        return self.call(name, arguments, token.position)

    def call(self, name: str, arguments: List[SymbolExpr], position: int) -> SymbolExpr:
        if name in ("conj", "exp"):
            if len(arguments) != 1:
                raise SymbolSyntaxError(f"{name} attend un argument", position, self.text)
            return conjugate(arguments[0]) if name == "conj" else exp_(arguments[0])

        if name == "bumpd":
            if len(arguments) != 3:
                raise SymbolSyntaxError("bumpd(k, c, r) attendu", position, self.text)
            order, center, radius = arguments
            return self.make_bump(center, radius, order, Z, ZBAR, position)
        if len(arguments) == 2:
            return self.make_bump(arguments[0], arguments[1], Const(0), Z, ZBAR, position)
        if len(arguments) == 5:
            return self.make_bump(*arguments, position=position)
        raise SymbolSyntaxError("bump(c, r) attendu", position, self.text)

    def make_bump(
        self,
        center: SymbolExpr,
        radius: SymbolExpr,
        order: SymbolExpr,
        arg: SymbolExpr,
        argc: SymbolExpr,
        position: int,
    ) -> SymbolExpr:
        if not isinstance(center, Const):
            raise SymbolSyntaxError("centre de bosse constant attendu", position, self.text)
        if not isinstance(radius, Const) or radius.value.imag != 0 or radius.value.real <= 0:
            raise SymbolSyntaxError("rayon de bosse réel positif attendu", position, self.text)
        k = order.value.real if isinstance(order, Const) else -1
        if k < 0 or k != int(k):
            raise SymbolSyntaxError("ordre de bosse entier attendu", position, self.text)
        return Bump(center.value, radius.value.real, int(k), arg, argc)


def parse_symbol(text: str) -> SymbolExpr:
    """
    Parse une expression de symbole.

    Args:
        text: Expression, par exemple "z*conj(z)" ou "bump(0, 2) + 2"

    Returns:
        Arbre du symbole
    """
    expr = SymbolParser(text).parse()
    logger.debug("Symbole analysé", text=text, tree=to_text(expr))
    return expr


def format_symbol(expr: SymbolExpr) -> str:
    return to_text(expr)
