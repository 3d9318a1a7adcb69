"""Symboles semi-classiques et fonctions d'ordre."""

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from app.core.exceptions import ValidationError
from app.models.symbol_expr import (
    ONE,
    SymbolExpr,
    evaluate,
    level,
    mul,
    to_text,
)


@dataclass(frozen=True)
class Symbol:
    """Symbole N^power · expr avec métadonnées de classe S_δ."""

    expr: SymbolExpr
    delta: float = 0.0
    power: float = 0.0
    max_derivative_order: int = 8
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta < 0.5:
            raise ValidationError("delta doit être dans [0, 1/2)", {"delta": self.delta})

    @property
    def realized(self) -> SymbolExpr:
        """Arbre complet N^power · expr (N reste symbolique)."""
        return mul(level(self.power), self.expr)

    def values(self, z: np.ndarray, N: float, zbar: Optional[np.ndarray] = None) -> np.ndarray:
        return evaluate(self.realized, z, zbar, N=N)

    def with_expr(self, expr: SymbolExpr) -> "Symbol":
        return replace(self, expr=expr, label=None)

    def describe(self) -> str:
        if self.label:
            return self.label
        text = to_text(self.expr)
        return text if self.power == 0 else f"N^{self.power} * {text}"


@dataclass(frozen=True)
class OrderFunction:
    """Fonction d'ordre m (arbre positif pouvant contenir N) et sa constante certifiée."""

    expr: SymbolExpr
    delta: float = 0.0
    C: Optional[float] = None
    M0: Optional[int] = None

    def values(self, z: np.ndarray, N: float) -> np.ndarray:
        return evaluate(self.expr, z, N=N).real

    def certified(self, C: float, M0: int) -> "OrderFunction":
        return replace(self, C=C, M0=M0)


def unit_order_function(delta: float = 0.0) -> OrderFunction:
    return OrderFunction(expr=ONE, delta=delta)


SymbolLike = Union[Symbol, SymbolExpr]


def as_tree(symbol: SymbolLike) -> SymbolExpr:
    """Arbre réalisé d'un symbole (ou l'arbre lui-même)."""
    return symbol.realized if isinstance(symbol, Symbol) else symbol
