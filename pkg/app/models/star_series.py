"""Séries formelles Σ N^{-j} h_j du produit étoile."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.exceptions import ValidationError
from app.models.symbol_expr import SymbolExpr, add, evaluate, level, mul


@dataclass(frozen=True)
class StarSeries:
    """
    Coefficients h_0..h_J et leur comptabilité de classe.

    `class_exponents[j]` vaut -j(1-2δ): N^{-j}h_j est dans N^{class_exponents[j]} S_δ(m₁m₂).
    `derivative_orders[j]` est l'ordre maximal de dérivation d'une entrée dans h_j.
    """

    terms: Tuple[SymbolExpr, ...]
    delta: float = 0.0
    class_exponents: Tuple[float, ...] = ()
    derivative_orders: Tuple[int, ...] = ()
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.class_exponents:
            exponents = tuple(-j * (1 - 2 * self.delta) for j in range(len(self.terms)))
            object.__setattr__(self, "class_exponents", exponents)

    @property
    def order(self) -> int:
        return len(self.terms) - 1

    def __len__(self) -> int:
        return len(self.terms)

    def truncated(self, J: int) -> "StarSeries":
        if not 0 <= J <= self.order:
            raise ValidationError("ordre de troncature hors de la série", {"J": J, "order": self.order})
        return StarSeries(
            terms=self.terms[: J + 1],
            delta=self.delta,
            class_exponents=self.class_exponents[: J + 1],
            derivative_orders=self.derivative_orders[: J + 1],
            label=self.label,
        )

    def tree(self, J: Optional[int] = None) -> SymbolExpr:
        """Arbre Σ_{j≤J} N^{-j} h_j (N symbolique)."""
        J = self.order if J is None else J
        return add(*(mul(level(-j), term) for j, term in enumerate(self.terms[: J + 1])))

    def values(self, z: np.ndarray, N: float, J: Optional[int] = None) -> np.ndarray:
        return evaluate(self.tree(J), z, N=N)
