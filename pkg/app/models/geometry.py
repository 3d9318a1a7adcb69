"""Modèles de variétés kählériennes quantifiables (plan de Bargmann, droite projective)."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from app.models.symbol_expr import ONE, SymbolExpr, Z, ZBAR, add, mul, power


class ModelId(str, Enum):
    """Identifiant du modèle."""

    BARGMANN = "bargmann_plane"
    PROJECTIVE_LINE = "projective_line"


@dataclass(frozen=True)
class ModelGeometry:
    """Potentiel φ, prolongement polarisé ψ, densités H et μ = 2H dans la carte distinguée."""

    model_id: ModelId
    chart_bound: float = float("inf")

    @property
    def short_id(self) -> str:
        return "bargmann" if self.model_id is ModelId.BARGMANN else "cp1"

    @property
    def is_compact(self) -> bool:
        return self.model_id is ModelId.PROJECTIVE_LINE

    def potential(self, z):
        r2 = np.abs(z) ** 2
        if self.model_id is ModelId.BARGMANN:
            return r2
        return np.log1p(r2)

    def extension(self, x, y_conj):
        w = np.asarray(x) * np.asarray(y_conj)
        if self.model_id is ModelId.BARGMANN:
            return w
        return np.log(1 + w)

    def metric_density(self, z):
        r2 = np.abs(z) ** 2
        if self.model_id is ModelId.BARGMANN:
            return np.ones_like(r2, dtype=float)
        return 1.0 / (1.0 + r2) ** 2

    def volume_density(self, z):
        return 2.0 * self.metric_density(z)

    def distance(self, x, y):
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        if self.model_id is ModelId.BARGMANN:
            return np.abs(x - y)
        return np.arctan2(np.abs(x - y), np.abs(1 + np.conj(x) * y))

    def inverse_metric_expr(self) -> SymbolExpr:
        """H^{-1} sous forme d'arbre (contraction par la métrique inverse)."""
        if self.model_id is ModelId.BARGMANN:
            return ONE
        return power(add(ONE, mul(Z, ZBAR)), 2)

    def total_volume(self) -> float:
        return float("inf") if self.model_id is ModelId.BARGMANN else 2 * np.pi
