"""Modèles du domaine pour le laboratoire Toeplitz."""

from app.models.geometry import ModelGeometry, ModelId
from app.models.symbol_expr import SymbolExpr
from app.models.symbol import OrderFunction, Symbol
from app.models.quantum import QuadratureRule, QuantumBasis
from app.models.toeplitz import ToeplitzMatrix
from app.models.star_series import StarSeries
from app.models.extension import AlmostAnalyticExtension

__all__ = [
    "ModelGeometry",
    "ModelId",
    "SymbolExpr",
    "Symbol",
    "OrderFunction",
    "QuantumBasis",
    "QuadratureRule",
    "ToeplitzMatrix",
    "StarSeries",
    "AlmostAnalyticExtension",
]
