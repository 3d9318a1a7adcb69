"""Service du produit étoile: coefficients h_j, crochet de Poisson."""

from math import factorial
from typing import List, Optional

import structlog

from app.core.exceptions import UnsupportedOrderError
from app.models.geometry import ModelGeometry, ModelId
from app.models.star_series import StarSeries
from app.models.symbol import Symbol, SymbolLike, as_tree
from app.models.symbol_expr import Const, SymbolExpr, add, mul, neg
from app.services.differentiation import derive, differentiate

logger = structlog.get_logger()


def _delta(*symbols: SymbolLike) -> float:
    return max((s.delta for s in symbols if isinstance(s, Symbol)), default=0.0)


def star_term(f: SymbolLike, g: SymbolLike, geometry: ModelGeometry, j: int) -> SymbolExpr:
    """
    Coefficient h_j du produit f ⋆ g.

    h_0 = f·g, h_1 = -H^{-1}·∂f·∂̄g; les ordres j >= 2 ne sont explicites que
    sur le plan de Bargmann.

    Args:
        f: Premier symbole
        g: Second symbole
        geometry: Modèle
        j: Ordre du coefficient

    Returns:
        Arbre du coefficient
    """
    ft, gt = as_tree(f), as_tree(g)
    if j == 0:
        return mul(ft, gt)
    if j == 1:
        return neg(mul(geometry.inverse_metric_expr(), derive(ft, False), derive(gt, True)))
    if geometry.model_id is not ModelId.BARGMANN or j < 0:
        raise UnsupportedOrderError(geometry.short_id, j, "star_term")
    return star_series_bargmann(f, g, j).terms[j]


def _diagonal_hierarchy(expr: SymbolExpr, d: int) -> SymbolExpr:
    """C_d[u] = (∂∂̄)^d u / d! sur la diagonale de Bargmann."""
    if d == 0:
        return expr
    return mul(Const(1.0 / factorial(d)), differentiate(expr, d, d))


def star_series_bargmann(f: SymbolLike, g: SymbolLike, J: int) -> StarSeries:
    """
    Récurrence de Bargmann (b_j = 0, C_a = (∂∂̄)^a/a!).

    h_j = Σ_{a+b+d=j} (1/d!)(∂̄^d C_a f)(∂^d C_b g) - Σ_{d>=1} C_d[h_{j-d}]
    """
    ft, gt = as_tree(f), as_tree(g)
    terms: List[SymbolExpr] = []
    orders: List[int] = []
    for j in range(J + 1):
        pieces = []
        order = 0
        for a in range(j + 1):
            for b in range(j - a + 1):
                d = j - a - b
                left = differentiate(ft, a, a + d)
                right = differentiate(gt, b + d, b)
                coefficient = 1.0 / (factorial(d) * factorial(a) * factorial(b))
                pieces.append(mul(Const(coefficient), left, right))
                order = max(order, 2 * a + d, 2 * b + d)
        for d in range(1, j + 1):
            pieces.append(neg(_diagonal_hierarchy(terms[j - d], d)))
            order = max(order, orders[j - d] + 2 * d)
        terms.append(add(*pieces))
        orders.append(order)
    logger.debug("Série étoile construite", J=J, model="bargmann")
    return StarSeries(
        terms=tuple(terms),
        delta=_delta(f, g),
        derivative_orders=tuple(orders),
    )


def star_series_closed_form(f: SymbolLike, g: SymbolLike, J: int) -> StarSeries:
    """Forme close anti-Wick de Bargmann: h_j = (-1)^j/j! ∂^j f ∂̄^j g."""
    ft, gt = as_tree(f), as_tree(g)
    terms = tuple(
        mul(Const((-1) ** j / factorial(j)), differentiate(ft, j, 0), differentiate(gt, 0, j))
        for j in range(J + 1)
    )
    return StarSeries(
        terms=terms,
        delta=_delta(f, g),
        derivative_orders=tuple(j for j in range(J + 1)),
        label="closed_form",
    )


def star_series(
    f: SymbolLike, g: SymbolLike, J: int, geometry: ModelGeometry
) -> StarSeries:
    """Série h_0..h_J pour le modèle (CP¹ limité à J <= 1)."""
    if geometry.model_id is ModelId.BARGMANN:
        return star_series_bargmann(f, g, J)
    if J > 1:
        raise UnsupportedOrderError(geometry.short_id, J, "star_series")
    terms = tuple(star_term(f, g, geometry, j) for j in range(J + 1))
    return StarSeries(
        terms=terms,
        delta=_delta(f, g),
        derivative_orders=tuple(range(J + 1)),
    )


def poisson_bracket(f: SymbolLike, g: SymbolLike, geometry: ModelGeometry) -> SymbolExpr:
    """{f,g} = (iH)^{-1}(∂f·∂̄g - ∂g·∂̄f)."""
    ft, gt = as_tree(f), as_tree(g)
    cross = add(
        mul(derive(ft, False), derive(gt, True)),
        neg(mul(derive(gt, False), derive(ft, True))),
    )
    return mul(Const(-1j), geometry.inverse_metric_expr(), cross)


def commutator_symbol(
    f: SymbolLike, g: SymbolLike, geometry: ModelGeometry, bracket: Optional[SymbolExpr] = None
) -> SymbolExpr:
    """Coefficient de N^{-1} dans [T_f, T_g]: -i{f,g}."""
    bracket = bracket if bracket is not None else poisson_bracket(f, g, geometry)
    return mul(Const(-1j), bracket)
