"""Dérivation symbolique de Wirtinger des arbres de symboles."""

from functools import lru_cache
from math import comb
from typing import Dict, Tuple

import numpy as np
import structlog

from app.config import settings
from app.core.exceptions import DerivativeOrderError, ValidationError
from app.models.symbol_expr import (
    ONE,
    ZERO,
    Add,
    Bump,
    Const,
    Exp,
    LevelPower,
    Mul,
    Neg,
    Pow,
    Recip,
    SymbolExpr,
    Var,
    add,
    evaluate,
    iter_nodes,
    mul,
    neg,
    power,
)

logger = structlog.get_logger()


def _derive(expr: SymbolExpr, conj: bool) -> SymbolExpr:
    """Une dérivée: ∂ (conj=False) ou ∂̄ (conj=True)."""
    if isinstance(expr, (Const, LevelPower)):
        return ZERO
    if isinstance(expr, Var):
        return ONE if expr.conj == conj else ZERO
    if isinstance(expr, Add):
        return add(*(derive(t, conj) for t in expr.terms))
    if isinstance(expr, Mul):
        terms = []
        for i, factor in enumerate(expr.factors):
            d = derive(factor, conj)
            if d == ZERO:
                continue
            terms.append(mul(*expr.factors[:i], d, *expr.factors[i + 1:]))
        return add(*terms)
    if isinstance(expr, Neg):
        return neg(derive(expr.arg, conj))
    if isinstance(expr, Pow):
        d = derive(expr.base, conj)
        if d == ZERO:
            return ZERO
        return mul(Const(expr.exponent), power(expr.base, expr.exponent - 1), d)
    if isinstance(expr, Exp):
        d = derive(expr.arg, conj)
        return ZERO if d == ZERO else mul(expr, d)
    if isinstance(expr, Recip):
        d = derive(expr.arg, conj)
        return ZERO if d == ZERO else neg(mul(power(expr, 2), d))
    if isinstance(expr, Bump):
        d_arg = derive(expr.arg, conj)
        d_argc = derive(expr.argc, conj)
        inner = add(
            mul(d_arg, add(expr.argc, Const(-expr.center.conjugate()))),
            mul(add(expr.arg, Const(-expr.center)), d_argc),
        )
        if inner == ZERO:
            return ZERO
        cap = settings.bump_derivative_cap
        if expr.order + 1 > cap:
            raise DerivativeOrderError(expr.order + 1, cap)
        raised = Bump(expr.center, expr.radius, expr.order + 1, expr.arg, expr.argc)
        return mul(Const(1.0 / expr.radius ** 2), raised, inner)
    raise TypeError(f"noeud inconnu: {type(expr).__name__}")


@lru_cache(maxsize=65536)
def derive(expr: SymbolExpr, conj: bool) -> SymbolExpr:
    return _derive(expr, conj)


@lru_cache(maxsize=65536)
def _differentiate(expr: SymbolExpr, a: int, b: int) -> SymbolExpr:
    if b > 0:
        return derive(_differentiate(expr, a, b - 1), True)
    if a > 0:
        return derive(_differentiate(expr, a - 1, 0), False)
    return expr


def differentiate(expr: SymbolExpr, a: int, b: int) -> SymbolExpr:
    """
    Dérivée exacte ∂^a ∂̄^b de l'arbre.

    Args:
        expr: Arbre du symbole
        a: Ordre en z
        b: Ordre en z̄

    Returns:
        Arbre de la dérivée (les bosses montent d'un ordre de profil par dérivée)
    """
    if a < 0 or b < 0:
        raise ValidationError("ordres de dérivation négatifs", {"a": a, "b": b})
    return _differentiate(expr, int(a), int(b))


def wirtinger_decomposition(px: int, py: int) -> Dict[Tuple[int, int], complex]:
    """∂_x^px ∂_y^py = Σ coeff · ∂^a ∂̄^b avec ∂_x = ∂ + ∂̄ et ∂_y = i(∂ - ∂̄)."""
    coefficients: Dict[Tuple[int, int], complex] = {}
    for s in range(px + 1):
        for t in range(py + 1):
            key = (s + t, px - s + py - t)
            value = comb(px, s) * comb(py, t) * (1j ** py) * (-1) ** (py - t)
            coefficients[key] = coefficients.get(key, 0) + value
    return {k: v for k, v in coefficients.items() if v != 0}


def real_derivative_values(
    expr: SymbolExpr, px: int, py: int, z: np.ndarray, N: float = 1.0
) -> np.ndarray:
    """Valeurs de ∂_x^px ∂_y^py du symbole sur la diagonale."""
    total = np.zeros(np.shape(z), dtype=complex)
    for (a, b), coefficient in wirtinger_decomposition(px, py).items():
        total += coefficient * evaluate(differentiate(expr, a, b), z, N=N)
    return total


def finite_difference(
    expr: SymbolExpr, a: int, b: int, z: complex, N: float = 1.0, step: float = 1e-4
) -> complex:
    """Oracle par différences centrées de ∂^a ∂̄^b (∂ = ½(∂_x - i∂_y))."""

    def value(w: complex) -> complex:
        return complex(evaluate(expr, np.array([w]), N=N)[0])

    def apply(fn, conj: bool):
        def derived(w: complex) -> complex:
            dx = (fn(w + step) - fn(w - step)) / (2 * step)
            dy = (fn(w + 1j * step) - fn(w - 1j * step)) / (2 * step)
            return 0.5 * (dx + 1j * dy) if conj else 0.5 * (dx - 1j * dy)
        return derived

    fn = value
    for _ in range(a):
        fn = apply(fn, False)
    for _ in range(b):
        fn = apply(fn, True)
    return fn(z)


def derivative_order(expr: SymbolExpr) -> int:
    """Ordre maximal de profil de bosse présent dans l'arbre."""
    return max((node.order for node in iter_nodes(expr) if isinstance(node, Bump)), default=0)


__all__ = [
    "derive",
    "differentiate",
    "wirtinger_decomposition",
    "real_derivative_values",
    "finite_difference",
    "derivative_order",
]
