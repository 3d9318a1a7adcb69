"""Arbres d'expressions des symboles en z et z̄."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Callable, Dict, Iterable, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

Number = Union[int, float, complex]


class SymbolExpr:
    """Noeud immuable d'un arbre de symbole.

    L'égalité est structurelle et le hash est mis en cache, ce qui permet
    d'utiliser les arbres comme clés de cache de dérivation.
    """

    def _key(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))

    def __hash__(self) -> int:
        cached = self.__dict__.get("_hash_cache")
        if cached is None:
            cached = hash((type(self).__name__, self._key()))
            object.__setattr__(self, "_hash_cache", cached)
        return cached

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        if hash(self) != hash(other):
            return False
        return self._key() == other._key()

    # Opérateurs de confort (tests, construction programmatique)
    def __add__(self, other: "ExprLike") -> "SymbolExpr":
        return add(self, as_expr(other))

    def __radd__(self, other: "ExprLike") -> "SymbolExpr":
        return add(as_expr(other), self)

    def __sub__(self, other: "ExprLike") -> "SymbolExpr":
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other: "ExprLike") -> "SymbolExpr":
        return add(as_expr(other), neg(self))

    def __mul__(self, other: "ExprLike") -> "SymbolExpr":
        return mul(self, as_expr(other))

    def __rmul__(self, other: "ExprLike") -> "SymbolExpr":
        return mul(as_expr(other), self)

    def __truediv__(self, other: "ExprLike") -> "SymbolExpr":
        return mul(self, recip(as_expr(other)))

    def __rtruediv__(self, other: "ExprLike") -> "SymbolExpr":
        return mul(as_expr(other), recip(self))

    def __neg__(self) -> "SymbolExpr":
        return neg(self)

    def __pow__(self, k: int) -> "SymbolExpr":
        return power(self, k)

    def __str__(self) -> str:
        return to_text(self)


ExprLike = Union[SymbolExpr, Number]


@dataclass(frozen=True, eq=False)
class Const(SymbolExpr):
    value: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True, eq=False)
class Var(SymbolExpr):
    """z (conj=False) ou z̄ (conj=True)."""

    conj: bool


@dataclass(frozen=True, eq=False)
class LevelPower(SymbolExpr):
    """Puissance N^rho du paramètre semi-classique (constante pour ∂, ∂̄)."""

    rho: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho", float(self.rho))


@dataclass(frozen=True, eq=False)
class Add(SymbolExpr):
    terms: Tuple[SymbolExpr, ...]


@dataclass(frozen=True, eq=False)
class Mul(SymbolExpr):
    factors: Tuple[SymbolExpr, ...]


@dataclass(frozen=True, eq=False)
class Neg(SymbolExpr):
    arg: SymbolExpr


@dataclass(frozen=True, eq=False)
class Pow(SymbolExpr):
    base: SymbolExpr
    exponent: int


@dataclass(frozen=True, eq=False)
class Exp(SymbolExpr):
    arg: SymbolExpr


@dataclass(frozen=True, eq=False)
class Recip(SymbolExpr):
    arg: SymbolExpr


@dataclass(frozen=True, eq=False)
class Bump(SymbolExpr):
    """Dérivée d'ordre `order` du profil de plateau β(s) = exp(1 - 1/(1 - s)).

    s = (arg - c)(argc - c̄)/r², avec arg = z et argc = z̄ pour une bosse
    standard; le support est le disque |z - c| <= r.
    """

    center: complex
    radius: float
    order: int
    arg: SymbolExpr
    argc: SymbolExpr

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "order", int(self.order))


Z = Var(False)
ZBAR = Var(True)
ZERO = Const(0)
ONE = Const(1)


def as_expr(value: ExprLike) -> SymbolExpr:
    if isinstance(value, SymbolExpr):
        return value
    return Const(value)


def is_const(expr: SymbolExpr, value: Number | None = None) -> bool:
    if not isinstance(expr, Const):
        return False
    return value is None or expr.value == value


# Constructeurs normalisants: pliage des constantes, zéros et unités.

def add(*terms: SymbolExpr) -> SymbolExpr:
    flat = []
    constant = 0j
    for term in terms:
        children = term.terms if isinstance(term, Add) else (term,)
        for child in children:
            if isinstance(child, Const):
                constant += child.value
            else:
                flat.append(child)
    if constant != 0:
        flat.insert(0, Const(constant))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*factors: SymbolExpr) -> SymbolExpr:
    flat = []
    constant = 1 + 0j
    rho = 0.0
    for factor in factors:
        children = factor.factors if isinstance(factor, Mul) else (factor,)
        for child in children:
            if isinstance(child, Const):
                constant *= child.value
            elif isinstance(child, LevelPower):
                rho += child.rho
            else:
                flat.append(child)
    if constant == 0:
        return ZERO
    head = []
    if constant != 1:
        head.append(Const(constant))
    if rho != 0.0:
        head.append(LevelPower(rho))
    flat = head + flat
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def neg(expr: SymbolExpr) -> SymbolExpr:
    if isinstance(expr, Const):
        return Const(-expr.value)
    if isinstance(expr, Neg):
        return expr.arg
    return Neg(expr)


def power(base: SymbolExpr, exponent: int) -> SymbolExpr:
    if int(exponent) != exponent or exponent < 0:
        raise ValueError(f"exposant entier positif attendu, reçu {exponent}")
    exponent = int(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** exponent)
    if isinstance(base, LevelPower):
        return LevelPower(base.rho * exponent)
    if isinstance(base, Pow):
        return Pow(base.base, base.exponent * exponent)
    return Pow(base, exponent)


def exp_(arg: SymbolExpr) -> SymbolExpr:
    if isinstance(arg, Const):
        return Const(np.exp(arg.value))
    return Exp(arg)


def recip(arg: SymbolExpr) -> SymbolExpr:
    if isinstance(arg, Const):
        if arg.value == 0:
            raise ZeroDivisionError("inverse de la constante 0")
        return Const(1 / arg.value)
    if isinstance(arg, Recip):
        return arg.arg
    if isinstance(arg, LevelPower):
        return LevelPower(-arg.rho)
    return Recip(arg)


def bump(
    center: Number,
    radius: float,
    order: int = 0,
    arg: SymbolExpr = Z,
    argc: SymbolExpr = ZBAR,
) -> SymbolExpr:
    if radius <= 0:
        raise ValueError("le rayon d'une bosse doit être strictement positif")
    return Bump(complex(center), float(radius), int(order), arg, argc)


def level(rho: float) -> SymbolExpr:
    return ONE if rho == 0 else LevelPower(rho)


# Impression entièrement parenthésée, relue à l'identique par le parseur.

def _number_text(value: complex) -> str:
    if value.imag == 0:
        real = value.real
        return f"({real!r})" if real < 0 or math.copysign(1.0, real) < 0 else repr(real)
    return f"({value.real!r} + {value.imag!r}*i)"


def _rho_text(rho: float) -> str:
    return f"({rho!r})" if rho < 0 else repr(rho)


def to_text(expr: SymbolExpr) -> str:
    if isinstance(expr, Const):
        return _number_text(expr.value)
    if isinstance(expr, Var):
        return "conj(z)" if expr.conj else "z"
    if isinstance(expr, LevelPower):
        return f"(N^{_rho_text(expr.rho)})"
    if isinstance(expr, Add):
        return "(" + " + ".join(to_text(t) for t in expr.terms) + ")"
    if isinstance(expr, Mul):
        return "(" + " * ".join(to_text(f) for f in expr.factors) + ")"
    if isinstance(expr, Neg):
        return f"(-{to_text(expr.arg)})"
    if isinstance(expr, Pow):
        return f"({to_text(expr.base)}^{expr.exponent})"
    if isinstance(expr, Exp):
        return f"exp({to_text(expr.arg)})"
    if isinstance(expr, Recip):
        return f"(1/{to_text(expr.arg)})"
    if isinstance(expr, Bump):
        center = _number_text(expr.center)
        if expr.arg == Z and expr.argc == ZBAR:
            if expr.order == 0:
                return f"bump({center}, {expr.radius!r})"
            return f"bumpd({expr.order}, {center}, {expr.radius!r})"
        return (
            f"bump({center}, {expr.radius!r}, {expr.order}, "
            f"{to_text(expr.arg)}, {to_text(expr.argc)})"
        )
    raise TypeError(f"noeud inconnu: {type(expr).__name__}")


# Transformations structurelles

def rebuild(expr: SymbolExpr, leaf: Callable[[SymbolExpr], SymbolExpr]) -> SymbolExpr:
    """Reconstruit l'arbre en remplaçant les feuilles Var via `leaf`."""
    memo: Dict[int, SymbolExpr] = {}

    def walk(node: SymbolExpr) -> SymbolExpr:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, (Const, LevelPower)):
            out = node
        elif isinstance(node, Var):
            out = leaf(node)
        elif isinstance(node, Add):
            out = add(*(walk(t) for t in node.terms))
        elif isinstance(node, Mul):
            out = mul(*(walk(f) for f in node.factors))
        elif isinstance(node, Neg):
            out = neg(walk(node.arg))
        elif isinstance(node, Pow):
            out = power(walk(node.base), node.exponent)
        elif isinstance(node, Exp):
            out = exp_(walk(node.arg))
        elif isinstance(node, Recip):
            out = recip(walk(node.arg))
        elif isinstance(node, Bump):
            out = Bump(node.center, node.radius, node.order, walk(node.arg), walk(node.argc))
        else:
            raise TypeError(f"noeud inconnu: {type(node).__name__}")
        memo[key] = out
        return out

    return walk(expr)


def substitute(expr: SymbolExpr, z_value: SymbolExpr, zbar_value: SymbolExpr) -> SymbolExpr:
    return rebuild(expr, lambda v: zbar_value if v.conj else z_value)


def conjugate(expr: SymbolExpr) -> SymbolExpr:
    """Conjugué complexe structurel (z ↔ z̄, constantes conjuguées)."""
    if isinstance(expr, Const):
        return Const(expr.value.conjugate())
    if isinstance(expr, (LevelPower,)):
        return expr
    if isinstance(expr, Var):
        return Var(not expr.conj)
    if isinstance(expr, Add):
        return add(*(conjugate(t) for t in expr.terms))
    if isinstance(expr, Mul):
        return mul(*(conjugate(f) for f in expr.factors))
    if isinstance(expr, Neg):
        return neg(conjugate(expr.arg))
    if isinstance(expr, Pow):
        return power(conjugate(expr.base), expr.exponent)
    if isinstance(expr, Exp):
        return exp_(conjugate(expr.arg))
    if isinstance(expr, Recip):
        return recip(conjugate(expr.arg))
    if isinstance(expr, Bump):
        return Bump(expr.center, expr.radius, expr.order, conjugate(expr.argc), conjugate(expr.arg))
    raise TypeError(f"noeud inconnu: {type(expr).__name__}")


def canonical_key(expr: SymbolExpr) -> str:
    """Forme canonique: enfants des sommes et produits triés."""
    if isinstance(expr, Add):
        return "+(" + ",".join(sorted(canonical_key(t) for t in expr.terms)) + ")"
    if isinstance(expr, Mul):
        return "*(" + ",".join(sorted(canonical_key(f) for f in expr.factors)) + ")"
    if isinstance(expr, Neg):
        return f"-({canonical_key(expr.arg)})"
    if isinstance(expr, Pow):
        return f"^({canonical_key(expr.base)},{expr.exponent})"
    if isinstance(expr, Exp):
        return f"exp({canonical_key(expr.arg)})"
    if isinstance(expr, Recip):
        return f"inv({canonical_key(expr.arg)})"
    if isinstance(expr, Bump):
        pair = sorted([canonical_key(expr.arg), canonical_key(expr.argc)])
        if expr.center.imag != 0:
            pair = [canonical_key(expr.arg), canonical_key(expr.argc)]
        return f"bump({expr.center!r},{expr.radius!r},{expr.order},{pair[0]},{pair[1]})"
    return to_text(expr)


def is_conjugation_symmetric(expr: SymbolExpr) -> bool:
    """Vrai si l'arbre est égal à son conjugué (donc réel sur la diagonale)."""
    return canonical_key(conjugate(expr)) == canonical_key(expr)


def iter_nodes(expr: SymbolExpr) -> Iterable[SymbolExpr]:
    stack = [expr]
    seen = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        if isinstance(node, Add):
            stack.extend(node.terms)
        elif isinstance(node, Mul):
            stack.extend(node.factors)
        elif isinstance(node, (Neg, Exp, Recip)):
            stack.append(node.arg)
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, Bump):
            stack.extend((node.arg, node.argc))


def node_count(expr: SymbolExpr) -> int:
    return sum(1 for _ in iter_nodes(expr))


def is_polynomial(expr: SymbolExpr) -> bool:
    """Symboles polynomiaux en z, z̄ (qualité « oracle », support non compact)."""
    return all(
        isinstance(node, (Const, Var, LevelPower, Add, Mul, Neg, Pow))
        for node in iter_nodes(expr)
    )


def bump_supports(expr: SymbolExpr) -> Tuple[Tuple[complex, float], ...]:
    return tuple(
        (node.center, node.radius)
        for node in iter_nodes(expr)
        if isinstance(node, Bump) and node.arg == Z and node.argc == ZBAR
    )


# Évaluation numérique vectorisée

@lru_cache(maxsize=None)
def profile_coefficients(order: int) -> Tuple[float, ...]:
    """Coefficients de P_k avec β^(k)(s) = e·exp(-u)·P_k(u), u = 1/(1 - s)."""
    coefficients = np.array([1.0])
    for _ in range(order):
        derived = P.polysub(P.polyder(coefficients), coefficients)
        coefficients = P.polymul([0.0, 0.0, 1.0], derived)
    return tuple(float(c) for c in coefficients)


def profile_values(s: np.ndarray, order: int) -> np.ndarray:
    """β^(order)(s), prolongement analytique là où Re s < 1, zéro ailleurs."""
    s = np.asarray(s, dtype=complex)
    out = np.zeros(s.shape, dtype=complex)
    inside = s.real < 0.999
    if not np.any(inside):
        return out
    u = 1.0 / (1.0 - s[inside])
    live = u.real < 700.0
    values = np.zeros(u.shape, dtype=complex)
    ul = u[live]
    values[live] = np.e * np.exp(-ul) * P.polyval(ul, profile_coefficients(order))
    out[inside] = values
    return out


def evaluate(
    expr: SymbolExpr,
    z: np.ndarray | complex,
    zbar: np.ndarray | complex | None = None,
    N: float = 1.0,
) -> np.ndarray:
    """Évalue l'arbre en (z, z̄); z̄ = conj(z) par défaut (diagonale).

    Des valeurs indépendantes de z et z̄ donnent l'évaluation polarisée
    utilisée pour les prolongements hors diagonale.
    """
    z = np.asarray(z, dtype=complex)
    zbar = np.conj(z) if zbar is None else np.asarray(zbar, dtype=complex)
    memo: Dict[int, np.ndarray] = {}

    def walk(node: SymbolExpr):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            out = node.value
        elif isinstance(node, Var):
            out = zbar if node.conj else z
        elif isinstance(node, LevelPower):
            out = float(N) ** node.rho
        elif isinstance(node, Add):
            out = walk(node.terms[0])
            for term in node.terms[1:]:
                out = out + walk(term)
        elif isinstance(node, Mul):
            out = walk(node.factors[0])
            for factor in node.factors[1:]:
                out = out * walk(factor)
        elif isinstance(node, Neg):
            out = -walk(node.arg)
        elif isinstance(node, Pow):
            out = walk(node.base) ** node.exponent
        elif isinstance(node, Exp):
            out = np.exp(walk(node.arg))
        elif isinstance(node, Recip):
            out = 1.0 / walk(node.arg)
        elif isinstance(node, Bump):
            s = (walk(node.arg) - node.center) * (walk(node.argc) - node.center.conjugate())
            out = profile_values(s / node.radius ** 2, node.order)
        else:
            raise TypeError(f"noeud inconnu: {type(node).__name__}")
        memo[key] = out
        return out

    with np.errstate(over="ignore", invalid="ignore"):
        result = walk(expr)
    return np.broadcast_to(np.asarray(result, dtype=complex), np.broadcast(z, zbar).shape).copy()
