"""Service de certification des fonctions d'ordre et des classes S_δ(m)."""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import stats

from app.config import settings
from app.core.exceptions import ValidationError
from app.models.symbol import OrderFunction, Symbol, SymbolLike, as_tree
from app.models.symbol_expr import (
    ONE,
    Const,
    LevelPower,
    SymbolExpr,
    Z,
    ZBAR,
    add,
    evaluate,
    level,
    mul,
    substitute,
)
from app.schemas.certificates import SymbolCertificate
from app.services.differentiation import real_derivative_values

logger = structlog.get_logger()

BUMP_N_LIST = [1e2, 1e3, 1e4, 1e5, 1e6]
STABILITY_RATIO = 1.1
GROWTH_EXPONENT_LIMIT = 0.1


def certification_grid(
    size: Optional[int] = None, half_width: Optional[float] = None, center: complex = 0j
) -> np.ndarray:
    """Grille carrée déterministe (41×41 par défaut) dans la carte."""
    size = size or settings.certification_grid
    half_width = half_width or settings.certification_patch_radius
    axis = np.linspace(-half_width, half_width, size)
    xx, yy = np.meshgrid(axis, axis)
    return (center + xx + 1j * yy).ravel()


def multi_indices(max_alpha: int) -> List[Tuple[int, int]]:
    return [(px, order - px) for order in range(max_alpha + 1) for px in range(order, -1, -1)]


def scale_symbol(g: SymbolExpr, delta: float) -> Tuple[Symbol, OrderFunction]:
    """
    Construit f = N^δ·g et la fonction d'ordre candidate m = N^{2δ}·g + 1.

    Args:
        g: Arbre positif (graine de la fonction d'ordre)
        delta: Paramètre δ ∈ [0, 1/2)

    Returns:
        (f, m)
    """
    if not 0.0 <= delta < 0.5:
        raise ValidationError("delta doit être dans [0, 1/2)", {"delta": delta})
    values = evaluate(g, certification_grid(), N=1.0)
    if np.min(values.real) < -1e-12 or np.max(np.abs(values.imag)) > 1e-12:
        raise ValidationError(
            "la graine d'une fonction d'ordre doit être réelle positive",
            {"min": float(np.min(values.real))},
        )
    f = Symbol(expr=g, delta=delta, power=delta)
    m = OrderFunction(expr=add(mul(level(2 * delta), g), ONE), delta=delta)
    return f, m


def dilate_symbol(g: SymbolExpr, delta: float, center: complex = 0j) -> Symbol:
    """Symbole exotique g(c + N^δ(z - c)), dont les dérivées croissent comme N^{δ|α|}."""
    if not 0.0 <= delta < 0.5:
        raise ValidationError("delta doit être dans [0, 1/2)", {"delta": delta})
    if delta == 0:
        return Symbol(expr=g, delta=0.0)
    scale = LevelPower(delta)
    c = Const(center)
    cbar = Const(complex(center).conjugate())
    z_value = add(c, mul(scale, add(Z, Const(-complex(center)))))
    zbar_value = add(cbar, mul(scale, add(ZBAR, Const(-complex(center).conjugate()))))
    return Symbol(expr=substitute(g, z_value, zbar_value), delta=delta)


def _growth_exponent(N_list: Sequence[float], values: Sequence[float]) -> float:
    tail_N = np.log(np.asarray(N_list[-3:], dtype=float))
    tail_C = np.log(np.asarray(values[-3:], dtype=float))
    if len(tail_N) < 2:
        return 0.0
    return float(stats.linregress(tail_N, tail_C).slope)


def check_order_function(
    m: OrderFunction,
    delta: float,
    N_list: Sequence[float] = BUMP_N_LIST,
    sample_points: Optional[np.ndarray] = None,
    M0_range: Sequence[int] = range(0, 7),
    distance: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> SymbolCertificate:
    """
    Cherche le plus petit M₀ tel que m(x)/m(y) <= C(1 + N^δ d(x,y))^{M₀}.

    Toutes les paires ordonnées de points de l'échantillon sont testées. M₀ est
    retenu si C(N) est fini et si son exposant de croissance en fin de liste
    reste sous 0.1.
    """
    points = sample_points if sample_points is not None else certification_grid(size=21)
    points = np.asarray(points, dtype=complex)
    if distance is None:
        gaps = np.abs(points[:, None] - points[None, :])
    else:
        gaps = distance(points[:, None], points[None, :])

    ratios_by_N = []
    for N in N_list:
        values = m.values(points, N)
        if not np.all(np.isfinite(values)) or np.min(values) <= 0:
            return SymbolCertificate(
                kind="order_function",
                certified=False,
                delta=delta,
                N_list=list(N_list),
                witness={"reason": "positivité", "N": N, "min": float(np.nanmin(values))},
            )
        with np.errstate(over="ignore", invalid="ignore"):
            ratios_by_N.append(values[:, None] / values[None, :])

    per_N: Dict[str, List[float]] = {}
    exponents: Dict[str, float] = {}
    for M0 in M0_range:
        constants = []
        for N, ratios in zip(N_list, ratios_by_N):
            with np.errstate(over="ignore", invalid="ignore"):
                bound = ratios / (1.0 + N ** delta * gaps) ** M0
            constants.append(float(np.max(bound)) if np.all(np.isfinite(bound)) else float("inf"))
        per_N[str(M0)] = constants
        if not all(np.isfinite(constants)):
            exponents[str(M0)] = float("inf")
            continue
        exponent = _growth_exponent(N_list, constants)
        exponents[str(M0)] = exponent
        if exponent <= GROWTH_EXPONENT_LIMIT:
            C = max(constants)
            logger.info("Fonction d'ordre certifiée", M0=M0, C=C, delta=delta)
            return SymbolCertificate(
                kind="order_function",
                certified=True,
                delta=delta,
                N_list=list(N_list),
                M0=M0,
                C=C,
                per_N=per_N,
            )

    logger.warning("Fonction d'ordre non certifiée", delta=delta, exponents=exponents)
    return SymbolCertificate(
        kind="order_function",
        certified=False,
        delta=delta,
        N_list=list(N_list),
        per_N=per_N,
        witness={"reason": "croissance", "growth_exponents": exponents},
    )


def alpha_constants(
    tree: SymbolExpr,
    weight: Callable[[np.ndarray, float, int], np.ndarray],
    N_list: Sequence[float],
    max_alpha: int,
    points: Callable[[float], np.ndarray],
) -> Dict[str, List[float]]:
    """C_α(N) = max_grille |∂^α f| · weight(x, N, |α|) pour chaque multi-indice réel."""
    table: Dict[str, List[float]] = {}
    for px, py in multi_indices(max_alpha):
        constants = []
        for N in N_list:
            grid = points(N)
            derivative = np.abs(real_derivative_values(tree, px, py, grid, N=N))
            with np.errstate(over="ignore", invalid="ignore"):
                ratio = derivative * weight(grid, N, px + py)
            constants.append(float(np.max(ratio)) if np.all(np.isfinite(ratio)) else float("inf"))
        table[f"({px},{py})"] = constants
    return table


def stability_verdict(
    kind: str, delta: float, N_list: Sequence[float], table: Dict[str, List[float]]
) -> SymbolCertificate:
    per_alpha: Dict[str, float] = {}
    for alpha, constants in table.items():
        stable = all(np.isfinite(constants))
        if stable and len(constants) >= 2:
            stable = constants[-1] <= STABILITY_RATIO * constants[-2] + 1e-12
        if not stable:
            logger.warning("Borne de symbole violée", kind=kind, alpha=alpha, constants=constants)
            return SymbolCertificate(
                kind=kind,
                certified=False,
                delta=delta,
                N_list=list(N_list),
                per_N=table,
                witness={"alpha": alpha, "constants": constants},
            )
        per_alpha[alpha] = max(constants)
    return SymbolCertificate(
        kind=kind,
        certified=True,
        delta=delta,
        N_list=list(N_list),
        C=max(per_alpha.values()) if per_alpha else None,
        per_alpha=per_alpha,
        per_N=table,
    )


def check_symbol_class(
    f: SymbolLike,
    m: OrderFunction,
    N_list: Optional[Sequence[float]] = None,
    max_alpha: int = 4,
    grid: Optional[np.ndarray] = None,
    delta: Optional[float] = None,
) -> SymbolCertificate:
    """
    Certifie |∂^α f| <= C_α N^{δ|α|} m sur la grille pour |α| <= max_alpha.

    Args:
        f: Symbole (ou arbre)
        m: Fonction d'ordre
        N_list: Valeurs de N
        max_alpha: Ordre maximal des multi-indices réels
        grid: Points de la grille (41×41 par défaut)
        delta: δ (par défaut celui du symbole)

    Returns:
        Certificat avec les constantes C_α, ou témoin de violation
    """
    N_list = list(N_list or settings.default_n_list)
    delta = delta if delta is not None else (f.delta if isinstance(f, Symbol) else m.delta)
    tree = as_tree(f)
    points = grid if grid is not None else certification_grid()

    def weight(x: np.ndarray, N: float, order: int) -> np.ndarray:
        return 1.0 / (N ** (delta * order) * m.values(x, N))

    table = alpha_constants(tree, weight, N_list, max_alpha, lambda N: points)
    certificate = stability_verdict("symbol_class", delta, N_list, table)
    logger.info(
        "Classe de symbole vérifiée",
        certified=certificate.certified,
        delta=delta,
        max_alpha=max_alpha,
    )
    return certificate


def rescaled_derivative_bounds(
    f: SymbolLike,
    m: OrderFunction,
    N_list: Optional[Sequence[float]] = None,
    max_alpha: int = 3,
    grid: Optional[np.ndarray] = None,
    delta: Optional[float] = None,
    center: complex = 0j,
) -> SymbolCertificate:
    """Bornes uniformes en N de la famille x ↦ f(c + N^{-δ}(x - c)) contre m(c + N^{-δ}(x - c))."""
    N_list = list(N_list or settings.default_n_list)
    delta = delta if delta is not None else (f.delta if isinstance(f, Symbol) else m.delta)
    tree = as_tree(f)
    base = grid if grid is not None else certification_grid()

    def points(N: float) -> np.ndarray:
        return center + N ** (-delta) * (base - center)

    def weight(x: np.ndarray, N: float, order: int) -> np.ndarray:
        return N ** (-delta * order) / m.values(x, N)

    table = alpha_constants(tree, weight, N_list, max_alpha, points)
    return stability_verdict("rescaled_bounds", delta, N_list, table)
