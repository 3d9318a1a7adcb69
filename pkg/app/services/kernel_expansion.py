"""Développements semi-classiques du noyau de T_{N,f}, sur et près de la diagonale."""

from math import factorial, pi

import numpy as np
import structlog

from app.core.exceptions import ExpansionWindowError, UnsupportedOrderError
from app.models.geometry import ModelGeometry, ModelId
from app.models.symbol import SymbolLike, as_tree
from app.models.symbol_expr import evaluate
from app.services.differentiation import differentiate

logger = structlog.get_logger()

DEFAULT_WINDOW = 3.0


def _laplacian_series(tree, z: complex, zbar: complex, J: int, N: float) -> complex:
    total = 0j
    for j in range(J + 1):
        value = evaluate(differentiate(tree, j, j), np.array([z]), np.array([zbar]), N=N)[0]
        total += N ** (-j) * value / factorial(j)
    return complex(total)


def diagonal_kernel_expansion(
    f: SymbolLike, x: complex, J: int, geometry: ModelGeometry, N: float
) -> complex:
    """
    Prédiction de weighted_kernel_at(T_f, x, x̄) à l'ordre J.

    Bargmann: (N/2π) Σ_{j≤J} N^{-j} (∂∂̄)^j f(x)/j!.
    CP¹ (J <= 1): (N/2π)[f + N^{-1}(f + H^{-1}∂∂̄f)], amplitude b₁ = 1.
    """
    tree = as_tree(f)
    x = complex(x)
    if geometry.model_id is ModelId.BARGMANN:
        return N / (2 * pi) * _laplacian_series(tree, x, x.conjugate(), J, N)
    if J > 1:
        raise UnsupportedOrderError(geometry.short_id, J, "diagonal_kernel_expansion")
    point = np.array([x])
    value = complex(evaluate(tree, point, N=N)[0])
    if J == 0:
        return N / (2 * pi) * value
    inverse_metric = complex(evaluate(geometry.inverse_metric_expr(), point)[0])
    laplacian = complex(evaluate(differentiate(tree, 1, 1), point, N=N)[0])
    return N / (2 * pi) * (value + (value + inverse_metric * laplacian) / N)


def offdiagonal_kernel_expansion(
    f: SymbolLike,
    x: complex,
    y_conj: complex,
    J: int,
    geometry: ModelGeometry,
    N: float,
    window: float = DEFAULT_WINDOW,
) -> complex:
    """
    Noyau pondéré près de la diagonale (Bargmann).

    e^{Nxȳ - (N/2)(|x|²+|y|²)} · (N/2π) Σ_{j≤J} N^{-j} (∂∂̄)^j f / j! évalué au
    prolongement polarisé (z, z̄) = (x, ȳ). Le facteur de phase a pour module
    e^{-N|x-y|²/2}.

    Raises:
        ExpansionWindowError: si |x - y| > window·N^{-1/2}
    """
    if geometry.model_id is not ModelId.BARGMANN:
        raise UnsupportedOrderError(geometry.short_id, J, "offdiagonal_kernel_expansion")
    x = complex(x)
    y_conj = complex(y_conj)
    y = y_conj.conjugate()
    gap = abs(x - y)
    limit = window / np.sqrt(N)
    if gap > limit:
        raise ExpansionWindowError(gap, limit)
    phase = np.exp(N * x * y_conj - 0.5 * N * (abs(x) ** 2 + abs(y) ** 2))
    series = _laplacian_series(as_tree(f), x, y_conj, J, N)
    return complex(phase * N / (2 * pi) * series)


def gaussian_factor(x: complex, y: complex, N: float) -> float:
    """e^{-N|x-y|²/2}, module du facteur de phase de Bargmann."""
    return float(np.exp(-0.5 * N * abs(complex(x) - complex(y)) ** 2))
