"""Service géométrique: potentiels, prolongements, densités et domination de phase."""

from typing import Iterable, List, Sequence, Tuple

import numpy as np
import structlog

from app.config import settings
from app.core.exceptions import (
    ChartOverflowError,
    ConfigurationError,
    PhaseDominationError,
    PolarizationError,
)
from app.models.geometry import ModelGeometry, ModelId

logger = structlog.get_logger()

_ALIASES = {
    "bargmann": ModelId.BARGMANN,
    "bargmann_plane": ModelId.BARGMANN,
    "cp1": ModelId.PROJECTIVE_LINE,
    "projective_line": ModelId.PROJECTIVE_LINE,
}


def geometry_from_id(geometry_id: str) -> ModelGeometry:
    """Construit la géométrie à partir de son identifiant ("bargmann" | "cp1")."""
    model_id = _ALIASES.get(geometry_id.strip().lower())
    if model_id is None:
        raise ConfigurationError(
            f"Géométrie inconnue: {geometry_id}",
            {"accepted": sorted(_ALIASES)},
        )
    if model_id is ModelId.BARGMANN:
        return ModelGeometry(model_id)
    return ModelGeometry(model_id, chart_bound=settings.cp1_chart_radius)


def _check_chart(geometry: ModelGeometry, *points: complex) -> None:
    for point in points:
        if not np.isfinite(point):
            raise ChartOverflowError(complex(point), geometry.chart_bound)
        if abs(point) > geometry.chart_bound:
            raise ChartOverflowError(complex(point), geometry.chart_bound)


def potential_at(geometry: ModelGeometry, z: complex) -> float:
    _check_chart(geometry, z)
    return float(geometry.potential(z))


def extension_at(geometry: ModelGeometry, x: complex, y_conj: complex) -> complex:
    _check_chart(geometry, x, y_conj)
    if geometry.model_id is ModelId.PROJECTIVE_LINE:
        w = 1 + x * y_conj
        if w.imag == 0 and w.real <= 0:
            raise PolarizationError(complex(x), complex(y_conj))
    return complex(geometry.extension(x, y_conj))


def metric_volume_at(geometry: ModelGeometry, z: complex) -> Tuple[float, float]:
    _check_chart(geometry, z)
    H = float(geometry.metric_density(z))
    return H, 2.0 * H


def distance(geometry: ModelGeometry, x: complex, y: complex) -> float:
    return float(geometry.distance(x, y))


def to_chart(geometry: ModelGeometry, z: complex) -> Tuple[int, complex]:
    """Indice de carte (0 distinguée, 1 antipodale w = 1/z) et coordonnée."""
    if geometry.model_id is ModelId.BARGMANN or abs(z) <= geometry.chart_bound:
        return 0, complex(z)
    return 1, complex(1 / z)


def antipodal_chart(z: complex) -> complex:
    return complex(1 / z)


def phase_defect(geometry: ModelGeometry, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Re ψ(x, ȳ) - ½(φ(x) + φ(y))."""
    return (
        geometry.extension(x, np.conj(y)).real
        - 0.5 * (geometry.potential(x) + geometry.potential(y))
    )


def phase_domination_check(
    geometry: ModelGeometry,
    samples: Sequence[Tuple[complex, complex]],
    radius: float = 0.5,
) -> float:
    """
    Plus grande constante C telle que Re ψ(x,ȳ) - ½(φ(x)+φ(y)) <= -C|x-y|².

    Args:
        geometry: Modèle
        samples: Paires (x, y) dans une même carte
        radius: Borne sur |x - y|

    Returns:
        Constante C ajustée (strictement positive)
    """
    pairs = np.array(list(samples), dtype=complex).reshape(-1, 2)
    x, y = pairs[:, 0], pairs[:, 1]
    for point in np.concatenate([x, y]):
        _check_chart(geometry, point)

    gap = np.abs(x - y)
    keep = (gap > 0) & (gap <= radius)
    if not np.any(keep):
        logger.info("Domination de phase: paires diagonales uniquement")
        return float("inf")

    defect = phase_defect(geometry, x[keep], y[keep])
    ratios = -defect / gap[keep] ** 2
    C = float(np.min(ratios))
    if C <= 0:
        offending = [
            [[complex(a).real, complex(a).imag], [complex(b).real, complex(b).imag]]
            for a, b, r in zip(x[keep], y[keep], ratios)
            if r <= 0
        ]
        raise PhaseDominationError(offending)

    logger.info("Domination de phase vérifiée", model=geometry.short_id, C=C, pairs=int(keep.sum()))
    return C


def sample_pairs(
    radius: float, separation: float, count: int, seed: int = 0
) -> List[Tuple[complex, complex]]:
    """Paires aléatoires (graine fixée) avec |x| <= radius et |x - y| <= separation."""
    rng = np.random.default_rng(seed)
    x = radius * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count))
    step = separation * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count))
    y = x + step
    scale = np.maximum(1.0, np.abs(y) / radius)
    return list(zip(x, y / scale))


def holomorphy_residuals(
    geometry: ModelGeometry, points: Iterable[Tuple[complex, complex]], step: float = 1e-5
) -> Tuple[float, float]:
    """Résidus de Cauchy-Riemann de ψ: holomorphe en x, anti-holomorphe en y.

    Returns:
        (résidu en x, résidu en y), dérivées ∂̄_x ψ et ∂_y ψ(x, ȳ) par différences centrées
    """
    worst_x = 0.0
    worst_y = 0.0
    for x, y in points:
        def psi(a: complex, b: complex) -> complex:
            return complex(geometry.extension(a, np.conj(b)))

        dbar_x = 0.5 * (
            (psi(x + step, y) - psi(x - step, y)) / (2 * step)
            + 1j * (psi(x + 1j * step, y) - psi(x - 1j * step, y)) / (2 * step)
        )
        d_y = 0.5 * (
            (psi(x, y + step) - psi(x, y - step)) / (2 * step)
            - 1j * (psi(x, y + 1j * step) - psi(x, y - 1j * step)) / (2 * step)
        )
        worst_x = max(worst_x, abs(dbar_x))
        worst_y = max(worst_y, abs(d_y))
    return worst_x, worst_y
