"""Service de construction des prolongements presque analytiques et mesure de ∂̄χ̃."""

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import structlog

from app.core.exceptions import FitError, ResolutionError, ValidationError
from app.models.extension import (
    AlmostAnalyticExtension,
    smooth_step,
    smooth_step_derivative,
)
from app.models.symbol_expr import profile_values
from app.schemas.experiments import ChiSpec
from app.services.rate_fitting import NUMERICAL_FLOOR, fit_rate

logger = structlog.get_logger()

DEFAULT_SAMPLES = 4096
TAIL_FRACTION = 8
TAIL_TOLERANCE = 1e-12
MODE_TOLERANCE = 1e-16
TRACE_TOLERANCE = 1e-10
DECAY_MARGIN = 0.3
MARGIN_FRACTION = 0.15

RealFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DbarDecay:
    """sup_x |∂̄χ̃(x+iy)| par valeur de y et pente log-log ajustée."""

    y: np.ndarray
    sup: np.ndarray
    slope: float
    stderr: float
    floor: bool


def chi_functions(chi: ChiSpec) -> Tuple[RealFunction, RealFunction]:
    """χ et χ' pour une bosse standard β(((x-c)/w)²) ou une indicatrice lissée."""
    c, w = chi.center, chi.width
    if chi.shape == "bump":

        def value(x: np.ndarray) -> np.ndarray:
            s = ((np.asarray(x, dtype=float) - c) / w) ** 2
            return profile_values(s, 0).real

        def derivative(x: np.ndarray) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            s = ((x - c) / w) ** 2
            return profile_values(s, 1).real * 2 * (x - c) / w ** 2

        return value, derivative

    ramp = chi.ramp
    start, stop = c - w - ramp, c + w + ramp

    def value(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return smooth_step((x - start) / ramp) * smooth_step((stop - x) / ramp)

    def derivative(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        left, right = (x - start) / ramp, (stop - x) / ramp
        return (
            smooth_step_derivative(left) * smooth_step(right)
            - smooth_step(left) * smooth_step_derivative(right)
        ) / ramp

    return value, derivative


def build_almost_analytic_extension(
    chi: ChiSpec,
    Y: float = 0.5,
    M_target: int = 4,
    samples: int = DEFAULT_SAMPLES,
) -> AlmostAnalyticExtension:
    """
    Construit χ̃ par représentation de Fourier de χ sur un domaine périodisé.

    Args:
        chi: Spécification de χ
        Y: Demi-largeur de la bande, dans (0, 1]
        M_target: Ordre de décroissance visé pour ∂̄χ̃
        samples: Nombre d'échantillons de χ

    Returns:
        Prolongement spectral, avec la pente de décroissance mesurée

    Raises:
        ValidationError: Y hors de (0, 1]
        ResolutionError: queue spectrale trop lourde, ou décroissance insuffisante
    """
    if not 0.0 < Y <= 1.0:
        raise ValidationError("Y doit être dans (0, 1]", {"Y": Y})
    value, derivative = chi_functions(chi)
    lo, hi = chi.support
    margin = MARGIN_FRACTION * (hi - lo)
    a, b = lo - 4 * margin, hi + 4 * margin
    length = b - a
    x = a + length * np.arange(samples) / samples
    coefficients = np.fft.fft(value(x)) / samples
    frequencies = 2 * np.pi * np.fft.fftfreq(samples, d=length / samples)
    coefficients[samples // 2] = 0.0

    scale = float(np.max(np.abs(coefficients)))
    by_frequency = np.argsort(np.abs(frequencies))
    tail = by_frequency[-(samples // TAIL_FRACTION):]
    tail_level = float(np.max(np.abs(coefficients[tail]))) / scale
    if tail_level > TAIL_TOLERANCE:
        raise ResolutionError(
            "Échantillonnage de χ insuffisant: queue spectrale trop lourde",
            {"tail": tail_level, "samples": samples, "width": chi.width},
        )

    coefficients = coefficients * np.exp(-1j * frequencies * a)
    keep = np.abs(coefficients) > MODE_TOLERANCE * scale
    extension = AlmostAnalyticExtension(
        kind="spectral",
        support=(lo, hi),
        Y=Y,
        M_target=M_target,
        chi=value,
        chi_prime=derivative,
        margin=margin,
        frequencies=frequencies[keep],
        coefficients=coefficients[keep],
    )

    grid = np.linspace(a, b, 1024)
    trace_residual = float(np.max(np.abs(extension.values(grid, 0.0) - value(grid))))
    if trace_residual > TRACE_TOLERANCE:
        raise ResolutionError(
            "Le prolongement ne restitue pas χ sur l'axe réel",
            {"residual": trace_residual},
        )

    decay = measure_dbar_decay(extension)
    if decay.slope < M_target - DECAY_MARGIN:
        raise ResolutionError(
            "Décroissance de ∂̄χ̃ insuffisante",
            {"slope": decay.slope, "M_target": M_target},
        )
    logger.info(
        "Prolongement presque analytique construit",
        modes=int(np.sum(keep)),
        slope=decay.slope,
        floor=decay.floor,
    )
    return replace(extension, measured_slope=decay.slope)


def naive_extension(chi: ChiSpec) -> AlmostAnalyticExtension:
    """χ̃(x+iy) = χ(x): ∂̄χ̃ = χ'(x)/2 ne décroît pas (contrôle négatif)."""
    value, derivative = chi_functions(chi)
    return AlmostAnalyticExtension(
        kind="naive",
        support=chi.support,
        Y=1.0,
        M_target=0,
        chi=value,
        chi_prime=derivative,
    )


def polynomial_extension(
    coefficients: Sequence[float], support: Tuple[float, float]
) -> AlmostAnalyticExtension:
    """Prolongement entier P(x+iy) d'un polynôme réel (∂̄ ≡ 0)."""
    poly = np.asarray(coefficients, dtype=float)

    def value(x: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), poly)

    return AlmostAnalyticExtension(
        kind="polynomial",
        support=support,
        Y=1.0,
        M_target=0,
        chi=value,
        polynomial=poly,
    )


def measure_dbar_decay(
    extension: AlmostAnalyticExtension,
    y_values: Optional[np.ndarray] = None,
    x_count: int = 512,
    floor: float = NUMERICAL_FLOOR,
) -> DbarDecay:
    """
    Pente de log sup_x |∂̄χ̃(x+iy)| contre log y sur y ∈ [1e-3, 1e-1]·s.

    s est la demi-longueur du support de χ: la fenêtre suit l'échelle de χ,
    si bien qu'une bosse étroite et une bosse large donnent la même pente.

    Seuls les points au-dessus du plancher numérique sont ajustés; s'il en
    reste moins de trois, la décroissance est plus rapide que mesurable et la
    pente vaut +inf.
    """
    if y_values is None:
        y_values = np.logspace(-3, -1, 9) * extension.scale
    y_values = np.asarray(y_values, dtype=float)
    lo, hi = extension.support
    pad = max(2 * extension.margin, 0.1 * (hi - lo))
    x = np.linspace(lo - pad, hi + pad, x_count)
    sup = np.max(np.abs(extension.dbar_grid(x, y_values)), axis=0)
    above = sup > floor
    if np.sum(above) < 3:
        return DbarDecay(y_values, sup, float("inf"), 0.0, True)
    try:
        fit = fit_rate(y_values[above], sup[above], floor=floor)
    except FitError:
        return DbarDecay(y_values, sup, float("inf"), 0.0, True)
    return DbarDecay(
        y=y_values,
        sup=sup,
        slope=fit.slope,
        stderr=fit.stderr,
        floor=bool(np.any(~above)),
    )
