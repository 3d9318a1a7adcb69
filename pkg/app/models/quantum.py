"""Bases de sections holomorphes et règles de quadrature."""

from dataclasses import dataclass, field
from typing import Iterator, Tuple

import numpy as np

from app.models.geometry import ModelGeometry

ROW_CHUNK_POINTS = 262144


@dataclass(frozen=True)
class QuantumBasis:
    """Base monomiale orthogonale z^k, k < D, au niveau N.

    Les normes ‖z^k‖² sont stockées en logarithme.
    """

    geometry: ModelGeometry
    N: int
    dimension: int
    log_squared_norms: np.ndarray = field(repr=False)
    support_radius: float = 0.0

    @property
    def squared_norms(self) -> np.ndarray:
        return np.exp(self.log_squared_norms)

    def section_values(self, w: np.ndarray) -> np.ndarray:
        """e^{-Nφ(w)/2} w^k / ‖z^k‖ pour chaque w (dernier axe: k)."""
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        k = np.arange(self.dimension)
        half_weight = -0.5 * self.N * self.geometry.potential(w)
        modulus = np.abs(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_modulus = np.log(modulus)
            log_abs = (
                k[None, :] * log_modulus[:, None]
                - 0.5 * self.log_squared_norms[None, :]
                + half_weight[:, None]
            )
        log_abs[:, 0] = -0.5 * self.log_squared_norms[0] + half_weight
        phase = np.exp(1j * k[None, :] * np.angle(w)[:, None])
        values = np.exp(log_abs) * phase
        values[modulus == 0, 1:] = 0.0
        return values


@dataclass(frozen=True)
class QuadratureRule:
    """Règle tensorielle: noeuds radiaux de Gauss substitués × angles uniformes.

    Le poids d'un noeud de la ligne i vaut 2π W_i / Θ, où W_i inclut e^{-Nφ}·μ·r.
    `phi[i, k] = sqrt(2π W_i) r_i^k / ‖z^k‖` est la matrice radiale de la base.
    """

    geometry: ModelGeometry
    N: int
    dimension: int
    radii: np.ndarray = field(repr=False)
    log_weights: np.ndarray = field(repr=False)
    angular_count: int
    phi: np.ndarray = field(repr=False)
    target: float
    norm_residual: float
    refinements: int = 0

    @property
    def radial_count(self) -> int:
        return int(self.radii.size)

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.angular_count) / self.angular_count

    @property
    def certified(self) -> bool:
        return self.norm_residual <= self.target

    def nodes(self, rows: slice = slice(None)) -> np.ndarray:
        return self.radii[rows, None] * np.exp(1j * self.angles)[None, :]

    def row_weights(self, weighted: bool = True) -> np.ndarray:
        log_w = self.log_weights
        if not weighted:
            log_w = log_w + self.N * self.geometry.potential(self.radii)
        return 2 * np.pi * np.exp(log_w) / self.angular_count

    def angular_sums(self, dimension: int) -> np.ndarray:
        """S[j, k] = (1/Θ)Σ_t e^{i(j-k)θ_t}: 1 si Θ divise j - k, 0 sinon (à l'arrondi près)."""
        shifts = np.arange(-(dimension - 1), dimension)
        sums = np.mean(np.exp(1j * np.outer(shifts, self.angles)), axis=1)
        k = np.arange(dimension)
        return sums[k[:, None] - k[None, :] + dimension - 1]

    def row_chunks(self) -> Iterator[Tuple[slice, np.ndarray]]:
        """Blocs de lignes radiales, pour évaluer les symboles sans saturer la mémoire."""
        step = max(1, ROW_CHUNK_POINTS // self.angular_count)
        for start in range(0, self.radial_count, step):
            rows = slice(start, min(start + step, self.radial_count))
            yield rows, self.nodes(rows)

    def integrate(self, values: np.ndarray, weighted: bool = True) -> complex:
        """∫ values · e^{-Nφ} μ dm (weighted) ou ∫ values · μ dm, values de forme (R, Θ)."""
        return complex(np.sum(self.row_weights(weighted)[:, None] * values))
