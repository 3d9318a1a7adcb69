"""Prolongements presque analytiques de fonctions réelles à support compact."""

from dataclasses import dataclass, field
from typing import Callable, Iterator, Literal, Optional, Tuple

import numpy as np

ExtensionKind = Literal["spectral", "naive", "polynomial"]
CHUNK_ENTRIES = 1 << 22
LIVE_TOLERANCE = 1e-18


def smooth_step(t: np.ndarray) -> np.ndarray:
    """S(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}), 0 pour t <= 0 et 1 pour t >= 1."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    out[inside] = a / (a + b)
    return out


def smooth_step_derivative(t: np.ndarray) -> np.ndarray:
    """S' = S(1-S)(1/t² + 1/(1-t)²)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    s = smooth_step(ti)
    out[inside] = s * (1 - s) * (1.0 / ti ** 2 + 1.0 / (1.0 - ti) ** 2)
    return out


def polynomial_step(t: np.ndarray) -> np.ndarray:
    """P(t) = t³(10 - 15t + 6t²) sur [0, 1], prolongé par 0 et 1 (classe C²)."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def polynomial_step_derivative(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 30.0 * t ** 2 * (1.0 - t) ** 2, 0.0)


def _flatness(t: np.ndarray) -> np.ndarray:
    """e^{-1/t²}, nul en t = 0."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t == 0.0, 0.0, np.exp(-1.0 / t ** 2))


def frequency_cutoff(t: np.ndarray) -> np.ndarray:
    """σ(t) = exp(-t² e^{-1/t²}): plate en 0, décroissance gaussienne à l'infini."""
    t = np.asarray(t, dtype=float)
    return np.exp(-(t ** 2) * _flatness(t))


def cutoff_slope(t: np.ndarray) -> np.ndarray:
    """σ'/σ = -(2t + 2/t) e^{-1/t²}."""
    t = np.asarray(t, dtype=float)
    flat = _flatness(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(flat == 0.0, 0.0, -(2.0 * t + 2.0 / t) * flat)


def damped_cutoff(t: np.ndarray) -> np.ndarray:
    """e^{-t} σ(t), calculé dans l'exposant (borné pour t < 0)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-t - t ** 2 * _flatness(t))


def band_cutoff(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """ρ(s) et ρ'(s): 1 pour s <= 1/2, 0 pour s >= 1, polynomial entre les deux."""
    s = np.asarray(s, dtype=float)
    u = 2.0 * s - 1.0
    return 1.0 - polynomial_step(u), -2.0 * polynomial_step_derivative(u)


@dataclass(frozen=True)
class AlmostAnalyticExtension:
    """
    Prolongement χ̃ de χ à la bande |Im z| <= Y.

    spectral: χ̃(x+iy) = ψ(x)ρ(y/Y) Σ_k c_k e^{iξ_k(x+iy)} σ(ξ_k y), où ψ vaut 1
    au voisinage de supp χ, σ coupe les fréquences |ξ| >> 1/y et ρ coupe la bande.
    ψ et ρ sont polynomiaux par morceaux sur [lo-2η, lo-η], [hi+η, hi+2η] et
    [Y/2, Y]; σ n'est singulière qu'en 0, donc chaque bande dyadique en y est
    analytique.
    naive: χ̃(x+iy) = χ(x) (contrôle négatif). polynomial: P(x+iy), ∂̄ ≡ 0.
    """

    kind: ExtensionKind
    support: Tuple[float, float]
    Y: float
    M_target: int
    chi: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    chi_prime: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False, compare=False
    )
    margin: float = 0.0
    frequencies: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False, compare=False)
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0, complex), repr=False, compare=False)
    polynomial: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    measured_slope: Optional[float] = None

    @property
    def domain(self) -> Tuple[float, float]:
        lo, hi = self.support
        return (lo - 4 * self.margin, hi + 4 * self.margin)

    @property
    def scale(self) -> float:
        """Demi-longueur du support: échelle naturelle en x et en y."""
        lo, hi = self.support
        return 0.5 * (hi - lo)

    @property
    def breakpoints(self) -> Tuple[float, float, float, float]:
        """Bords des couches de ψ: lo-2η, lo-η, hi+η, hi+2η."""
        lo, hi = self.support
        eta = self.margin
        return (lo - 2 * eta, lo - eta, hi + eta, hi + 2 * eta)

    def _cutoff(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """ψ et ψ': 1 sur [lo-η, hi+η], support [lo-2η, hi+2η]."""
        start, _, _, stop = self.breakpoints
        eta = self.margin
        left = (x - start) / eta
        right = (stop - x) / eta
        s_left, s_right = polynomial_step(left), polynomial_step(right)
        value = s_left * s_right
        slope = (
            polynomial_step_derivative(left) * s_right - s_left * polynomial_step_derivative(right)
        ) / eta
        return value, slope

    def _chunks(self, size: int, width: int) -> Iterator[slice]:
        step = max(1, CHUNK_ENTRIES // max(1, width))
        for start in range(0, size, step):
            yield slice(start, min(start + step, size))

    def _spectral(self, x: np.ndarray, y: np.ndarray, with_dbar: bool):
        total = np.zeros(x.shape, dtype=complex)
        derivative = np.zeros(x.shape, dtype=complex)
        xi = self.frequencies
        for rows in self._chunks(x.size, xi.size):
            t = xi[None, :] * y[rows, None]
            waves = self.coefficients[None, :] * np.exp(1j * xi[None, :] * x[rows, None]) * damped_cutoff(t)
            total[rows] = np.sum(waves, axis=1)
            if with_dbar:
                derivative[rows] = np.sum(waves * 0.5j * xi[None, :] * cutoff_slope(t), axis=1)
        return total, derivative

    def values(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        shape = x.shape
        x, y = x.ravel(), y.ravel()
        if self.kind == "naive":
            return np.asarray(self.chi(x), dtype=complex).reshape(shape)
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(x + 1j * y, self.polynomial).reshape(shape)
        psi, _ = self._cutoff(x)
        rho, _ = band_cutoff(y / self.Y)
        total, _ = self._spectral(x, y, with_dbar=False)
        return (psi * rho * total).reshape(shape)

    def dbar(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """∂̄χ̃ = ½(∂_x + i∂_y)χ̃."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        shape = x.shape
        x, y = x.ravel(), y.ravel()
        if self.kind == "naive":
            return (0.5 * np.asarray(self.chi_prime(x), dtype=complex)).reshape(shape)
        if self.kind == "polynomial":
            return np.zeros(shape, dtype=complex)
        psi, psi_prime = self._cutoff(x)
        rho, rho_prime = band_cutoff(y / self.Y)
        total, derivative = self._spectral(x, y, with_dbar=True)
        result = psi * rho * derivative + total * (
            0.5 * psi_prime * rho + 0.5j * psi * rho_prime / self.Y
        )
        return result.reshape(shape)

    def dbar_grid(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """
        ∂̄χ̃ sur la grille tensorielle x × y, de forme (x.size, y.size).

        Les sommes sur les modes deviennent des produits matriciels; les modes
        amortis sur toute la grille sont écartés.
        """
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if self.kind != "spectral":
            return self.dbar(x[:, None], y[None, :])
        xi = self.frequencies
        t = xi[:, None] * y[None, :]
        damped = self.coefficients[:, None] * damped_cutoff(t)
        slope = damped * 0.5j * xi[:, None] * cutoff_slope(t)
        scale = float(np.max(np.abs(self.coefficients), initial=0.0))
        live = np.max(np.abs(damped), axis=1, initial=0.0) > LIVE_TOLERANCE * scale
        xi, damped, slope = xi[live], damped[live], slope[live]

        total = np.empty((x.size, y.size), dtype=complex)
        derivative = np.empty((x.size, y.size), dtype=complex)
        for rows in self._chunks(x.size, xi.size):
            waves = np.exp(1j * x[rows, None] * xi[None, :])
            total[rows] = waves @ damped
            derivative[rows] = waves @ slope

        psi, psi_prime = self._cutoff(x)
        rho, rho_prime = band_cutoff(y / self.Y)
        return psi[:, None] * rho[None, :] * derivative + total * (
            0.5 * psi_prime[:, None] * rho[None, :] + 0.5j * psi[:, None] * rho_prime[None, :] / self.Y
        )
