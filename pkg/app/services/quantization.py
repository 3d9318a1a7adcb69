"""Service de quantification: bases, quadratures et noyaux de Bergman."""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.special import gammaln
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from app.config import settings
from app.core.exceptions import DimensionCapError, QuadratureError, ValidationError
from app.models.geometry import ModelGeometry, ModelId
from app.models.quantum import QuadratureRule, QuantumBasis
from app.schemas.certificates import DecayReport, QuadratureReport, ReproducingReport

logger = structlog.get_logger()


def log_squared_norms(geometry: ModelGeometry, N: int, dimension: int) -> np.ndarray:
    """log ‖z^k‖²: Gamma (Bargmann) ou Beta (CP¹)."""
    k = np.arange(dimension, dtype=float)
    if geometry.model_id is ModelId.BARGMANN:
        return math.log(2 * math.pi) + gammaln(k + 1) - (k + 1) * math.log(N)
    return math.log(2 * math.pi) + gammaln(k + 1) + gammaln(N - k + 1) - gammaln(N + 2)


def total_mass(geometry: ModelGeometry, N: int) -> float:
    """∫ e^{-Nφ} μ dm: 2π/N (Bargmann), 2π/(N+1) (CP¹)."""
    if geometry.model_id is ModelId.BARGMANN:
        return 2 * math.pi / N
    return 2 * math.pi / (N + 1)


def build_basis(geometry: ModelGeometry, N: int, support_radius: float = 1.5) -> QuantumBasis:
    """
    Construit la base monomiale du niveau N.

    Args:
        geometry: Modèle
        N: Niveau (N >= 1)
        support_radius: Rayon couvrant les supports des symboles (Bargmann)

    Returns:
        Base avec D = ⌈2N R²⌉ + 16 (Bargmann) ou D = N + 1 (CP¹)
    """
    if N < 1:
        raise ValidationError("N doit être >= 1", {"N": N})
    if geometry.model_id is ModelId.BARGMANN:
        dimension = math.ceil(2 * N * support_radius ** 2) + settings.bargmann_padding
    else:
        dimension = N + 1
    if dimension > settings.matrix_cap:
        raise DimensionCapError(dimension, settings.matrix_cap)

    basis = QuantumBasis(
        geometry=geometry,
        N=N,
        dimension=dimension,
        log_squared_norms=log_squared_norms(geometry, N, dimension),
        support_radius=support_radius,
    )
    logger.debug("Base construite", model=geometry.short_id, N=N, dimension=dimension)
    return basis


def _radial_rule(
    geometry: ModelGeometry, N: int, dimension: int, panel_nodes: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Noeuds et log-poids radiaux: ∫_0^∞ F(r) e^{-Nφ} μ r dr ≈ Σ W_i F(r_i)."""
    t, w = leggauss(panel_nodes)
    if geometry.model_id is ModelId.BARGMANN:
        # u = √N r, panneaux unité jusqu'au-delà de la queue de Poisson du degré D
        tail = dimension + 16
        u_max = math.sqrt(tail + 14 * math.sqrt(tail)) + 2
        edges = np.arange(0, math.ceil(u_max) + 1, dtype=float)
        u = (0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 * t[None, :]).ravel()
        gl = np.tile(0.5 * w, edges.size - 1)
        radii = u / math.sqrt(N)
        log_w = np.log(gl) - 0.5 * math.log(N) - u ** 2 + math.log(2) + np.log(radii)
        return radii, log_w

    # r = tan ϑ, panneaux de largeur ~ 1/√(N+1)
    panels = max(4, math.ceil(0.5 * math.pi * math.sqrt(N + 1)))
    edges = np.linspace(0.0, 0.5 * math.pi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    theta = (0.5 * (edges[:-1, None] + edges[1:, None]) + half[:, None] * t[None, :]).ravel()
    gl = (half[:, None] * w[None, :]).ravel()
    radii = np.tan(theta)
    log_w = np.log(gl) + math.log(2) + np.log(radii) - (N + 1) * np.log1p(radii ** 2)
    return radii, log_w


def _basis_matrix(radii: np.ndarray, log_w: np.ndarray, log_norms: np.ndarray) -> np.ndarray:
    k = np.arange(log_norms.size)
    log_phi = (
        0.5 * (math.log(2 * math.pi) + log_w[:, None])
        + k[None, :] * np.log(radii)[:, None]
        - 0.5 * log_norms[None, :]
    )
    return np.exp(log_phi)


def build_quadrature(
    basis: QuantumBasis,
    radial_nodes: Optional[int] = None,
    angular_nodes: Optional[int] = None,
    target: Optional[float] = None,
) -> QuadratureRule:
    """
    Construit et certifie la règle tensorielle pour la base.

    Les noeuds radiaux par panneau doublent (tenacity) jusqu'à ce que les normes
    ‖z^k‖² soient reproduites à la précision visée.

    Args:
        basis: Base active
        radial_nodes: Noeuds de Gauss-Legendre par panneau radial
        angular_nodes: Nombre d'angles uniformes (défaut 2D + 4)
        target: Précision relative visée

    Returns:
        Règle certifiée
    """
    geometry, N, D = basis.geometry, basis.N, basis.dimension
    panel_nodes = radial_nodes or settings.quadrature_panel_nodes
    target = target or settings.quadrature_target
    angular = angular_nodes or 2 * D + 4
    if angular < D + 1:
        raise QuadratureError(
            "Repliement angulaire: orthogonalité des monômes rompue",
            {"angular_nodes": angular, "required": D + 1, "dimension": D},
        )

    def attempt_rule(level: int) -> QuadratureRule:
        radii, log_w = _radial_rule(geometry, N, D, panel_nodes * 2 ** level)
        phi = _basis_matrix(radii, log_w, basis.log_squared_norms)
        residuals = np.abs(np.sum(phi ** 2, axis=0) - 1.0)
        worst = int(np.argmax(residuals))
        if residuals[worst] > target:
            logger.debug(
                "Quadrature non convergée",
                level=level,
                residual=float(residuals[worst]),
                worst_index=worst,
            )
            raise QuadratureError(
                "Reproduction des normes non convergée",
                {"worst_index": worst, "residual": float(residuals[worst]), "level": level},
            )
        return QuadratureRule(
            geometry=geometry,
            N=N,
            dimension=D,
            radii=radii,
            log_weights=log_w,
            angular_count=angular,
            phi=phi,
            target=target,
            norm_residual=float(residuals[worst]),
            refinements=level,
        )

    retrying = Retrying(
        stop=stop_after_attempt(settings.quadrature_max_refinements + 1),
        retry=retry_if_exception_type(QuadratureError),
        reraise=True,
    )
    try:
        for attempt in retrying:
            with attempt:
                rule = attempt_rule(attempt.retry_state.attempt_number - 1)
    except RetryError as exc:
        raise QuadratureError("Quadrature non convergée", {"cause": str(exc)}) from exc

    logger.info(
        "Quadrature certifiée",
        model=geometry.short_id,
        N=N,
        dimension=D,
        radial=rule.radial_count,
        angular=angular,
        residual=rule.norm_residual,
    )
    return rule


def quadrature_report(rule: QuadratureRule) -> QuadratureReport:
    residuals = np.abs(np.sum(rule.phi ** 2, axis=0) - 1.0)
    mass = float(np.sum(2 * np.pi * np.exp(rule.log_weights)))
    exact = total_mass(rule.geometry, rule.N)
    return QuadratureReport(
        model=rule.geometry.short_id,
        N=rule.N,
        dimension=rule.dimension,
        radial_nodes=rule.radial_count,
        angular_nodes=rule.angular_count,
        refinements=rule.refinements,
        norm_residual=float(residuals.max()),
        worst_index=int(residuals.argmax()),
        mass_residual=abs(mass - exact) / exact,
        target=rule.target,
    )


def volume_check(rule: QuadratureRule) -> float:
    """∫ μ dm par quadrature (2π sur CP¹)."""
    ones = np.ones((rule.radial_count, rule.angular_count))
    return rule.integrate(ones, weighted=False).real


def _tail_warning(basis: QuantumBasis, w: complex) -> None:
    if basis.geometry.model_id is ModelId.BARGMANN and abs(basis.N * w) >= basis.dimension:
        logger.warning(
            "Queue de troncature non négligeable",
            N=basis.N,
            dimension=basis.dimension,
            product=abs(basis.N * w),
        )


def closed_form_kernel(geometry: ModelGeometry, N: int, x, y_conj):
    w = np.asarray(x) * np.asarray(y_conj)
    if geometry.model_id is ModelId.BARGMANN:
        return N / (2 * np.pi) * np.exp(N * w)
    return (N + 1) / (2 * np.pi) * (1 + w) ** N


def bergman_kernel_at(
    basis: QuantumBasis, x: complex, y_conj: complex, method: str = "basis"
) -> complex:
    """
    Noyau de Bergman Π_N(x, ȳ).

    Args:
        basis: Base du niveau N
        x: Point (holomorphe)
        y_conj: Conjugué du second point
        method: "basis" (somme Σ x^k ȳ^k/‖z^k‖²) ou "closed" (formule fermée)

    Returns:
        Valeur complexe du noyau
    """
    w = complex(x) * complex(y_conj)
    _tail_warning(basis, w)
    if method == "closed":
        return complex(closed_form_kernel(basis.geometry, basis.N, x, y_conj))
    if w == 0:
        return complex(math.exp(-basis.log_squared_norms[0]))
    k = np.arange(basis.dimension)
    terms = np.exp(k * np.log(w) - basis.log_squared_norms)
    return complex(np.sum(terms))


def weighted_bergman_kernel_at(
    basis: QuantumBasis, x: complex, y_conj: complex, method: str = "basis"
) -> complex:
    """e^{-(N/2)(φ(x)+φ(y))} Π_N(x, ȳ)."""
    weight = -0.5 * basis.N * (basis.geometry.potential(x) + basis.geometry.potential(y_conj))
    if method == "closed":
        geometry, N = basis.geometry, basis.N
        w = complex(x) * complex(y_conj)
        if geometry.model_id is ModelId.BARGMANN:
            return complex(N / (2 * np.pi) * np.exp(N * w + weight))
        return complex((N + 1) / (2 * np.pi) * np.exp(N * np.log(1 + w) + weight))
    left = basis.section_values(np.array([x]))[0]
    right = basis.section_values(np.array([y_conj]))[0]
    _tail_warning(basis, complex(x) * complex(y_conj))
    return complex(np.sum(left * right))


def gram_matrix(basis: QuantumBasis, rule: QuadratureRule) -> np.ndarray:
    """
    G_{jk} = ∫ s_j s̄_k e^{-Nφ} μ dm sur tous les noeuds de la règle, angles compris.

    Sur une ligne de rayon r, s_j s̄_k = ρ_j(r)ρ_k(r)e^{i(j-k)θ}: la somme sur
    les Θ angles est celle de `rule.angular_sums`, aucune orthogonalité
    n'est supposée.
    """
    radial = basis.section_values(rule.radii).real
    weights = rule.row_weights(weighted=False) * rule.angular_count
    gram = radial.T @ (weights[:, None] * radial)
    return gram * rule.angular_sums(basis.dimension)


def verify_reproducing(
    basis: QuantumBasis, rule: QuadratureRule, pairs: Sequence[Tuple[complex, complex]]
) -> ReproducingReport:
    """Vérifie ∫ Π(x,w̄)Π(w,ȳ) e^{-Nφ(w)} μ(w) dm(w) = Π(x,ȳ) et Gram = I."""
    if not rule.certified:
        raise QuadratureError("Règle non certifiée pour cette base", {"N": basis.N})
    geometry, N = basis.geometry, basis.N
    amplitude = N / (2 * np.pi) if geometry.model_id is ModelId.BARGMANN else (N + 1) / (2 * np.pi)
    worst = 0.0
    for x, y in pairs:
        accumulated = 0j
        for rows, nodes in rule.row_chunks():
            # Π(x,w̄)Π(w,ȳ)·poids, assemblé en exposant pour éviter les débordements
            exponent = (
                N * geometry.extension(x, np.conj(nodes))
                + N * geometry.extension(nodes, np.conj(y))
                + rule.log_weights[rows, None]
            )
            accumulated += np.sum(np.exp(exponent)) * 2 * np.pi / rule.angular_count
        accumulated *= amplitude ** 2
        expected = complex(closed_form_kernel(geometry, N, x, np.conj(y)))
        worst = max(worst, abs(accumulated - expected) / abs(expected))

    gram = gram_matrix(basis, rule)
    gram_residual = float(np.max(np.abs(gram - np.eye(basis.dimension))))
    report = ReproducingReport(
        model=geometry.short_id,
        N=N,
        idempotence_residual=worst,
        gram_residual=gram_residual,
        pairs=len(pairs),
    )
    logger.info("Propriété reproduisante vérifiée", **report.model_dump())
    return report


def verify_offdiagonal_decay(
    basis: QuantumBasis, pairs: Sequence[Tuple[complex, complex]]
) -> DecayReport:
    """
    Ajuste la décroissance du noyau pondéré hors diagonale.

    Returns:
        Taux gaussien (pente contre N·d²) et constantes (C, c) de la borne
        |K| <= C·N·exp(-c√N d)
    """
    geometry, N = basis.geometry, basis.N
    distances = []
    magnitudes = []
    for x, y in pairs:
        value = abs(weighted_bergman_kernel_at(basis, x, np.conj(y), method="closed"))
        distances.append(float(geometry.distance(x, y)))
        magnitudes.append(value)
    d = np.asarray(distances)
    k = np.asarray(magnitudes)
    diagonal = abs(weighted_bergman_kernel_at(basis, 0, 0, method="closed"))

    off = d > 0
    if off.sum() < 3:
        raise ValidationError("au moins trois paires hors diagonale requises")
    gaussian = stats.linregress(N * d[off] ** 2, np.log(k[off] / diagonal)).slope
    c = -stats.linregress(math.sqrt(N) * d[off], np.log(k[off] / N)).slope
    c = max(c, 1e-3)
    C = float(np.max(k / N * np.exp(c * math.sqrt(N) * d)))
    bound_holds = bool(np.all(k <= C * N * np.exp(-c * math.sqrt(N) * d) * (1 + 1e-12)))
    report = DecayReport(
        model=geometry.short_id,
        N=N,
        gaussian_rate=float(gaussian),
        C=C,
        c=float(c),
        bound_holds=bound_holds,
        pairs=len(pairs),
    )
    logger.info("Décroissance hors diagonale ajustée", **report.model_dump())
    return report


def kernel_amplitude_identity(basis: QuantumBasis, pairs: Sequence[Tuple[complex, complex]]) -> float:
    """max |Π_N(x,ȳ)·(2π/N)·e^{-Nψ(x,ȳ)} - (N+1)/N| sur CP¹ (b₁ = 1, b_{≥2} = 0)."""
    if basis.geometry.model_id is not ModelId.PROJECTIVE_LINE:
        raise ValidationError("identité d'amplitude définie sur CP¹ uniquement")
    N = basis.N
    worst = 0.0
    for x, y in pairs:
        y_conj = np.conj(y)
        kernel = bergman_kernel_at(basis, x, y_conj)
        amplitude = kernel * (2 * np.pi / N) * np.exp(-N * basis.geometry.extension(x, y_conj))
        worst = max(worst, abs(amplitude - (N + 1) / N))
    return worst


def global_kernel_bound(
    basis: QuantumBasis, points: Sequence[complex], eps: float = 0.5
) -> float:
    """max du noyau pondéré sur les paires à distance >= ε."""
    geometry = basis.geometry
    pts = np.asarray(points, dtype=complex)
    worst = 0.0
    for i, x in enumerate(pts):
        far = geometry.distance(x, pts) >= eps
        for y in pts[far]:
            value = abs(weighted_bergman_kernel_at(basis, x, np.conj(y), method="closed"))
            worst = max(worst, value)
    return worst


def random_pairs(
    radius: float, count: int, seed: int = 0, max_gap: Optional[float] = None
) -> List[Tuple[complex, complex]]:
    rng = np.random.default_rng(seed)
    x = radius * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count))
    y = radius * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count))
    if max_gap is not None:
        gap = y - x
        scale = np.maximum(1.0, np.abs(gap) / max_gap)
        y = x + gap / scale
    return list(zip(x.tolist(), y.tolist()))
