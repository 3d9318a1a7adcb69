"""Service du calcul fonctionnel: Helffer-Sjöstrand, symboles de résolvante, parametrix."""

from dataclasses import dataclass
from math import ceil, pi
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from numpy.polynomial.legendre import leggauss
from scipy import linalg
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from app.config import settings
from app.core.exceptions import (
    CertificationError,
    NonHermitianError,
    QuadratureError,
    UnsupportedOrderError,
    ValidationError,
)
from app.models.extension import AlmostAnalyticExtension
from app.models.geometry import ModelGeometry, ModelId
from app.models.star_series import StarSeries
from app.models.symbol import OrderFunction, Symbol, SymbolLike, as_tree, unit_order_function
from app.models.symbol_expr import (
    Const,
    SymbolExpr,
    add,
    bump,
    conjugate,
    evaluate,
    mul,
    neg,
    recip,
)
from app.models.toeplitz import ToeplitzMatrix
from app.schemas.certificates import SymbolCertificate
from app.schemas.experiments import ChiSpec
from app.services.almost_analytic import chi_functions
from app.services.star_product import star_term
from app.services.symbol_classes import alpha_constants, certification_grid, stability_verdict

logger = structlog.get_logger()

HERMITIAN_TOLERANCE = 1e-8
BAND_SKIP = 1e-13
PRUNE_BUDGET = 1e-12
GL_RATIO = 3.7
RESOLUTION_SAFETY = 1e3
MIN_PANEL_NODES = 6
SCALAR_POINTS = 4000
SCALAR_ENTRIES = 1 << 22
RESOLVENT_ENTRIES = 1 << 21

MatrixLike = Union[ToeplitzMatrix, np.ndarray]


def _entries(matrix: MatrixLike) -> np.ndarray:
    return matrix.entries if isinstance(matrix, ToeplitzMatrix) else np.asarray(matrix)


def _hermitian_part(matrix: MatrixLike) -> np.ndarray:
    entries = _entries(matrix)
    defect = float(np.max(np.abs(entries - entries.conj().T), initial=0.0))
    if defect > HERMITIAN_TOLERANCE:
        raise NonHermitianError(defect, HERMITIAN_TOLERANCE)
    return 0.5 * (entries + entries.conj().T)


@dataclass(frozen=True)
class HSNodes:
    """Noeuds du demi-plan supérieur et poids a_n = w_n ∂̄χ̃(z_n)."""

    z: np.ndarray
    amplitudes: np.ndarray
    pruned_bound: float
    floor_bound: float
    floor: float
    refinement: int = 0


@dataclass(frozen=True)
class HSResult:
    """χ(A) par Helffer-Sjöstrand et son budget d'erreur."""

    matrix: np.ndarray
    budget: float
    quadrature_error: float
    floor_bound: float
    pruned_bound: float
    nodes: int
    floor: float
    interval: Tuple[float, float]


def gershgorin_interval(entries: np.ndarray) -> Tuple[float, float]:
    centers = np.real(np.diag(entries))
    radii = np.sum(np.abs(entries), axis=1) - np.abs(np.diag(entries))
    return float(np.min(centers - radii)), float(np.max(centers + radii))


def _band_order(band_bound: float, max_nodes: int) -> int:
    """Noeuds par direction: convergence géométrique de rapport GL_RATIO sur une bande dyadique."""
    needed = np.log(RESOLUTION_SAFETY * band_bound / PRUNE_BUDGET) / (2 * np.log(GL_RATIO))
    return int(np.clip(np.ceil(needed), MIN_PANEL_NODES, max_nodes))


def _x_edges(extension: AlmostAnalyticExtension, width: float) -> np.ndarray:
    """Bords des panneaux en x, alignés sur les couches de ψ, de largeur <= width."""
    breaks = extension.breakpoints
    edges = []
    for left, right in zip(breaks[:-1], breaks[1:]):
        count = max(1, int(ceil((right - left) / width)))
        edges.append(np.linspace(left, right, count + 1)[:-1])
    edges.append(np.array([breaks[-1]]))
    return np.concatenate(edges)


def _gauss_panels(edges: np.ndarray, t: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * t[None, :]).ravel(), (half[:, None] * w[None, :]).ravel()


def hs_nodes(
    extension: AlmostAnalyticExtension,
    floor: float,
    panel_nodes: Optional[int] = None,
    refinement: int = 0,
) -> HSNodes:
    """
    Noeuds de Gauss-Legendre sur la bande floor <= Im z <= Y.

    Bandes dyadiques [b, 2b] de Y jusqu'au plancher. Dans une bande, les
    panneaux en x ont une largeur b·2^{-refinement} et s'alignent sur les
    couches de ψ; le nombre de noeuds par direction suit la taille de la bande.
    La descente s'arrête à la première bande négligeable, le reste étant borné
    comme le plancher. Les plus petits noeuds sont écartés tant que leur
    contribution cumulée (2/π)Σ|a|/y reste sous PRUNE_BUDGET.
    """
    max_nodes = (panel_nodes or settings.hs_panel_nodes) + 4 * refinement
    start, _, _, stop = extension.breakpoints

    z_list: List[np.ndarray] = []
    a_list: List[np.ndarray] = []
    pruned = 0.0
    tail = floor
    top = extension.Y
    while top > floor:
        bottom = max(0.5 * top, floor)
        height = top - bottom
        coarse_x = np.linspace(start, stop, max(2048, int(ceil(8 * (stop - start) / bottom))))
        coarse = float(np.max(np.abs(extension.dbar_grid(coarse_x, np.array([bottom, 0.5 * (bottom + top), top])))))
        band_bound = 2 / pi * (stop - start) * height * coarse / bottom
        if band_bound < BAND_SKIP:
            tail = top
            break

        t, w = leggauss(_band_order(band_bound, max_nodes))
        xs, wx = _gauss_panels(_x_edges(extension, bottom * 2.0 ** -refinement), t, w)
        ys = bottom + 0.5 * height * (t + 1)
        wy = 0.5 * height * w
        amplitudes = ((wx[:, None] * wy[None, :]) * extension.dbar_grid(xs, ys)).ravel()
        z = (xs[:, None] + 1j * ys[None, :]).ravel()

        weight = 2 / pi * np.abs(amplitudes) / z.imag
        order = np.argsort(weight)
        drop = order[np.cumsum(weight[order]) <= PRUNE_BUDGET]
        keep = np.ones(z.size, dtype=bool)
        keep[drop] = False
        pruned += float(np.sum(weight[drop]))
        z_list.append(z[keep])
        a_list.append(amplitudes[keep])
        top = bottom

    coarse_x = np.linspace(start, stop, max(2048, int(ceil(8 * (stop - start) / tail))))
    low = float(np.max(np.abs(extension.dbar_grid(coarse_x, np.array([tail])))))
    M = max(extension.M_target, 1)
    tail_bound = 2 / pi * (stop - start) * low / M
    z = np.concatenate(z_list) if z_list else np.zeros(0, dtype=complex)
    amplitudes = np.concatenate(a_list) if a_list else np.zeros(0, dtype=complex)
    return HSNodes(z, amplitudes, pruned, tail_bound, floor, refinement)


def scalar_hs_error(
    nodes: HSNodes, chi: Callable[[np.ndarray], np.ndarray], interval: Tuple[float, float]
) -> float:
    """max_λ |q(λ) - χ(λ)| avec q(λ) = -(2/π)Σ Re(a_n/(z_n - λ))."""
    lam = np.linspace(interval[0], interval[1], SCALAR_POINTS)
    q = np.zeros(lam.size)
    x, y = nodes.z.real, nodes.z.imag
    a_re, a_im = nodes.amplitudes.real, nodes.amplitudes.imag
    step = max(1, SCALAR_ENTRIES // max(1, nodes.z.size))
    for start in range(0, lam.size, step):
        part = slice(start, start + step)
        dx = x[None, :] - lam[part, None]
        # Re(a/(dx + iy)) = (Re a·dx + Im a·y) / (dx² + y²)
        q[part] = -2 / pi * np.sum((a_re * dx + a_im * y) / (dx ** 2 + y ** 2), axis=1)
    return float(np.max(np.abs(q - chi(lam))))


def certified_hs_nodes(
    extension: AlmostAnalyticExtension,
    floor: float,
    interval: Tuple[float, float],
    target: Optional[float] = None,
) -> Tuple[HSNodes, float]:
    """
    Raffine la quadrature HS (tenacity) jusqu'à max_λ |q - χ| <= target sur l'intervalle.

    Returns:
        Noeuds et erreur scalaire mesurée; au-delà des raffinements permis, les
        derniers noeuds sont rendus et l'erreur entre dans le budget
    """
    target = target or settings.hs_target
    retrying = Retrying(
        stop=stop_after_attempt(settings.hs_max_refinements + 1),
        retry=retry_if_exception_type(QuadratureError),
        reraise=True,
    )
    nodes: Optional[HSNodes] = None
    error = float("inf")
    try:
        for attempt in retrying:
            with attempt:
                level = attempt.retry_state.attempt_number - 1
                nodes = hs_nodes(extension, floor, refinement=level)
                error = scalar_hs_error(nodes, extension.chi, interval)
                if error > target:
                    logger.debug("Quadrature HS non convergée", level=level, error=error, nodes=int(nodes.z.size))
                    raise QuadratureError(
                        "Quadrature HS non convergée", {"error": error, "target": target, "level": level}
                    )
    except QuadratureError:
        logger.warning("Précision HS visée non atteinte", error=error, target=target)
    return nodes, error


def resolvent_sum(T: np.ndarray, z: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    """
    Σ_n a_n (z_n - T)^{-1} pour T tridiagonale hermitienne.

    Élimination de Thomas par lots de noeuds, second membre identité. Les
    pivots vérifient Im m_k >= Im z_n > 0: aucune division par zéro.
    """
    D = T.shape[0]
    diagonal = np.real(np.diag(T))
    upper = np.diag(T, 1)
    lower = np.diag(T, -1)
    total = np.zeros((D, D), dtype=complex)
    step = max(1, RESOLVENT_ENTRIES // (D * D))
    for start in range(0, z.size, step):
        zs = z[start:start + step]
        n = zs.size
        ratios = np.zeros((n, max(D - 1, 1)), dtype=complex)
        rows = np.zeros((n, D, D), dtype=complex)
        pivot = zs - diagonal[0]
        rows[:, 0, 0] = 1.0 / pivot
        if D > 1:
            ratios[:, 0] = -upper[0] / pivot
        for k in range(1, D):
            pivot = zs - diagonal[k] + lower[k - 1] * ratios[:, k - 1]
            rows[:, k, :k] = lower[k - 1] * rows[:, k - 1, :k]
            rows[:, k, k] = 1.0
            rows[:, k, : k + 1] /= pivot[:, None]
            if k < D - 1:
                ratios[:, k] = -upper[k] / pivot
        for k in range(D - 2, -1, -1):
            rows[:, k, :] -= ratios[:, k, None] * rows[:, k + 1, :]
        total += np.einsum("n,nij->ij", amplitudes[start:start + step], rows)
    return total


def hs_function_of_operator(
    A: MatrixLike,
    extension: AlmostAnalyticExtension,
    N: Optional[float] = None,
    floor: Optional[float] = None,
    tolerance: Optional[float] = None,
) -> HSResult:
    """
    χ(A) = -(1/π) ∫ ∂̄χ̃(z) (z - A)^{-1} dm(z), bande |Im z| < plancher exclue.

    A est réduite une fois sous forme tridiagonale (Hessenberg hermitienne);
    les résolvantes aux noeuds sont sommées par élimination de Thomas. La
    moitié inférieure du plan est l'adjointe de la moitié supérieure. La
    quadrature est raffinée jusqu'à ce que l'erreur scalaire sur l'intervalle
    de Gershgorin atteigne hs_target.

    Args:
        A: Matrice hermitienne
        extension: Prolongement presque analytique de χ
        N: Niveau (plancher par défaut N^{-hs_floor_power})
        floor: Plancher explicite |Im z| >= floor
        tolerance: Budget maximal accepté

    Returns:
        Matrice χ(A) et budget d'erreur
    """
    hermitian = _hermitian_part(A)
    if floor is None:
        if N is None:
            raise ValidationError("Plancher ou niveau N requis")
        floor = float(N) ** (-settings.hs_floor_power)
    interval = gershgorin_interval(hermitian)
    nodes, quadrature_error = certified_hs_nodes(extension, floor, interval)

    T, Q = linalg.hessenberg(hermitian, calc_q=True)
    D = T.shape[0]
    half = Q @ resolvent_sum(T, nodes.z, nodes.amplitudes) @ Q.conj().T
    result = -(half + half.conj().T) / pi

    budget = quadrature_error + nodes.floor_bound + nodes.pruned_bound
    logger.info(
        "Calcul fonctionnel HS",
        dimension=D,
        nodes=int(nodes.z.size),
        refinement=nodes.refinement,
        budget=budget,
        floor=floor,
    )
    if tolerance is not None and budget > tolerance:
        raise QuadratureError(
            "Budget d'erreur HS au-delà de la tolérance",
            {"budget": budget, "tolerance": tolerance},
        )
    return HSResult(
        matrix=result,
        budget=budget,
        quadrature_error=quadrature_error,
        floor_bound=nodes.floor_bound,
        pruned_bound=nodes.pruned_bound,
        nodes=int(nodes.z.size),
        floor=floor,
        interval=interval,
    )


def spectral_function_oracle(
    A: MatrixLike, chi: Union[ChiSpec, Callable[[np.ndarray], np.ndarray]]
) -> np.ndarray:
    """χ(A) par diagonalisation (oracle indépendant)."""
    hermitian = _hermitian_part(A)
    fn = chi_functions(chi)[0] if isinstance(chi, ChiSpec) else chi
    eigenvalues, eigenvectors = linalg.eigh(hermitian)
    return (eigenvectors * fn(eigenvalues)[None, :]) @ eigenvectors.conj().T


def _grid_values(tree: SymbolExpr, grid: np.ndarray, N_list: Sequence[float]) -> List[np.ndarray]:
    return [evaluate(tree, grid, N=N) for N in N_list]


def certify_functional_calculus(
    f: SymbolLike,
    m: Optional[OrderFunction] = None,
    grid: Optional[np.ndarray] = None,
    N_list: Optional[Sequence[float]] = None,
) -> float:
    """
    Certifie f réel, f >= 0 et |f| >= m/C - C sur la grille.

    Returns:
        La plus petite constante C >= 1 valable sur la grille

    Raises:
        CertificationError: en nommant l'hypothèse violée
    """
    m = m or unit_order_function()
    grid = certification_grid() if grid is None else grid
    N_list = list(N_list or settings.default_n_list)
    tree = as_tree(f)
    C = 1.0
    for N, values in zip(N_list, _grid_values(tree, grid, N_list)):
        scale = max(1.0, float(np.max(np.abs(values))))
        if np.max(np.abs(values.imag)) > 1e-10 * scale:
            raise CertificationError("f réel", {"N": N, "max_imag": float(np.max(np.abs(values.imag)))})
        if np.min(values.real) < -1e-12 * scale:
            raise CertificationError("f >= 0", {"N": N, "min": float(np.min(values.real))})
        weight = m.values(grid, N)
        magnitude = np.abs(values.real)
        needed = 0.5 * (-magnitude + np.sqrt(magnitude ** 2 + 4 * weight))
        C = max(C, float(np.max(needed)))
    logger.debug("Hypothèses du calcul fonctionnel certifiées", C=C)
    return C


def functional_calculus_symbol(
    f: SymbolLike,
    chi: ChiSpec,
    m: Optional[OrderFunction] = None,
    grid: Optional[np.ndarray] = None,
    N_list: Optional[Sequence[float]] = None,
) -> SymbolExpr:
    """Symbole principal χ∘f de χ(T_f), après certification des hypothèses."""
    certify_functional_calculus(f, m, grid, N_list)
    if chi.shape != "bump":
        raise ValidationError(
            "Seule la forme bump de χ se compose symboliquement", {"shape": chi.shape}
        )
    tree = as_tree(f)
    return bump(chi.center, chi.width, 0, tree, conjugate(tree))


def resolvent_symbol(
    f: SymbolLike,
    z: complex,
    m: Optional[OrderFunction] = None,
    grid: Optional[np.ndarray] = None,
    N_list: Optional[Sequence[float]] = None,
) -> SymbolExpr:
    """s₁ = (z - f)^{-1}; refuse un pôle sur la grille."""
    z = complex(z)
    tree = as_tree(f)
    if z.imag == 0:
        certify_parametrix_regime(f, z, m, grid, N_list)
    return recip(add(Const(z), neg(tree)))


def check_resolvent_bounds(
    f: SymbolLike,
    z: complex,
    m: OrderFunction,
    N_list: Optional[Sequence[float]] = None,
    max_alpha: int = 3,
    grid: Optional[np.ndarray] = None,
    delta: Optional[float] = None,
) -> SymbolCertificate:
    """Certifie |∂^α s₁| <= C |Im z|^{-1-|α|} N^{δ|α|} m^{-1} sur la grille."""
    z = complex(z)
    N_list = list(N_list or settings.default_n_list)
    delta = delta if delta is not None else (f.delta if isinstance(f, Symbol) else m.delta)
    s1 = resolvent_symbol(f, z, m, grid, N_list)
    points = certification_grid() if grid is None else grid
    distance = abs(z.imag) if z.imag != 0 else 1.0

    def weight(x: np.ndarray, N: float, order: int) -> np.ndarray:
        return distance ** (1 + order) * m.values(x, N) / N ** (delta * order)

    table = alpha_constants(s1, weight, N_list, max_alpha, lambda N: points)
    certificate = stability_verdict("resolvent_bounds", delta, N_list, table)
    logger.info("Bornes de résolvante vérifiées", certified=certificate.certified, z=str(z))
    return certificate


def certify_parametrix_regime(
    f: SymbolLike,
    z: complex,
    m: Optional[OrderFunction] = None,
    grid: Optional[np.ndarray] = None,
    N_list: Optional[Sequence[float]] = None,
) -> float:
    """min |f - z|/m > 0 sur la grille; renvoie ce minimum."""
    m = m or unit_order_function()
    grid = certification_grid() if grid is None else grid
    N_list = list(N_list or settings.default_n_list)
    tree = as_tree(f)
    lowest = float("inf")
    for N, values in zip(N_list, _grid_values(tree, grid, N_list)):
        ratio = np.abs(values - z) / m.values(grid, N)
        lowest = min(lowest, float(np.min(ratio)))
    if not lowest > 1e-12:
        raise CertificationError("|f - z| >= m/C", {"min_ratio": lowest, "z": str(z)})
    return lowest


def parametrix_symbol(
    f: SymbolLike,
    z: complex,
    J: int,
    geometry: ModelGeometry,
    side: str = "right",
    m: Optional[OrderFunction] = None,
    grid: Optional[np.ndarray] = None,
) -> StarSeries:
    """
    Série g_0..g_J d'un inverse approché de T_{f-z}.

    g_0 = (f-z)^{-1}; à droite g_j = -g_0 Σ_{a=1}^{j} h_a(f-z, g_{j-a}),
    à gauche h_a(g_{j-a}, f-z).

    Raises:
        CertificationError: |f - z| non minoré sur la grille
        UnsupportedOrderError: J > 1 sur CP¹
    """
    if side not in ("right", "left"):
        raise ValidationError("side doit valoir right ou left", {"side": side})
    if geometry.model_id is not ModelId.BARGMANN and J > 1:
        raise UnsupportedOrderError(geometry.short_id, J, "parametrix_symbol")
    certify_parametrix_regime(f, z, m, grid)
    shifted = add(as_tree(f), Const(-complex(z)))
    s1 = recip(shifted)
    terms: List[SymbolExpr] = [s1]
    for j in range(1, J + 1):
        pieces = []
        for a in range(1, j + 1):
            if side == "right":
                pieces.append(star_term(shifted, terms[j - a], geometry, a))
            else:
                pieces.append(star_term(terms[j - a], shifted, geometry, a))
        terms.append(neg(mul(s1, add(*pieces))))
    delta = f.delta if isinstance(f, Symbol) else 0.0
    logger.debug("Parametrix construite", J=J, side=side, model=geometry.short_id)
    return StarSeries(terms=tuple(terms), delta=delta, label=side)
