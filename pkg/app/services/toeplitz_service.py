"""Service d'assemblage et d'algèbre des matrices de Toeplitz."""

import math
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import structlog
from scipy import linalg

from app.config import settings
from app.core.exceptions import (
    DimensionMismatchError,
    QuadratureError,
    ValidationError,
)
from app.models.geometry import ModelId
from app.models.quantum import QuadratureRule, QuantumBasis
from app.models.symbol import SymbolLike, as_tree
from app.models.symbol_expr import (
    SymbolExpr,
    add,
    evaluate,
    is_conjugation_symmetric,
    level,
    mul,
    to_text,
)
from app.models.toeplitz import ToeplitzMatrix

logger = structlog.get_logger()

MATRIX_HEADER = b"TQMAT01\x00"
MODE_TOLERANCE = 1e-14
HERMITIAN_TOLERANCE = 1e-10

MatrixLike = Union[ToeplitzMatrix, np.ndarray]


def _entries(matrix: MatrixLike) -> np.ndarray:
    return matrix.entries if isinstance(matrix, ToeplitzMatrix) else np.asarray(matrix)


def angular_modes(tree: SymbolExpr, rule: QuadratureRule) -> np.ndarray:
    """Coefficients de Fourier angulaires f̂_m(r_i) = (1/Θ)Σ_t f(r_i e^{iθ_t}) e^{-imθ_t}."""
    modes = np.empty((rule.radial_count, rule.angular_count), dtype=complex)
    for rows, nodes in rule.row_chunks():
        values = evaluate(tree, nodes, N=rule.N)
        if not np.all(np.isfinite(values)):
            raise ValidationError(
                "Symbole non fini aux noeuds de quadrature",
                {"symbol": to_text(tree)[:200], "N": rule.N},
            )
        modes[rows] = np.fft.fft(values, axis=1) / rule.angular_count
    return modes


def assemble(symbol: SymbolLike, basis: QuantumBasis, rule: QuadratureRule) -> ToeplitzMatrix:
    """
    Assemble T_{N,f} par entrées de Gram ⟨f e_k, e_j⟩.

    A_{k+m,k} = Σ_i Φ[i,k+m] Φ[i,k] f̂_m(r_i); les modes angulaires négligeables
    sont ignorés.

    Args:
        symbol: Symbole (N^ρ appliqué à l'assemblage) ou arbre
        basis: Base du niveau N
        rule: Règle certifiée pour cette base

    Returns:
        Matrice de Toeplitz D×D
    """
    if not rule.certified or rule.N != basis.N or rule.dimension != basis.dimension:
        raise QuadratureError(
            "Certification de quadrature manquante pour cette base",
            {"rule_N": rule.N, "basis_N": basis.N, "certified": rule.certified},
        )
    tree = as_tree(symbol)
    D = basis.dimension
    modes = angular_modes(tree, rule)
    scale = float(np.max(np.abs(modes), initial=0.0))
    entries = np.zeros((D, D), dtype=complex)
    used = 0
    if scale > 0:
        threshold = MODE_TOLERANCE * scale
        for m in range(-(D - 1), D):
            column = modes[:, m % rule.angular_count]
            active = np.abs(column) > threshold
            if not np.any(active):
                continue
            used += 1
            phi = rule.phi[active]
            weights = column[active, None]
            shift = abs(m)
            values = np.sum(phi[:, shift:] * phi[:, : D - shift] * weights, axis=0)
            if m >= 0:
                entries[np.arange(shift, D), np.arange(0, D - shift)] = values
            else:
                entries[np.arange(0, D - shift), np.arange(shift, D)] = values

    hermitian = is_conjugation_symmetric(tree)
    matrix = ToeplitzMatrix(
        N=basis.N,
        entries=entries,
        provenance=symbol.describe() if hasattr(symbol, "describe") else to_text(tree),
        geometry=basis.geometry,
        hermitian=hermitian,
    )
    if hermitian:
        defect = matrix.hermitian_defect()
        if defect > HERMITIAN_TOLERANCE * max(1.0, float(np.max(np.abs(entries)))):
            logger.warning("Matrice d'un symbole réel non hermitienne", defect=defect)
    logger.debug("Matrice assemblée", N=basis.N, dimension=D, modes=used)
    return matrix


def assemble_series(
    terms: Sequence[SymbolExpr], basis: QuantumBasis, rule: QuadratureRule
) -> ToeplitzMatrix:
    """T de Σ_j N^{-j} h_j, en une seule passe (linéarité)."""
    tree = add(*(mul(level(-j), term) for j, term in enumerate(terms)))
    return assemble(tree, basis, rule)


def _check_compatible(a: ToeplitzMatrix, b: ToeplitzMatrix) -> None:
    if a.N != b.N or a.shape != b.shape or a.geometry != b.geometry:
        raise DimensionMismatchError((a.N, a.shape), (b.N, b.shape))


def compose(a: ToeplitzMatrix, b: ToeplitzMatrix) -> ToeplitzMatrix:
    _check_compatible(a, b)
    return ToeplitzMatrix(
        N=a.N,
        entries=a.entries @ b.entries,
        provenance=f"({a.provenance}) ∘ ({b.provenance})",
        geometry=a.geometry,
    )


def commutator(a: ToeplitzMatrix, b: ToeplitzMatrix) -> ToeplitzMatrix:
    _check_compatible(a, b)
    return ToeplitzMatrix(
        N=a.N,
        entries=a.entries @ b.entries - b.entries @ a.entries,
        provenance=f"[{a.provenance}, {b.provenance}]",
        geometry=a.geometry,
    )


def trace(a: MatrixLike) -> complex:
    return complex(np.trace(_entries(a)))


def trace_by_kernel(a: MatrixLike, basis: QuantumBasis, rule: QuadratureRule) -> complex:
    """
    ∫ e^{-Nφ(x)} T(x, x̄) μ(x) dm(x) sur tous les noeuds de la règle.

    Le noyau pondéré est celui de `weighted_kernel_at(a, basis, x, x̄)`. Sur une
    ligne de rayon r il vaut Σ_{jk} ρ_j A_jk ρ_k e^{i(j-k)θ}; la somme sur les
    angles de la ligne est faite par `rule.angular_sums`, si bien que les termes
    j != k ne disparaissent que par la quadrature.
    """
    entries = _entries(a) * rule.angular_sums(basis.dimension)
    radial = basis.section_values(rule.radii).real
    weights = rule.row_weights(weighted=False) * rule.angular_count
    diagonal = np.sum((radial @ entries) * radial, axis=1)
    return complex(np.sum(weights * diagonal))


def operator_norm(a: MatrixLike) -> float:
    """Plus grande valeur singulière."""
    entries = _entries(a)
    if entries.size == 0:
        return 0.0
    return float(linalg.norm(entries, 2))


def compressed(a: ToeplitzMatrix, fraction: Optional[float] = None) -> ToeplitzMatrix:
    """Bloc sans le coin de troncature (Bargmann: derniers 10 % des lignes/colonnes)."""
    if a.geometry.model_id is not ModelId.BARGMANN:
        return a
    fraction = settings.truncation_corner if fraction is None else fraction
    keep = int(math.floor(a.dimension * (1 - fraction)))
    return ToeplitzMatrix(
        N=a.N,
        entries=a.entries[:keep, :keep],
        provenance=f"compressed({a.provenance})",
        geometry=a.geometry,
        hermitian=a.hermitian,
    )


def weighted_kernel_at(
    a: MatrixLike, basis: QuantumBasis, x: complex, y_conj: complex
) -> complex:
    """e^{-(N/2)(φ(x)+φ(y))} Σ_{jk} e_j(x) A_jk ē_k(y)."""
    if basis.geometry.model_id is ModelId.BARGMANN and abs(basis.N * x * y_conj) >= basis.dimension:
        logger.warning("Queue de troncature (champ lointain)", N=basis.N, dimension=basis.dimension)
    left = basis.section_values(np.array([x]))[0]
    right = basis.section_values(np.array([y_conj]))[0]
    return complex(left @ _entries(a) @ right)


def spot_check_entry(
    symbol: SymbolLike, basis: QuantumBasis, rule: QuadratureRule, j: int, k: int
) -> complex:
    """⟨f e_k, e_j⟩ recalculé par somme directe sur les noeuds (sans FFT)."""
    tree = as_tree(symbol)
    total = 0j
    for rows, nodes in rule.row_chunks():
        values = evaluate(tree, nodes, N=rule.N)
        phase = np.exp(1j * (k - j) * rule.angles)
        angular = values @ phase / rule.angular_count
        total += np.sum(rule.phi[rows, j] * rule.phi[rows, k] * angular)
    return complex(total)


def write_matrix(a: MatrixLike, path: Path, fmt: str = "binary") -> Path:
    """Écrit la matrice: binaire "TQMAT01\\0" + D (int64 LE) + paires float64 LE, ou CSV re,im."""
    entries = np.ascontiguousarray(_entries(a), dtype=np.complex128)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "binary":
        with open(path, "wb") as handle:
            handle.write(MATRIX_HEADER)
            handle.write(np.array([entries.shape[0]], dtype="<i8").tobytes())
            handle.write(entries.astype("<c16").tobytes(order="C"))
    elif fmt == "csv":
        interleaved = np.empty((entries.shape[0], 2 * entries.shape[1]))
        interleaved[:, 0::2] = entries.real
        interleaved[:, 1::2] = entries.imag
        np.savetxt(path, interleaved, delimiter=",", fmt="%.16e")
    else:
        raise ValidationError(f"Format de matrice inconnu: {fmt}")
    logger.info("Matrice écrite", path=str(path), format=fmt, dimension=entries.shape[0])
    return path


def read_matrix(path: Path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as handle:
        head = handle.read(len(MATRIX_HEADER))
        if head == MATRIX_HEADER:
            D = int(np.frombuffer(handle.read(8), dtype="<i8")[0])
            data = np.frombuffer(handle.read(), dtype="<c16")
            return data.reshape(D, D).astype(np.complex128)
    interleaved = np.atleast_2d(np.loadtxt(path, delimiter=","))
    return interleaved[:, 0::2] + 1j * interleaved[:, 1::2]
