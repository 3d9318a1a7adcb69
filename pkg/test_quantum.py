"""Tests des espaces quantiques: bases, quadratures certifiées, noyaux de Bergman."""

import dataclasses
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Ajouter le répertoire racine au path
sys.path.append(str(Path(__file__).parent))

from app.core.exceptions import DimensionCapError, QuadratureError, ValidationError
from app.services.geometry_service import geometry_from_id, sample_pairs
from app.services.quantization import (
    bergman_kernel_at,
    build_basis,
    build_quadrature,
    closed_form_kernel,
    global_kernel_bound,
    gram_matrix,
    kernel_amplitude_identity,
    quadrature_report,
    random_pairs,
    total_mass,
    verify_offdiagonal_decay,
    verify_reproducing,
    volume_check,
    weighted_bergman_kernel_at,
)


@pytest.fixture(scope="module")
def bargmann_level():
    basis = build_basis(geometry_from_id("bargmann"), 16)
    return basis, build_quadrature(basis)


@pytest.fixture(scope="module")
def cp1_level():
    basis = build_basis(geometry_from_id("cp1"), 24)
    return basis, build_quadrature(basis)


def test_dimensions():
    """D = ⌈2N R²⌉ + 16 sur Bargmann, D = N + 1 sur CP¹."""
    assert build_basis(geometry_from_id("bargmann"), 32).dimension == 160
    assert build_basis(geometry_from_id("bargmann"), 32, support_radius=1.0).dimension == 80
    assert build_basis(geometry_from_id("cp1"), 32).dimension == 33
    with pytest.raises(DimensionCapError):
        build_basis(geometry_from_id("bargmann"), 1000)
    with pytest.raises(ValidationError):
        build_basis(geometry_from_id("cp1"), 0)


def test_squared_norms_closed_forms():
    """‖z^k‖² = 2π k!/N^{k+1} (Bargmann), 2π k!(N-k)!/(N+1)! (CP¹)."""
    bargmann = build_basis(geometry_from_id("bargmann"), 4)
    assert bargmann.squared_norms[2] == pytest.approx(2 * math.pi * 2 / 4 ** 3)
    cp1 = build_basis(geometry_from_id("cp1"), 4)
    assert cp1.squared_norms[1] == pytest.approx(2 * math.pi * 1 * 6 / 120)
    assert cp1.squared_norms[0] == pytest.approx(total_mass(cp1.geometry, 4))


@pytest.mark.parametrize("fixture", ["bargmann_level", "cp1_level"])
def test_quadrature_is_certified(fixture, request):
    """La règle reproduit chaque ‖z^k‖² et la masse totale."""
    basis, rule = request.getfixturevalue(fixture)
    assert rule.certified
    assert rule.angular_count >= basis.dimension + 1
    report = quadrature_report(rule)
    assert report.norm_residual <= 1e-10
    assert report.mass_residual < 1e-9


def test_angular_aliasing_is_refused(bargmann_level):
    """Moins de D + 1 angles rompt l'orthogonalité des monômes."""
    basis, _ = bargmann_level
    with pytest.raises(QuadratureError):
        build_quadrature(basis, angular_nodes=basis.dimension)


def test_cp1_volume(cp1_level):
    """∫ μ dm = 2π sur CP¹."""
    _, rule = cp1_level
    assert volume_check(rule) == pytest.approx(2 * math.pi, rel=1e-9)


@pytest.mark.parametrize("fixture", ["bargmann_level", "cp1_level"])
def test_kernel_basis_sum_matches_closed_form(fixture, request):
    """Σ x^k ȳ^k/‖z^k‖² concorde avec la forme close du noyau."""
    basis, _ = request.getfixturevalue(fixture)
    x, y = 0.3 + 0.1j, -0.2 + 0.25j
    by_basis = bergman_kernel_at(basis, x, np.conj(y))
    closed = complex(closed_form_kernel(basis.geometry, basis.N, x, np.conj(y)))
    assert abs(by_basis - closed) <= 1e-10 * abs(closed)
    weighted = weighted_bergman_kernel_at(basis, x, np.conj(y))
    weighted_closed = weighted_bergman_kernel_at(basis, x, np.conj(y), method="closed")
    assert abs(weighted - weighted_closed) <= 1e-10 * abs(weighted_closed)


def test_diagonal_kernel_density():
    """e^{-Nφ}Π_N(z, z̄) = N/2π sur Bargmann et (N+1)/2π sur CP¹."""
    bargmann = build_basis(geometry_from_id("bargmann"), 16)
    cp1 = build_basis(geometry_from_id("cp1"), 16)
    value = weighted_bergman_kernel_at(bargmann, 0.4j, -0.4j, method="closed")
    assert value.real == pytest.approx(16 / (2 * math.pi))
    value = weighted_bergman_kernel_at(cp1, 0.7, 0.7)
    assert value.real == pytest.approx(17 / (2 * math.pi), rel=1e-12)


@pytest.mark.parametrize("fixture", ["bargmann_level", "cp1_level"])
def test_reproducing_property(fixture, request):
    """Π_N est idempotent et la matrice de Gram de la base vaut I."""
    basis, rule = request.getfixturevalue(fixture)
    pairs = random_pairs(0.5, 3, seed=1)
    report = verify_reproducing(basis, rule, pairs)
    assert report.idempotence_residual < 1e-8
    assert report.gram_residual < 1e-10
    assert report.pairs == 3


def test_gram_matrix_includes_angular_sums(cp1_level):
    """Avec Θ = 4 angles, z^0 et z^4 ne sont plus orthogonaux: G_{0,4} != 0."""
    basis, rule = cp1_level
    np.testing.assert_allclose(gram_matrix(basis, rule), np.eye(basis.dimension), atol=1e-10)
    aliased = dataclasses.replace(rule, angular_count=4)
    assert abs(gram_matrix(basis, aliased)[0, 4]) > 1e-3


@pytest.mark.parametrize("fixture", ["bargmann_level", "cp1_level"])
def test_reproducing_detects_wrong_norm(fixture, request):
    """Une norme ‖z^3‖ faussée de 1 % fait échouer la vérification de Gram."""
    basis, rule = request.getfixturevalue(fixture)
    norms = basis.log_squared_norms.copy()
    norms[3] += 0.02
    perturbed = dataclasses.replace(basis, log_squared_norms=norms)
    report = verify_reproducing(perturbed, rule, random_pairs(0.5, 2, seed=1))
    assert report.gram_residual > 1e-2
    assert report.idempotence_residual < 1e-8

def test_offdiagonal_gaussian_decay(bargmann_level):
    """Sur Bargmann |K(x,y)|/K(x,x) = exp(-N|x-y|²/2)."""
    basis, _ = bargmann_level
    pairs = sample_pairs(radius=0.8, separation=0.6, count=12, seed=2)
    report = verify_offdiagonal_decay(basis, pairs)
    assert report.gaussian_rate == pytest.approx(-0.5, abs=1e-6)
    assert report.bound_holds
    assert report.c > 0


def test_offdiagonal_decay_needs_pairs(bargmann_level):
    basis, _ = bargmann_level
    with pytest.raises(ValidationError):
        verify_offdiagonal_decay(basis, [(0.1, 0.1), (0.2, 0.3)])


def test_cp1_amplitude_identity(cp1_level):
    """Π_N(x,ȳ)·(2π/N)·e^{-Nψ(x,ȳ)} = (N+1)/N exactement sur CP¹."""
    basis, _ = cp1_level
    pairs = random_pairs(0.8, 8, seed=5, max_gap=0.3)
    assert kernel_amplitude_identity(basis, pairs) < 1e-10
    with pytest.raises(ValidationError):
        kernel_amplitude_identity(build_basis(geometry_from_id("bargmann"), 4), pairs)


def test_global_kernel_bound_is_small_far_from_diagonal(bargmann_level):
    """Le noyau pondéré est négligeable devant N/2π à distance >= ε."""
    basis, _ = bargmann_level
    points = [0.0, 1.0, 1j, -1.0]
    bound = global_kernel_bound(basis, points, eps=0.5)
    assert bound < 1e-3 * basis.N / (2 * math.pi)
