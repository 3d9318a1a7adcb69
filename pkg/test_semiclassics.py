"""Tests du produit étoile, du crochet de Poisson et des développements du noyau."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Ajouter le répertoire racine au path
sys.path.append(str(Path(__file__).parent))

from app.core.exceptions import ExpansionWindowError, UnsupportedOrderError, ValidationError
from app.models.symbol import Symbol
from app.models.symbol_expr import evaluate
from app.services.geometry_service import geometry_from_id
from app.services.kernel_expansion import (
    diagonal_kernel_expansion,
    gaussian_factor,
    offdiagonal_kernel_expansion,
)
from app.services.quantization import build_basis, build_quadrature
from app.services.star_product import (
    commutator_symbol,
    poisson_bracket,
    star_series,
    star_series_bargmann,
    star_series_closed_form,
    star_term,
)
from app.services.symbol_parser import parse_symbol
from app.services.toeplitz_service import assemble, weighted_kernel_at

POINTS = np.array([0.0, 0.25 + 0.1j, -0.4j, 0.6 - 0.3j])


@pytest.fixture
def bargmann():
    return geometry_from_id("bargmann")


@pytest.fixture
def cp1():
    return geometry_from_id("cp1")


def symbol(text: str) -> Symbol:
    return Symbol(expr=parse_symbol(text))


def test_leading_terms(bargmann, cp1):
    """h₀ = fg et h₁ = -H^{-1}∂f∂̄g."""
    f, g = symbol("z"), symbol("conj(z)")
    np.testing.assert_allclose(evaluate(star_term(f, g, bargmann, 0), POINTS), np.abs(POINTS) ** 2)
    np.testing.assert_allclose(evaluate(star_term(f, g, bargmann, 1), POINTS), -np.ones(4))
    expected = -(1 + np.abs(POINTS) ** 2) ** 2
    np.testing.assert_allclose(evaluate(star_term(f, g, cp1, 1), POINTS), expected)


def test_recursion_matches_closed_form():
    """La récurrence de Bargmann retrouve h_j = (-1)^j/j! ∂^j f ∂̄^j g."""
    f = symbol("bump(0.1, 1.0)")
    g = symbol("z*conj(z) + z^2 + conj(z)")
    recursive = star_series_bargmann(f, g, 2)
    closed = star_series_closed_form(f, g, 2)
    assert len(recursive) == len(closed) == 3
    for j in range(3):
        np.testing.assert_allclose(
            evaluate(recursive.terms[j], POINTS),
            evaluate(closed.terms[j], POINTS),
            atol=1e-10,
        )


def test_squared_modulus_series_terminates(bargmann):
    """|z|² ⋆ |z|² = |z|⁴ - N^{-1}|z|²: h₂ s'annule."""
    f = symbol("z*conj(z)")
    series = star_series(f, f, 2, bargmann)
    np.testing.assert_allclose(evaluate(series.terms[1], POINTS), -np.abs(POINTS) ** 2, atol=1e-14)
    np.testing.assert_allclose(evaluate(series.terms[2], POINTS), np.zeros(4), atol=1e-13)
    np.testing.assert_allclose(
        series.values(POINTS, N=10.0),
        np.abs(POINTS) ** 4 - np.abs(POINTS) ** 2 / 10,
        atol=1e-13,
    )
    assert series.class_exponents == (0.0, -1.0, -2.0)


def test_series_truncation(bargmann):
    series = star_series(symbol("z"), symbol("conj(z)"), 3, bargmann)
    assert series.order == 3
    assert series.truncated(1).order == 1
    with pytest.raises(ValidationError):
        series.truncated(5)


def test_cp1_orders_are_limited(cp1):
    """Sur CP¹ seuls h₀ et h₁ sont explicites."""
    f, g = symbol("z"), symbol("conj(z)")
    assert len(star_series(f, g, 1, cp1)) == 2
    with pytest.raises(UnsupportedOrderError):
        star_term(f, g, cp1, 2)
    with pytest.raises(UnsupportedOrderError):
        star_series(f, g, 2, cp1)


def test_poisson_bracket(bargmann, cp1):
    """{|z|², z + z̄} = i(z - z̄) sur Bargmann; le crochet est antisymétrique."""
    f, g = symbol("z*conj(z)"), symbol("z + conj(z)")
    bracket = evaluate(poisson_bracket(f, g, bargmann), POINTS)
    np.testing.assert_allclose(bracket, 1j * (POINTS - np.conj(POINTS)), atol=1e-15)
    np.testing.assert_allclose(
        evaluate(poisson_bracket(g, f, cp1), POINTS),
        -evaluate(poisson_bracket(f, g, cp1), POINTS),
        atol=1e-14,
    )
    np.testing.assert_allclose(
        evaluate(commutator_symbol(f, g, bargmann), POINTS), -1j * bracket, atol=1e-15
    )


def test_commutator_symbol_is_antisymmetric_part_of_h1(bargmann):
    """h₁(f,g) - h₁(g,f) = -i{f,g}."""
    f, g = symbol("bump(0, 1.2)"), symbol("z*conj(z)*z")
    difference = evaluate(star_term(f, g, bargmann, 1), POINTS) - evaluate(
        star_term(g, f, bargmann, 1), POINTS
    )
    np.testing.assert_allclose(
        difference, evaluate(commutator_symbol(f, g, bargmann), POINTS), atol=1e-12
    )


def test_diagonal_kernel_of_squared_modulus(bargmann):
    """Pour f = |z|², J = 1 et x = 0, la prédiction vaut 1/2π pour tout N."""
    f = symbol("z*conj(z)")
    for N in (8, 32, 128):
        assert diagonal_kernel_expansion(f, 0.0, 1, bargmann, N) == pytest.approx(1 / (2 * math.pi))
    basis = build_basis(bargmann, 16)
    T = assemble(f, basis, build_quadrature(basis))
    measured = weighted_kernel_at(T, basis, 0.0, 0.0)
    assert measured.real == pytest.approx(1 / (2 * math.pi), rel=1e-9)


def test_diagonal_kernel_of_squared_modulus_off_origin(bargmann):
    """Sur Bargmann la série de |z|² s'arrête à J = 1: (N/2π)(|x|² + 1/N)."""
    f = symbol("z*conj(z)")
    x = 0.3 - 0.2j
    basis = build_basis(bargmann, 16)
    T = assemble(f, basis, build_quadrature(basis))
    measured = weighted_kernel_at(T, basis, x, x.conjugate())
    predicted = diagonal_kernel_expansion(f, x, 1, bargmann, 16)
    assert abs(measured - predicted) < 1e-9 * abs(predicted)


def test_cp1_diagonal_kernel_of_constant(cp1):
    """Sur CP¹, b₁ = 1: le noyau de T_1 vaut (N/2π)(1 + 1/N)."""
    one = symbol("1")
    assert diagonal_kernel_expansion(one, 0.5, 1, cp1, 20) == pytest.approx(21 / (2 * math.pi))
    assert diagonal_kernel_expansion(one, 0.5, 0, cp1, 20) == pytest.approx(20 / (2 * math.pi))
    with pytest.raises(UnsupportedOrderError):
        diagonal_kernel_expansion(one, 0.5, 2, cp1, 20)


def test_offdiagonal_expansion(bargmann, cp1):
    """Hors diagonale: facteur gaussien de module e^{-N|x-y|²/2} et fenêtre 3/√N."""
    f = symbol("z*conj(z)")
    N = 100
    x = 0.2
    on_diagonal = offdiagonal_kernel_expansion(f, x, x, 1, bargmann, N)
    assert on_diagonal == pytest.approx(diagonal_kernel_expansion(f, x, 1, bargmann, N))

    y = x + 0.1
    value = offdiagonal_kernel_expansion(symbol("1"), x, y, 0, bargmann, N)
    assert abs(value) == pytest.approx(N / (2 * math.pi) * gaussian_factor(x, y, N))
    assert gaussian_factor(0.0, 0.1, N) == pytest.approx(math.exp(-0.5))

    with pytest.raises(ExpansionWindowError):
        offdiagonal_kernel_expansion(f, 0.0, 1.0, 1, bargmann, N)
    with pytest.raises(UnsupportedOrderError):
        offdiagonal_kernel_expansion(f, 0.0, 0.0, 1, cp1, N)


def test_offdiagonal_expansion_matches_kernel(bargmann):
    """Pour f = |z|² le développement polarisé est exact à J = 1."""
    f = symbol("z*conj(z)")
    N = 16
    basis = build_basis(bargmann, N)
    T = assemble(f, basis, build_quadrature(basis))
    x = 0.2 + 0.1j
    y = x + N ** -0.5
    measured = weighted_kernel_at(T, basis, x, np.conj(y))
    predicted = offdiagonal_kernel_expansion(f, x, np.conj(y), 1, bargmann, N)
    assert abs(measured - predicted) < 1e-9 * abs(predicted)
