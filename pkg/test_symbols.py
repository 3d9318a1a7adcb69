"""Tests des symboles: grammaire, dérivation exacte et certification de classes."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Ajouter le répertoire racine au path
sys.path.append(str(Path(__file__).parent))

from app.core.exceptions import SymbolSyntaxError, UnknownIdentifierError, ValidationError
from app.models.symbol import OrderFunction, Symbol, unit_order_function
from app.models.symbol_expr import evaluate, is_conjugation_symmetric
from app.services.differentiation import (
    differentiate,
    finite_difference,
    real_derivative_values,
    wirtinger_decomposition,
)
from app.services.symbol_classes import (
    check_order_function,
    check_symbol_class,
    dilate_symbol,
    multi_indices,
    scale_symbol,
)
from app.services.symbol_parser import format_symbol, parse_symbol

POINTS = np.array([0.0, 0.3 - 0.2j, 1 + 2j, -0.7j])


def values(text: str, z=POINTS, N: float = 1.0) -> np.ndarray:
    return evaluate(parse_symbol(text), z, N=N)


def test_parse_and_evaluate():
    """z*conj(z) vaut |z|²; i et N sont des constantes de la grammaire."""
    np.testing.assert_allclose(values("z*conj(z)"), np.abs(POINTS) ** 2, atol=1e-15)
    np.testing.assert_allclose(values("i*z"), 1j * POINTS, atol=1e-15)
    np.testing.assert_allclose(values("N^(-1)*z", N=4.0), POINTS / 4, atol=1e-15)
    np.testing.assert_allclose(values("(1 - z*conj(z))/(1 + z*conj(z))"),
                               (1 - np.abs(POINTS) ** 2) / (1 + np.abs(POINTS) ** 2))


def test_format_round_trip():
    """Le texte formaté se relit en un symbole de mêmes valeurs."""
    for text in ("bump(0.5, 1.2) + 2*z^2", "exp(-z*conj(z))", "bumpd(2, 0, 1)*conj(z)"):
        tree = parse_symbol(text)
        again = parse_symbol(format_symbol(tree))
        np.testing.assert_allclose(
            evaluate(again, POINTS), evaluate(tree, POINTS), rtol=1e-12, atol=1e-15
        )


def test_syntax_errors_carry_position():
    """Les erreurs de syntaxe indiquent la position fautive."""
    with pytest.raises(SymbolSyntaxError) as exc_info:
        parse_symbol("z + ")
    assert exc_info.value.position == 4
    with pytest.raises(UnknownIdentifierError) as exc_info:
        parse_symbol("2*w")
    assert exc_info.value.position == 2
    with pytest.raises(SymbolSyntaxError):
        parse_symbol("z^-1")
    with pytest.raises(SymbolSyntaxError):
        parse_symbol("bump(z, 1)")


def test_bump_profile():
    """La bosse vaut 1 en son centre et s'annule hors de son support."""
    bump = values("bump(0, 1)", z=np.array([0.0, 0.5, 1.0, 2.0]))
    assert bump[0] == pytest.approx(1.0)
    assert 0 < bump[1].real < 1
    assert bump[2] == 0
    assert bump[3] == 0


def test_exact_derivatives():
    """∂|z|² = z̄, ∂̄|z|² = z, ∂∂̄|z|² = 1."""
    f = parse_symbol("z*conj(z)")
    np.testing.assert_allclose(evaluate(differentiate(f, 1, 0), POINTS), np.conj(POINTS))
    np.testing.assert_allclose(evaluate(differentiate(f, 0, 1), POINTS), POINTS)
    np.testing.assert_allclose(evaluate(differentiate(f, 1, 1), POINTS), np.ones(4))
    assert np.all(evaluate(differentiate(f, 2, 0), POINTS) == 0)
    with pytest.raises(ValidationError):
        differentiate(f, -1, 0)


@pytest.mark.parametrize("a,b", [(1, 0), (0, 1), (1, 1), (2, 1)])
def test_derivatives_match_finite_differences(a, b):
    """Les dérivées exactes d'une bosse concordent avec les différences finies."""
    f = parse_symbol("bump(0.2, 1.0) * (1 + z)")
    z = 0.35 + 0.15j
    exact = complex(evaluate(differentiate(f, a, b), np.array([z]))[0])
    approx = finite_difference(f, a, b, z, step=1e-3)
    assert abs(exact - approx) < 1e-3 * max(1.0, abs(exact))


def test_real_derivatives_from_wirtinger():
    """∂_x² (x² + y²) = 2 via la décomposition de Wirtinger."""
    assert wirtinger_decomposition(1, 0) == {(1, 0): 1, (0, 1): 1}
    f = parse_symbol("z*conj(z)")
    second = real_derivative_values(f, 2, 0, POINTS)
    np.testing.assert_allclose(second, 2 * np.ones(4), atol=1e-14)
    mixed = real_derivative_values(f, 1, 1, POINTS)
    np.testing.assert_allclose(mixed, np.zeros(4), atol=1e-14)


def test_conjugation_symmetry():
    """Un symbole réel est invariant par conjugaison."""
    assert is_conjugation_symmetric(parse_symbol("z*conj(z) + bump(0, 1)"))
    assert not is_conjugation_symmetric(parse_symbol("z"))


def test_multi_indices():
    assert multi_indices(1) == [(0, 0), (1, 0), (0, 1)]
    assert len(multi_indices(4)) == 15


def test_bump_is_certified_in_unit_class():
    """Une bosse indépendante de N appartient à S_0(1)."""
    f = Symbol(expr=parse_symbol("bump(0, 1.2)"))
    certificate = check_symbol_class(f, unit_order_function(), N_list=[10, 100, 1000], max_alpha=3)
    assert certificate.certified
    assert certificate.C is not None and certificate.C >= 1.0
    assert set(certificate.per_alpha) == {f"({px},{py})" for px, py in multi_indices(3)}


def test_growing_symbol_is_rejected():
    """N^{1/2}|z|² n'est pas dans S_0(1): un témoin de violation est rendu."""
    f = Symbol(expr=parse_symbol("z*conj(z)"), power=0.5)
    certificate = check_symbol_class(f, unit_order_function(), N_list=[10, 100, 1000], max_alpha=1)
    assert not certificate.certified
    assert certificate.witness["alpha"] == "(0,0)"


def test_scaled_symbol_and_order_function():
    """f = N^δ g avec m = N^{2δ} g + 1 est une fonction d'ordre."""
    f, m = scale_symbol(parse_symbol("z*conj(z)"), 0.25)
    assert f.power == 0.25
    certificate = check_order_function(m, 0.25, N_list=[1e2, 1e3, 1e4])
    assert certificate.certified
    assert certificate.M0 is not None and certificate.M0 <= 2
    with pytest.raises(ValidationError):
        scale_symbol(parse_symbol("z"), 0.25)


def test_non_positive_order_function():
    """Une fonction d'ordre qui s'annule n'est pas certifiable."""
    m = OrderFunction(expr=parse_symbol("z*conj(z)"))
    certificate = check_order_function(m, 0.0, N_list=[10, 100, 1000])
    assert not certificate.certified
    assert certificate.witness["reason"] == "positivité"


def test_dilated_symbol():
    """g(N^δ z) a des dérivées d'ordre 1 en N^δ."""
    g = parse_symbol("z*conj(z)")
    assert dilate_symbol(g, 0.0).expr is g
    dilated = dilate_symbol(g, 0.25)
    assert dilated.delta == 0.25
    value = evaluate(dilated.expr, np.array([1.0]), N=16.0)[0]
    assert value == pytest.approx(4.0)
    with pytest.raises(ValidationError):
        Symbol(expr=g, delta=0.5)
