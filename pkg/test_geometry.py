"""Tests du module géométrique (plan de Bargmann et droite projective)."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Ajouter le répertoire racine au path
sys.path.append(str(Path(__file__).parent))

from app.core.exceptions import ChartOverflowError, ConfigurationError, PolarizationError
from app.services.geometry_service import (
    antipodal_chart,
    distance,
    extension_at,
    geometry_from_id,
    holomorphy_residuals,
    metric_volume_at,
    phase_domination_check,
    potential_at,
    sample_pairs,
    to_chart,
)


@pytest.fixture
def bargmann():
    return geometry_from_id("bargmann")


@pytest.fixture
def cp1():
    return geometry_from_id("cp1")


def test_geometry_aliases():
    """Les identifiants courts et longs désignent le même modèle."""
    assert geometry_from_id("Bargmann_Plane").short_id == "bargmann"
    assert geometry_from_id("projective_line").short_id == "cp1"
    with pytest.raises(ConfigurationError):
        geometry_from_id("torus")


def test_potentials(bargmann, cp1):
    """φ = |z|² sur Bargmann, log(1 + |z|²) sur CP¹."""
    assert potential_at(bargmann, 1 + 1j) == pytest.approx(2.0)
    assert potential_at(cp1, 1 + 1j) == pytest.approx(math.log(3.0))


def test_extension_restricts_to_potential(bargmann, cp1):
    """ψ(z, z̄) = φ(z) sur la diagonale."""
    z = 0.4 - 0.7j
    for geometry in (bargmann, cp1):
        value = extension_at(geometry, z, z.conjugate())
        assert value.imag == pytest.approx(0.0, abs=1e-14)
        assert value.real == pytest.approx(potential_at(geometry, z), rel=1e-14)


def test_metric_and_volume(bargmann, cp1):
    """H = 1 (Bargmann), H = (1+|z|²)^-2 (CP¹), μ = 2H."""
    assert metric_volume_at(bargmann, 3j) == (1.0, 2.0)
    H, mu = metric_volume_at(cp1, 1.0)
    assert H == pytest.approx(0.25)
    assert mu == pytest.approx(0.5)


def test_chart_overflow(cp1):
    """Au-delà de R_chart il faut changer de carte."""
    with pytest.raises(ChartOverflowError):
        potential_at(cp1, 50.0)
    index, w = to_chart(cp1, 50.0)
    assert index == 1
    assert w == pytest.approx(0.02)
    assert antipodal_chart(2j) == pytest.approx(-0.5j)


def test_polarization_cut(cp1):
    """1 + x·ȳ sur le demi-axe réel négatif n'est pas polarisable."""
    with pytest.raises(PolarizationError):
        extension_at(cp1, 1.0, -1.0)
    with pytest.raises(PolarizationError):
        extension_at(cp1, 2.0, -1.0)


def test_fubini_study_distance(cp1, bargmann):
    """Distance de 0 à 1 sur CP¹: arctan(1) = π/4."""
    assert distance(cp1, 0.0, 1.0) == pytest.approx(math.pi / 4)
    assert distance(bargmann, 0.0, 3 + 4j) == pytest.approx(5.0)


def test_phase_domination_bargmann(bargmann):
    """Sur Bargmann, Re ψ(x,ȳ) - ½(φ(x)+φ(y)) = -½|x-y|² exactement."""
    pairs = sample_pairs(radius=1.0, separation=0.4, count=64, seed=3)
    C = phase_domination_check(bargmann, pairs, radius=0.5)
    assert C == pytest.approx(0.5, rel=1e-8)


def test_phase_domination_cp1(cp1):
    """La constante de domination est strictement positive sur CP¹."""
    pairs = sample_pairs(radius=2.0, separation=0.4, count=64, seed=4)
    C = phase_domination_check(cp1, pairs, radius=0.5)
    assert C > 0
    assert np.isfinite(C)


def test_phase_domination_diagonal_only(bargmann):
    """Sans paire hors diagonale, la constante est infinie."""
    assert phase_domination_check(bargmann, [(0.3, 0.3)], radius=0.5) == float("inf")


def test_sample_pairs_are_reproducible():
    """Une graine fixée donne les mêmes paires."""
    first = sample_pairs(1.0, 0.2, 10, seed=7)
    second = sample_pairs(1.0, 0.2, 10, seed=7)
    assert first == second
    assert all(abs(y) <= 1.0 + 1e-12 for _, y in first)


def test_extension_is_sesqui_holomorphic(cp1):
    """ψ(x, ȳ) est holomorphe en x et anti-holomorphe en y."""
    residual_x, residual_y = holomorphy_residuals(cp1, [(0.3 + 0.1j, -0.2j), (1.0, 0.5)])
    assert residual_x < 1e-8
    assert residual_y < 1e-8
