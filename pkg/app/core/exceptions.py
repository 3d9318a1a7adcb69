"""Exceptions personnalisées pour le laboratoire Toeplitz."""

from typing import Any, Dict, List, Optional


class ToeplitzLabException(Exception):
    """Exception de base pour le laboratoire Toeplitz."""

    def __init__(
        self,
        message: str,
        exit_code: int = 1,
        error_type: str = "ToeplitzLabError",
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.exit_code = exit_code
        self.error_type = error_type
        self.details = details or {}
        super().__init__(self.message)


class ConfigurationError(ToeplitzLabException):
    """Erreur de configuration."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=2,
            error_type="ConfigurationError",
            details=details
        )


class ValidationError(ToeplitzLabException):
    """Erreur de validation des arguments d'une opération."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=2,
            error_type="ValidationError",
            details=details
        )


class ChartOverflowError(ToeplitzLabException):
    """Point hors de la carte distinguée (CP1)."""

    def __init__(self, z: complex, chart_radius: float):
        super().__init__(
            message=f"|z| = {abs(z):.6g} dépasse R_chart = {chart_radius}; changer de carte",
            error_type="ChartOverflowError",
            details={"z": [z.real, z.imag], "chart_radius": chart_radius}
        )


class PolarizationError(ToeplitzLabException):
    """Paire non polarisable (1 + x·ȳ sur l'axe réel négatif)."""

    def __init__(self, x: complex, y_conj: complex):
        super().__init__(
            message="Paire non polarisable: 1 + x·ȳ est sur la coupure du logarithme",
            error_type="PolarizationError",
            details={"x": [x.real, x.imag], "y_conj": [y_conj.real, y_conj.imag]}
        )


class PhaseDominationError(ToeplitzLabException):
    """Violation de la domination gaussienne de la phase."""

    def __init__(self, offending: List[Any]):
        super().__init__(
            message=f"Domination de la phase violée sur {len(offending)} paire(s)",
            error_type="PhaseDominationError",
            details={"offending_pairs": offending[:20]}
        )


class SymbolSyntaxError(ToeplitzLabException):
    """Erreur de syntaxe dans une expression de symbole."""

    def __init__(self, message: str, position: int, text: str):
        self.position = position
        super().__init__(
            message=f"{message} (position {position})",
            exit_code=2,
            error_type="SymbolSyntaxError",
            details={"position": position, "text": text}
        )


class UnknownIdentifierError(ToeplitzLabException):
    """Identifiant inconnu dans une expression de symbole."""

    def __init__(self, identifier: str, position: int):
        self.position = position
        super().__init__(
            message=f"Identifiant inconnu '{identifier}' (position {position})",
            exit_code=2,
            error_type="UnknownIdentifierError",
            details={"identifier": identifier, "position": position}
        )


class DerivativeOrderError(ToeplitzLabException):
    """Ordre de dérivation au-delà des dérivées stockées du profil."""

    def __init__(self, order: int, cap: int):
        super().__init__(
            message=f"Dérivée d'ordre {order} du profil de bosse au-delà du plafond {cap}",
            error_type="DerivativeOrderError",
            details={"order": order, "cap": cap}
        )


class DimensionCapError(ToeplitzLabException):
    """Dimension D au-delà du plafond des matrices denses."""

    def __init__(self, dimension: int, cap: int):
        super().__init__(
            message=f"Dimension {dimension} au-delà du plafond {cap}",
            error_type="DimensionCapError",
            details={"dimension": dimension, "cap": cap}
        )


class QuadratureError(ToeplitzLabException):
    """Erreur de quadrature (non-convergence, repliement, certification manquante)."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_type="QuadratureError",
            details=details
        )


class DimensionMismatchError(ToeplitzLabException):
    """Matrices de Toeplitz incompatibles."""

    def __init__(self, left: Any, right: Any):
        super().__init__(
            message=f"Dimensions incompatibles: {left} et {right}",
            error_type="DimensionMismatchError",
            details={"left": str(left), "right": str(right)}
        )


class UnsupportedOrderError(ToeplitzLabException):
    """Combinaison (géométrie, ordre) non prise en charge."""

    def __init__(self, model: str, order: int, operation: str):
        super().__init__(
            message=f"{operation}: ordre {order} non disponible sur {model}",
            error_type="UnsupportedOrderError",
            details={"model": model, "order": order, "operation": operation}
        )


class CertificationError(ToeplitzLabException):
    """Échec de certification d'une hypothèse."""

    def __init__(self, hypothesis: str, details: Optional[Dict[str, Any]] = None):
        self.hypothesis = hypothesis
        super().__init__(
            message=f"Hypothèse non certifiée: {hypothesis}",
            error_type="CertificationError",
            details={**(details or {}), "hypothesis": hypothesis}
        )


class ExpansionWindowError(ToeplitzLabException):
    """Paire hors de la fenêtre quasi-diagonale du développement."""

    def __init__(self, distance: float, window: float):
        super().__init__(
            message=f"|x - y| = {distance:.3g} hors de la fenêtre {window:.3g}",
            error_type="ExpansionWindowError",
            details={"distance": distance, "window": window}
        )


class ResolutionError(ToeplitzLabException):
    """Grille d'échantillonnage trop grossière pour l'extension presque analytique."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_type="ResolutionError",
            details=details
        )


class FitError(ToeplitzLabException):
    """Ajustement de pente impossible."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_type="FitError",
            details=details
        )


class NonHermitianError(ToeplitzLabException):
    """Matrice non hermitienne au-delà de la tolérance."""

    def __init__(self, defect: float, tolerance: float):
        super().__init__(
            message=f"Défaut d'hermiticité {defect:.3g} > {tolerance:.3g}",
            error_type="NonHermitianError",
            details={"defect": defect, "tolerance": tolerance}
        )
