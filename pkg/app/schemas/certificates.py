"""Schémas Pydantic des certificats et rapports de vérification."""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class SymbolCertificate(BaseModel):
    """Certificat d'hypothèse sur un symbole (fonction d'ordre, classe S_δ(m), résolvante)."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["order_function", "symbol_class", "rescaled_bounds", "resolvent_bounds"] = Field(
        ..., description="Hypothèse certifiée"
    )
    certified: bool = Field(..., description="Vrai si l'inégalité tient sur toute la grille")
    delta: float = Field(..., description="Paramètre δ")
    N_list: List[float] = Field(default_factory=list, description="Valeurs de N testées")
    M0: Optional[int] = Field(None, description="Exposant M₀ (fonctions d'ordre)")
    C: Optional[float] = Field(None, description="Constante certifiée")
    per_alpha: Dict[str, float] = Field(
        default_factory=dict, description="Constantes C_α indexées par '(αx,αy)'"
    )
    per_N: Dict[str, List[float]] = Field(
        default_factory=dict, description="Constantes par valeur de N (dans l'ordre de N_list)"
    )
    witness: Optional[Dict[str, Any]] = Field(None, description="Témoin de violation")


class QuadratureReport(BaseModel):
    """Certification d'une règle de quadrature."""

    model: str
    N: int
    dimension: int
    radial_nodes: int
    angular_nodes: int
    refinements: int = Field(..., description="Nombre de doublements effectués")
    norm_residual: float = Field(..., description="max_k |Σ w r^{2k} / ‖z^k‖² - 1|")
    worst_index: int = Field(..., description="Monôme le moins bien reproduit")
    mass_residual: float = Field(..., description="Écart relatif sur la masse totale")
    target: float


class ReproducingReport(BaseModel):
    """Résidus de la propriété reproduisante et de la matrice de Gram."""

    model: str
    N: int
    idempotence_residual: float = Field(..., description="max relatif |∫ΠΠ - Π|")
    gram_residual: float = Field(..., description="max |G - I|")
    pairs: int


class DecayReport(BaseModel):
    """Décroissance hors diagonale du noyau pondéré."""

    model: str
    N: int
    gaussian_rate: float = Field(..., description="Pente de log(|K|/K_diag) contre N·d²")
    C: float = Field(..., description="Constante C de la borne C·N·exp(-c√N d)")
    c: float = Field(..., description="Taux c de la borne")
    bound_holds: bool
    pairs: int
