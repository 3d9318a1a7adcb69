"""Configuration du laboratoire avec Pydantic Settings."""

from pathlib import Path
from typing import List

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Configuration du laboratoire Toeplitz."""

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Environnement
    environment: str = Field(
        default="development",
        description="Environnement (development, ci, production)"
    )
    debug: bool = Field(
        default=False,
        description="Mode debug"
    )
    log_level: str = Field(
        default="INFO",
        description="Niveau de log"
    )
    log_format: str = Field(
        default="console",
        description="Format des logs (console ou json)"
    )

    # Matrices denses
    matrix_cap: int = Field(
        default=2048,
        description="Dimension maximale D des matrices denses"
    )
    bargmann_padding: int = Field(
        default=16,
        description="Degrés ajoutés à la troncature de Bargmann"
    )
    cp1_chart_radius: float = Field(
        default=10.0,
        description="Rayon R_chart au-delà duquel CP1 bascule sur la carte antipodale"
    )
    truncation_corner: float = Field(
        default=0.10,
        description="Fraction des lignes/colonnes exclues des assertions sur Bargmann"
    )

    # Symboles
    bump_derivative_cap: int = Field(
        default=8,
        description="Ordre maximal des dérivées du profil de bosse"
    )
    certification_grid: int = Field(
        default=41,
        description="Nombre de points par axe de la grille de certification"
    )
    certification_patch_radius: float = Field(
        default=1.5,
        description="Demi-côté du carré de certification dans la carte"
    )

    # Quadrature
    quadrature_target: float = Field(
        default=1e-10,
        description="Précision relative visée pour la reproduction des normes"
    )
    quadrature_panel_nodes: int = Field(
        default=16,
        description="Noeuds de Gauss-Legendre par panneau radial"
    )
    quadrature_max_refinements: int = Field(
        default=4,
        description="Nombre maximal de doublements des noeuds radiaux"
    )

    # Calcul fonctionnel
    hs_floor_power: float = Field(
        default=2.0,
        description="Plancher |Im z| >= N^-p de la formule de Helffer-Sjöstrand"
    )
    hs_panel_nodes: int = Field(
        default=12,
        description="Noeuds de Gauss-Legendre maximaux par direction et par panneau de la bande complexe"
    )
    hs_target: float = Field(
        default=1e-9,
        description="Erreur scalaire visée max |q(λ) - χ(λ)| de la quadrature HS"
    )
    hs_max_refinements: int = Field(
        default=2,
        description="Nombre maximal de raffinements de la quadrature HS"
    )

    # Expériences
    default_n_list: List[int] = Field(
        default=[32, 48, 64, 96, 128, 192, 256],
        description="Liste de N par défaut (progression géométrique)"
    )
    default_seed: int = Field(
        default=0,
        description="Graine des tirages aléatoires"
    )
    default_jobs: int = Field(
        default=1,
        description="Nombre de valeurs de N traitées en parallèle"
    )
    output_dir: Path = Field(
        default=Path("results"),
        description="Répertoire des rapports CSV/JSON"
    )


# Instance globale des settings
settings = Settings()
