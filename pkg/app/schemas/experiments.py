"""Schémas Pydantic des configurations d'expériences et des rapports de convergence."""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings

ExperimentName = Literal[
    "projection",
    "composition",
    "commutator",
    "trace",
    "funcalc",
    "parametrix",
    "kernel",
    "symbol-class",
]

SLOPE_EXPERIMENTS = {"composition", "commutator", "funcalc", "parametrix", "kernel"}


class ChiSpec(BaseModel):
    """Fonction χ à support compact de la formule de Helffer-Sjöstrand."""

    model_config = ConfigDict(extra="forbid")

    center: float = Field(..., description="Centre du support de χ")
    width: float = Field(..., gt=0, description="Demi-largeur du support (bump) ou du plateau")
    shape: Literal["bump", "plateau"] = Field(
        default="bump",
        description="bump: bosse standard; plateau: indicatrice lissée",
    )
    ramp: float = Field(
        default=0.25,
        gt=0,
        description="Largeur des rampes de l'indicatrice lissée",
    )

    @property
    def support(self) -> tuple:
        extent = self.width + (self.ramp if self.shape == "plateau" else 0.0)
        return (self.center - extent, self.center + extent)


class SweepConfig(BaseModel):
    """Configuration d'une expérience sur une liste de N."""

    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentName = Field(..., description="Expérience à exécuter")
    geometry: str = Field(default="bargmann", description="bargmann ou cp1")
    n_list: List[int] = Field(
        default_factory=lambda: list(settings.default_n_list),
        description="Valeurs de N, strictement croissantes",
    )
    f: str = Field(default="exp(-z*conj(z))", description="Symbole f (grammaire des symboles)")
    g: Optional[str] = Field(None, description="Second symbole g")
    chi: Optional[ChiSpec] = Field(None, description="Fonction χ (funcalc)")
    delta: float = Field(default=0.0, ge=0.0, lt=0.5, description="Paramètre δ")
    J: int = Field(default=1, ge=0, le=4, description="Ordre de troncature")
    z_re: float = Field(default=0.0, description="Partie réelle du paramètre spectral z")
    z_im: float = Field(default=0.0, description="Partie imaginaire du paramètre spectral z")
    x_re: float = Field(default=0.0, description="Point x du noyau (partie réelle)")
    x_im: float = Field(default=0.0, description="Point x du noyau (partie imaginaire)")
    support_radius: float = Field(
        default=1.5, gt=0, description="Rayon du support des symboles (troncature de Bargmann)"
    )
    floor_power: float = Field(
        default_factory=lambda: settings.hs_floor_power,
        gt=0,
        description="Plancher |Im z| >= N^-p",
    )
    M: int = Field(default=4, ge=1, description="Ordre de décroissance visé pour ∂̄χ̃")
    hs_max_n: int = Field(
        default=64,
        description="N maximal pour lequel la formule HS est comparée à l'oracle spectral",
    )
    seed: int = Field(default_factory=lambda: settings.default_seed)
    jobs: int = Field(default_factory=lambda: settings.default_jobs, ge=1)

    @field_validator("n_list")
    @classmethod
    def validate_n_list(cls, v: List[int]) -> List[int]:
        """Vérifie que la liste est strictement croissante et positive."""
        if not v:
            raise ValueError("La liste de N ne peut pas être vide")
        if any(n < 1 for n in v):
            raise ValueError("Les valeurs de N doivent être positives")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("La liste de N doit être strictement croissante")
        return v

    @model_validator(mode="after")
    def validate_slope_window(self) -> "SweepConfig":
        if self.experiment in SLOPE_EXPERIMENTS and len(self.n_list) < 3:
            raise ValueError("Au moins trois valeurs de N sont nécessaires pour une pente")
        if self.experiment in {"composition", "commutator"} and self.g is None:
            raise ValueError(f"L'expérience {self.experiment} exige un symbole g")
        return self

    @property
    def spectral_parameter(self) -> complex:
        return complex(self.z_re, self.z_im)

    @property
    def kernel_point(self) -> complex:
        return complex(self.x_re, self.x_im)


class ReportRow(BaseModel):
    """Mesure (metric, N, value)."""

    metric: str
    N: int
    value: float


class FitResult(BaseModel):
    """Pente ajustée ou vérification ponctuelle, avec sa prédiction."""

    model_config = ConfigDict(populate_by_name=True)

    metric: str
    kind: Literal["slope_at_most", "slope_at_least", "value_below", "ratio_below", "record"] = (
        "slope_at_most"
    )
    slope: Optional[float] = None
    stderr: Optional[float] = None
    value: Optional[float] = Field(None, description="Quantité comparée hors ajustement")
    predicted: Optional[float] = Field(None, description="Pente ou seuil prédit")
    tolerance: float = 0.0
    provenance: str = Field(default="", description="Origine de la prédiction")
    floor: bool = Field(default=False, description="Vrai si le plancher numérique a tronqué l'ajustement")
    passed: Optional[bool] = Field(None, alias="pass")


class ConvergenceReport(BaseModel):
    """Rapport d'expérience: lignes, ajustements, verdict."""

    experiment: str
    geometry: str
    rows: List[ReportRow] = Field(default_factory=list)
    fits: List[FitResult] = Field(default_factory=list)
    verdict: Literal["pass", "fail", "no-op"] = "no-op"
    notes: List[str] = Field(default_factory=list)
    config_echo: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def sort_rows(self) -> "ConvergenceReport":
        self.rows.sort(key=lambda row: (row.metric, row.N))
        return self

    def series(self, metric: str) -> List[ReportRow]:
        return [row for row in self.rows if row.metric == metric]
