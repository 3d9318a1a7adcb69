"""Schemas Pydantic pour le laboratoire Toeplitz."""

from app.schemas.certificates import (
    DecayReport,
    QuadratureReport,
    ReproducingReport,
    SymbolCertificate,
)

from app.schemas.experiments import (
    ChiSpec,
    ConvergenceReport,
    FitResult,
    ReportRow,
    SweepConfig,
)

__all__ = [
    # Certificats
    "SymbolCertificate",
    "QuadratureReport",
    "ReproducingReport",
    "DecayReport",

    # Expériences
    "ChiSpec",
    "SweepConfig",
    "ReportRow",
    "FitResult",
    "ConvergenceReport",
]
