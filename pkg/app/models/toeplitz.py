"""Matrices de Toeplitz denses dans la base orthonormée."""

from dataclasses import dataclass, field

import numpy as np

from app.models.geometry import ModelGeometry


@dataclass(frozen=True)
class ToeplitzMatrix:
    """Matrice D×D de T_{N,f}, avec sa provenance (symbole ou historique algébrique)."""

    N: int
    entries: np.ndarray = field(repr=False)
    provenance: str
    geometry: ModelGeometry
    hermitian: bool = False

    @property
    def dimension(self) -> int:
        return int(self.entries.shape[0])

    @property
    def shape(self):
        return self.entries.shape

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))
