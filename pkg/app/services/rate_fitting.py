"""Ajustement des taux de convergence log-log."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from app.core.exceptions import FitError

NUMERICAL_FLOOR = 1e-13


@dataclass(frozen=True)
class RateFit:
    """Pente de log(valeur) contre log(N) et son erreur standard."""

    slope: float
    stderr: float
    intercept: float
    used: int
    floor: bool = False

    def predict(self, N: float) -> float:
        return float(np.exp(self.intercept) * N ** self.slope)


def fit_rate(
    N_values: Sequence[float], values: Sequence[float], floor: float = NUMERICAL_FLOOR
) -> RateFit:
    """
    Pente des moindres carrés de log(value) contre log(N).

    Seul le préfixe des valeurs au-dessus du plancher est ajusté; le drapeau
    `floor` signale la troncature.

    Raises:
        FitError: moins de trois points, ou moins de deux points utilisables
    """
    N_arr = np.asarray(N_values, dtype=float)
    v_arr = np.asarray(values, dtype=float)
    if N_arr.size < 3 or N_arr.size != v_arr.size:
        raise FitError(
            "Au moins trois points sont nécessaires pour ajuster une pente",
            {"points": int(N_arr.size)},
        )
    usable = np.isfinite(v_arr) & (v_arr > floor)
    prefix = int(np.argmin(usable)) if not np.all(usable) else usable.size
    if prefix < 2:
        raise FitError(
            "Plancher numérique atteint avant deux points",
            {"values": [float(v) for v in v_arr], "floor": floor},
        )
    result = stats.linregress(np.log(N_arr[:prefix]), np.log(v_arr[:prefix]))
    stderr = float(result.stderr) if prefix > 2 else 0.0
    return RateFit(
        slope=float(result.slope),
        stderr=stderr,
        intercept=float(result.intercept),
        used=prefix,
        floor=prefix < N_arr.size,
    )
