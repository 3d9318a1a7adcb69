"""Écriture des rapports de convergence (CSV, JSON) et rendu console."""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import structlog
from pydantic import BaseModel
from rich.console import Console
from rich.table import Table

from app.schemas.experiments import ConvergenceReport

logger = structlog.get_logger()


def _finite(value: Any) -> Any:
    """Remplace ±inf/NaN par None (JSON strict)."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_finite(v) for v in value]
    return value


def compose_summary(report: ConvergenceReport) -> Dict[str, Any]:
    """Résumé du reste de composition: erreurs par N, pente ajustée et prédite."""
    errors = {row.N: row.value for row in report.series("error_norm")}
    per_N = [
        {"N": row.N, "err_norm": errors.get(row.N), "normalized_err": row.value}
        for row in report.series("normalized_error")
    ]
    fit = next((fit for fit in report.fits if fit.metric == "normalized_error"), None)
    return {
        "per_N": per_N,
        "fitted_slope": None if fit is None else fit.slope,
        "predicted_slope": None if fit is None else fit.predicted,
        "pass": None if fit is None else fit.passed,
    }


def report_payload(report: ConvergenceReport) -> dict:
    payload = report.model_dump(mode="json", by_alias=True)
    if report.experiment == "composition":
        payload.update(compose_summary(report))
    return _finite(payload)


def report_json(report: ConvergenceReport) -> str:
    return json.dumps(report_payload(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def emit_report(
    report: ConvergenceReport, out_dir: Path, stem: Optional[str] = None
) -> Tuple[Path, Path]:
    """
    Écrit `<stem>.csv` (metric,N,value) et `<stem>.json`.

    Les sorties sont identiques octet par octet pour une même configuration.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or f"{report.experiment}_{report.geometry}"
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"

    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["metric", "N", "value"])
        for row in report.rows:
            writer.writerow([row.metric, row.N, f"{row.value:.16e}"])
    json_path.write_text(report_json(report), encoding="utf-8")

    logger.info("Rapport écrit", csv=str(csv_path), json=str(json_path), verdict=report.verdict)
    return csv_path, json_path


def write_model_json(model: BaseModel, path: Path) -> Path:
    """JSON trié d'un modèle Pydantic (certificats, rapports de quadrature)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = _finite(model.model_dump(mode="json", by_alias=True))
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    logger.info("JSON écrit", path=str(path), model=model.__class__.__name__)
    return path


def emit_kernel_values(
    samples: Dict[int, Sequence[Tuple[complex, complex, complex]]], out_dir: Path, geometry: str
) -> List[Path]:
    """
    Écrit `kernel_<géométrie>_N<N>.csv` (x_re,x_im,y_re,y_im,value) pour chaque N.

    value est le module du noyau pondéré, seule quantité indépendante de la jauge.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for N in sorted(samples):
        path = out_dir / f"kernel_{geometry}_N{N}.csv"
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["x_re", "x_im", "y_re", "y_im", "value"])
            for x, y, value in samples[N]:
                writer.writerow(
                    [f"{x.real:.16e}", f"{x.imag:.16e}", f"{y.real:.16e}", f"{y.imag:.16e}", f"{abs(value):.16e}"]
                )
        paths.append(path)
    logger.info("Valeurs du noyau écrites", files=len(paths), geometry=geometry)
    return paths


def render_report(report: ConvergenceReport, console: Optional[Console] = None) -> None:
    """Tableau rich des ajustements et du verdict."""
    console = console or Console(stderr=True)
    table = Table(title=f"{report.experiment} ({report.geometry})")
    table.add_column("Métrique")
    table.add_column("Type")
    table.add_column("Pente", justify="right")
    table.add_column("Valeur", justify="right")
    table.add_column("Prédiction", justify="right")
    table.add_column("Verdict")

    def fmt(value: Optional[float]) -> str:
        return "-" if value is None else f"{value:.4g}"

    for fit in report.fits:
        verdict = {True: "[green]ok[/green]", False: "[red]échec[/red]", None: "-"}[fit.passed]
        if fit.floor:
            verdict += " (plancher)"
        table.add_row(fit.metric, fit.kind, fmt(fit.slope), fmt(fit.value), fmt(fit.predicted), verdict)
    console.print(table)
    colour = {"pass": "green", "fail": "red", "no-op": "yellow"}[report.verdict]
    console.print(f"Verdict: [{colour}]{report.verdict}[/{colour}]")
    for note in report.notes:
        console.print(f"[dim]{note}[/dim]")
