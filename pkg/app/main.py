"""Point d'entrée en ligne de commande du laboratoire Toeplitz."""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import pydantic
import structlog
from rich.console import Console

from app.config import settings
from app.core.exceptions import ToeplitzLabException
from app.core.logging import configure_logging
from app.models.symbol import Symbol
from app.schemas.experiments import ChiSpec, SweepConfig
from app.services.experiment_runner import ExperimentRunner
from app.services.geometry_service import geometry_from_id
from app.services.quantization import build_basis, build_quadrature, quadrature_report
from app.services.report_writer import (
    emit_kernel_values,
    emit_report,
    render_report,
    report_json,
    write_model_json,
)
from app.services.symbol_parser import parse_symbol
from app.services.toeplitz_service import assemble, write_matrix

logger = structlog.get_logger()
console = Console(stderr=True)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _n_list(text: str) -> List[int]:
    return [int(item) for item in text.replace(" ", "").split(",") if item]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toeplitz-lab",
        description="Laboratoire numérique de quantification de Berezin-Toeplitz",
    )
    parser.add_argument("--config", type=Path, help="Fichier JSON de configuration")
    parser.add_argument("--out-dir", type=Path, default=None, help="Répertoire des sorties")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    quantize = sub.add_parser("quantize", help="Assemble T_{N,f} et écrit la matrice")
    quantize.add_argument("--geometry", default="bargmann")
    quantize.add_argument("--N", type=int, required=True)
    quantize.add_argument("--symbol", required=True)
    quantize.add_argument("--out", type=Path, default=None)
    quantize.add_argument("--format", choices=["binary", "csv"], default="binary")
    quantize.add_argument("--support-radius", type=float, default=1.5)

    compose = sub.add_parser("compose", help="Reste de composition T_f T_g - T_{f⋆g}")
    compose.add_argument("--geometry")
    compose.add_argument("--N-list", type=_n_list, dest="n_list")
    compose.add_argument("--f")
    compose.add_argument("--g")
    compose.add_argument("--J", type=int)
    compose.add_argument("--delta", type=float)

    sweep = sub.add_parser("sweep", help="Expérience décrite par --config")

    funcalc = sub.add_parser("funcalc", help="χ(T_f) par Helffer-Sjöstrand")
    funcalc.add_argument("--geometry")
    funcalc.add_argument("--N-list", type=_n_list, dest="n_list")
    funcalc.add_argument("--symbol", dest="f")
    funcalc.add_argument("--chi-center", type=float)
    funcalc.add_argument("--chi-width", type=float)
    funcalc.add_argument("--chi-shape", choices=["bump", "plateau"])
    funcalc.add_argument("--floor", type=float, dest="floor_power")
    funcalc.add_argument("--M", type=int)

    trace = sub.add_parser("trace", help="Formule de trace")
    trace.add_argument("--geometry")
    trace.add_argument("--N-list", type=_n_list, dest="n_list")
    trace.add_argument("--symbol", dest="f")

    parametrix = sub.add_parser("parametrix", help="Inverse approché de T_{f-z}")
    parametrix.add_argument("--geometry")
    parametrix.add_argument("--N-list", type=_n_list, dest="n_list")
    parametrix.add_argument("--symbol", dest="f")
    parametrix.add_argument("--z", type=complex)
    parametrix.add_argument("--J", type=int)
    parametrix.add_argument("--delta", type=float)

    kernel = sub.add_parser("kernel", help="Développements du noyau")
    kernel.add_argument("--geometry")
    kernel.add_argument("--N-list", type=_n_list, dest="n_list")
    kernel.add_argument("--symbol", dest="f")
    kernel.add_argument("--x", type=complex)
    kernel.add_argument("--J", type=int)

    check = sub.add_parser("check-symbols", help="Certification de classes de symboles")
    check.add_argument("--symbol", dest="f")
    check.add_argument("--order-function", dest="g")
    check.add_argument("--delta", type=float)
    check.add_argument("--N-list", type=_n_list, dest="n_list")

    for experiment in (compose, sweep, funcalc, trace, parametrix, kernel, check):
        experiment.add_argument("--report", type=Path, default=None, help="Copie JSON du rapport")
    return parser


_EXPERIMENTS = {
    "compose": "composition",
    "funcalc": "funcalc",
    "trace": "trace",
    "parametrix": "parametrix",
    "kernel": "kernel",
    "check-symbols": "symbol-class",
}

_PASSTHROUGH = ("geometry", "n_list", "f", "g", "J", "delta", "floor_power", "M")


def build_config(args: argparse.Namespace) -> SweepConfig:
    """Fusionne le fichier --config et les options de la ligne de commande."""
    data: Dict[str, Any] = {}
    if args.config is not None:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.command in _EXPERIMENTS:
        data["experiment"] = _EXPERIMENTS[args.command]
    for name in _PASSTHROUGH:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    z = getattr(args, "z", None)
    if z is not None:
        data["z_re"], data["z_im"] = z.real, z.imag
    x = getattr(args, "x", None)
    if x is not None:
        data["x_re"], data["x_im"] = x.real, x.imag
    if getattr(args, "chi_center", None) is not None:
        chi = dict(data.get("chi") or {})
        chi.update(center=args.chi_center)
        if args.chi_width is not None:
            chi["width"] = args.chi_width
        if args.chi_shape is not None:
            chi["shape"] = args.chi_shape
        data["chi"] = ChiSpec(**chi).model_dump()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.jobs is not None:
        data["jobs"] = args.jobs
    return SweepConfig(**data)


def run_quantize(args: argparse.Namespace, out_dir: Path) -> int:
    geometry = geometry_from_id(args.geometry)
    symbol = Symbol(expr=parse_symbol(args.symbol))
    basis = build_basis(geometry, args.N, args.support_radius)
    rule = build_quadrature(basis)
    matrix = assemble(symbol, basis, rule)
    suffix = "bin" if args.format == "binary" else "csv"
    path = args.out or out_dir / f"T_{geometry.short_id}_N{args.N}.{suffix}"
    write_matrix(matrix, path, fmt=args.format)
    quadrature_path = path.with_name(f"quadrature_{geometry.short_id}_N{args.N}.json")
    write_model_json(quadrature_report(rule), quadrature_path)
    console.print(f"Matrice {matrix.dimension}×{matrix.dimension} écrite dans {path}")
    return EXIT_PASS


def run_report(config: SweepConfig, out_dir: Path, report_path: Optional[Path] = None) -> int:
    runner = ExperimentRunner(config)
    report = runner.run()
    emit_report(report, out_dir)
    if runner.certificate is not None:
        write_model_json(runner.certificate, out_dir / "symbol_certificate.json")
    if runner.kernel_samples:
        emit_kernel_values(runner.kernel_samples, out_dir, report.geometry)
    if report_path is not None:
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(report_json(report), encoding="utf-8")
    render_report(report, console)
    return EXIT_FAIL if report.verdict == "fail" else EXIT_PASS


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    configure_logging(level=args.log_level)
    out_dir = args.out_dir or settings.output_dir

    try:
        if args.command == "quantize":
            return run_quantize(args, out_dir)
        if args.command == "sweep" and args.config is None:
            console.print("[red]La sous-commande sweep exige --config[/red]")
            return EXIT_USAGE
        return run_report(build_config(args), out_dir, getattr(args, "report", None))
    except pydantic.ValidationError as exc:
        logger.error("Configuration invalide", errors=exc.errors(include_url=False))
        console.print(f"[red]Configuration invalide:[/red] {exc}")
        return EXIT_USAGE
    except ToeplitzLabException as exc:
        logger.error(
            "Erreur du laboratoire",
            error_type=exc.error_type,
            error_message=exc.message,
            details=exc.details,
        )
        console.print(f"[red]{exc.error_type}:[/red] {exc.message}")
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        logger.error("Erreur d'entrée/sortie", error_message=str(exc))
        console.print(f"[red]{exc}[/red]")
        return EXIT_USAGE
    except Exception as exc:
        logger.error(
            "Erreur inattendue",
            error_type=exc.__class__.__name__,
            error_message=str(exc),
            exc_info=True,
        )
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
