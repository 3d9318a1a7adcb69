"""Service d'exécution des expériences de convergence sur une liste de N."""

from concurrent.futures import ThreadPoolExecutor
from math import pi
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import structlog

from app.config import settings
from app.core.exceptions import FitError, ValidationError
from app.models.geometry import ModelGeometry, ModelId
from app.models.symbol import OrderFunction, Symbol, unit_order_function
from app.models.symbol_expr import ONE, Const, add, evaluate
from app.schemas.experiments import ConvergenceReport, FitResult, ReportRow, SweepConfig
from app.services.almost_analytic import build_almost_analytic_extension
from app.services.functional_calculus import (
    functional_calculus_symbol,
    hs_function_of_operator,
    parametrix_symbol,
    spectral_function_oracle,
)
from app.services.geometry_service import geometry_from_id
from app.services.kernel_expansion import (
    diagonal_kernel_expansion,
    gaussian_factor,
    offdiagonal_kernel_expansion,
)
from app.services.quantization import (
    build_basis,
    build_quadrature,
    kernel_amplitude_identity,
    random_pairs,
    weighted_bergman_kernel_at,
)
from app.services.rate_fitting import fit_rate
from app.services.star_product import commutator_symbol, star_series
from app.services.symbol_classes import (
    check_order_function,
    check_symbol_class,
    dilate_symbol,
)
from app.services.symbol_parser import parse_symbol
from app.services.toeplitz_service import (
    assemble,
    assemble_series,
    compose,
    operator_norm,
    trace,
    trace_by_kernel,
    weighted_kernel_at,
)

logger = structlog.get_logger()

EXACT_THRESHOLD = 1e-9
EXACT_TOLERANCE = 1e-9
TRACE_RATIO_LIMIT = 3.0
AMPLITUDE_TOLERANCE = 1e-12
GAUSSIAN_TOLERANCE = 1e-8

Metrics = Dict[str, float]


def _block_norm(matrix: np.ndarray, geometry: ModelGeometry, fraction: Optional[float] = None) -> float:
    """Norme d'opérateur restreinte au bloc hors coin de troncature."""
    if geometry.model_id is ModelId.BARGMANN:
        fraction = settings.truncation_corner if fraction is None else fraction
        keep = int(np.floor(matrix.shape[0] * (1 - fraction)))
        matrix = matrix[:keep, :keep]
    return operator_norm(matrix)


class ExperimentRunner:
    """Exécute une expérience de `SweepConfig` et construit le rapport."""

    def __init__(self, config: SweepConfig):
        self.config = config
        self.geometry = geometry_from_id(config.geometry)
        self.f = self._symbol(config.f)
        self.g = self._symbol(config.g) if config.g is not None else None
        self.notes: List[str] = []
        self._context: Dict[str, object] = {}

    def _symbol(self, text: str) -> Symbol:
        tree = parse_symbol(text)
        if self.config.delta > 0 and self.config.experiment in {"composition", "commutator"}:
            return dilate_symbol(tree, self.config.delta)
        return Symbol(expr=tree, delta=self.config.delta)

    def _level(self, N: int):
        basis = build_basis(self.geometry, N, self.config.support_radius)
        return basis, build_quadrature(basis)

    # Mesures par valeur de N

    def _projection(self, N: int) -> Metrics:
        basis, rule = self._level(N)
        identity = assemble(ONE, basis, rule)
        error = float(np.max(np.abs(identity.entries - np.eye(basis.dimension))))
        return {"identity_error": error}

    def _composition(self, N: int) -> Metrics:
        basis, rule = self._level(N)
        Tf = assemble(self.f, basis, rule)
        Tg = assemble(self.g, basis, rule)
        series = self._context["series"]
        Tseries = assemble_series(series.terms, basis, rule)
        difference = compose(Tf, Tg).entries - Tseries.entries
        error = _block_norm(difference, self.geometry)
        scale = operator_norm(Tf) * operator_norm(Tg)
        return {"error_norm": error, "normalized_error": error / scale if scale > 0 else error}

    def _commutator(self, N: int) -> Metrics:
        basis, rule = self._level(N)
        Tf = assemble(self.f, basis, rule)
        Tg = assemble(self.g, basis, rule)
        predicted = assemble(self._context["commutator_symbol"], basis, rule)
        bracket = Tf.entries @ Tg.entries - Tg.entries @ Tf.entries
        residual = _block_norm(bracket - predicted.entries / N, self.geometry)
        return {"commutator_residual": residual}

    def _trace(self, N: int) -> Metrics:
        basis, rule = self._level(N)
        Tf = assemble(self.f, basis, rule)
        integral = 0j
        for rows, nodes in rule.row_chunks():
            values = evaluate(self.f.realized, nodes, N=N)
            integral += np.sum(rule.row_weights(weighted=False)[rows, None] * values)
        prediction = N / (2 * pi) * integral
        value = trace(Tf)
        return {
            "trace_defect": abs(value - prediction),
            "trace_kernel_defect": abs(value - trace_by_kernel(Tf, basis, rule))
            / max(1.0, float(np.sum(np.abs(np.diag(Tf.entries))))),
        }

    def _funcalc(self, N: int) -> Metrics:
        basis, rule = self._level(N)
        Tf = assemble(self.f, basis, rule)
        chi = self.config.chi
        oracle = spectral_function_oracle(Tf, chi)
        principal = assemble(self._context["principal_symbol"], basis, rule)
        metrics = {"principal_symbol_error": _block_norm(oracle - principal.entries, self.geometry)}
        if N <= self.config.hs_max_n:
            floor = float(N) ** (-self.config.floor_power)
            result = hs_function_of_operator(Tf, self._context["extension"], floor=floor)
            metrics["hs_oracle_gap"] = operator_norm(result.matrix - oracle)
            metrics["hs_budget"] = result.budget
        return metrics

    def _parametrix(self, N: int) -> Metrics:
        basis, rule = self._level(N)
        z = self.config.spectral_parameter
        shifted = assemble(add(self.f.realized, Const(-z)), basis, rule).entries
        right = assemble_series(self._context["right"].terms, basis, rule).entries
        left = assemble_series(self._context["left"].terms, basis, rule).entries
        identity = np.eye(basis.dimension)
        return {
            "right_residual": _block_norm(shifted @ right - identity, self.geometry),
            "left_residual": _block_norm(left @ shifted - identity, self.geometry),
            "sided_gap": _block_norm(left - right, self.geometry),
        }

    def _kernel(self, N: int) -> Metrics:
        basis, rule = self._level(N)
        Tf = assemble(self.f, basis, rule)
        x = self.config.kernel_point
        scale = N / (2 * pi)
        metrics: Metrics = {}
        measured = weighted_kernel_at(Tf, basis, x, x.conjugate())
        for J in self._context["orders"]:
            predicted = diagonal_kernel_expansion(self.f, x, J, self.geometry, N)
            metrics[f"diagonal_residual_J{J}"] = abs(measured - predicted) / scale
        y = x + N ** -0.5
        measured_off = weighted_kernel_at(Tf, basis, x, y.conjugate())
        self._context["kernel_samples"][N] = [
            (x, x, measured),
            (y, y, weighted_kernel_at(Tf, basis, y, y.conjugate())),
            (x, y, measured_off),
        ]
        if self.geometry.model_id is ModelId.BARGMANN:
            bergman = weighted_bergman_kernel_at(basis, x, y.conjugate())
            metrics["gaussian_factor_defect"] = abs(abs(bergman) / scale / gaussian_factor(x, y, N) - 1)
            for J in self._context["orders"]:
                predicted = offdiagonal_kernel_expansion(self.f, x, y.conjugate(), J, self.geometry, N)
                metrics[f"offdiagonal_residual_J{J}"] = abs(measured_off - predicted) / scale
        else:
            pairs = random_pairs(0.5, 16, seed=self.config.seed, max_gap=0.25)
            metrics["amplitude_identity"] = kernel_amplitude_identity(basis, pairs)
        return metrics

    # Préparation (hors boucle sur N)

    def _prepare(self) -> None:
        experiment = self.config.experiment
        if experiment == "composition":
            self._context["series"] = star_series(self.f, self.g, self.config.J, self.geometry)
        elif experiment == "commutator":
            self._context["commutator_symbol"] = commutator_symbol(self.f, self.g, self.geometry)
        elif experiment == "funcalc":
            if self.config.chi is None:
                raise ValidationError("L'expérience funcalc exige une spécification chi")
            self._context["principal_symbol"] = functional_calculus_symbol(self.f, self.config.chi)
            extension = build_almost_analytic_extension(self.config.chi, M_target=self.config.M)
            self._context["extension"] = extension
            self.notes.append(f"pente mesurée de ∂̄χ̃: {extension.measured_slope:.3f}")
        elif experiment == "parametrix":
            z = self.config.spectral_parameter
            for side in ("right", "left"):
                self._context[side] = parametrix_symbol(self.f, z, self.config.J, self.geometry, side)
        elif experiment == "kernel":
            top = self.config.J if self.geometry.model_id is ModelId.BARGMANN else min(self.config.J, 1)
            self._context["orders"] = list(range(top + 1))
            self._context["kernel_samples"] = {}

    def _measure(self) -> Callable[[int], Metrics]:
        return {
            "projection": self._projection,
            "composition": self._composition,
            "commutator": self._commutator,
            "trace": self._trace,
            "funcalc": self._funcalc,
            "parametrix": self._parametrix,
            "kernel": self._kernel,
        }[self.config.experiment]

    def _sweep(self) -> List[ReportRow]:
        measure = self._measure()

        def run_one(N: int) -> Tuple[int, Metrics]:
            logger.info("Mesure", experiment=self.config.experiment, N=N)
            return N, measure(N)

        if self.config.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.config.jobs) as executor:
                results = list(executor.map(run_one, self.config.n_list))
        else:
            results = [run_one(N) for N in self.config.n_list]
        return [
            ReportRow(metric=metric, N=N, value=float(value))
            for N, metrics in results
            for metric, value in metrics.items()
        ]

    # Ajustements et verdicts

    @staticmethod
    def _values(rows: List[ReportRow], metric: str) -> Tuple[List[int], List[float]]:
        selected = sorted((row for row in rows if row.metric == metric), key=lambda row: row.N)
        return [row.N for row in selected], [row.value for row in selected]

    def _slope(
        self, rows: List[ReportRow], metric: str, predicted: float, tolerance: float, provenance: str
    ) -> FitResult:
        Ns, values = self._values(rows, metric)
        if values and max(values) < EXACT_THRESHOLD:
            return FitResult(
                metric=metric,
                kind="slope_at_most",
                value=max(values),
                predicted=predicted,
                tolerance=tolerance,
                provenance=f"{provenance} (exact au plancher)",
                floor=True,
                passed=True,
            )
        try:
            fit = fit_rate(Ns, values)
        except FitError as exc:
            self.notes.append(f"{metric}: {exc.message}")
            return FitResult(
                metric=metric,
                predicted=predicted,
                tolerance=tolerance,
                provenance=provenance,
                floor=True,
                passed=False,
            )
        return FitResult(
            metric=metric,
            kind="slope_at_most",
            slope=fit.slope,
            stderr=fit.stderr,
            predicted=predicted,
            tolerance=tolerance,
            provenance=provenance,
            floor=fit.floor,
            passed=fit.slope <= predicted + tolerance,
        )

    def _bound(
        self, rows: List[ReportRow], metric: str, threshold: float, provenance: str
    ) -> FitResult:
        _, values = self._values(rows, metric)
        worst = max(values) if values else 0.0
        return FitResult(
            metric=metric,
            kind="value_below",
            value=worst,
            predicted=threshold,
            provenance=provenance,
            passed=worst < threshold,
        )

    def _fits(self, rows: List[ReportRow]) -> List[FitResult]:
        config = self.config
        experiment = config.experiment
        delta, J = config.delta, config.J
        fits: List[FitResult] = []
        if experiment == "projection":
            fits.append(self._bound(rows, "identity_error", EXACT_TOLERANCE, "T_{N,1} = I"))
        elif experiment == "composition":
            predicted = -(J + 1) * (1 - 2 * delta)
            tolerance = 0.4 if delta == 0 else 0.5
            fit = self._slope(rows, "normalized_error", predicted, tolerance, "reste de composition")
            if delta > 0 and fit.slope is not None:
                fit.passed = bool(fit.passed and fit.slope < 0)
            fits.append(fit)
        elif experiment == "commutator":
            fits.append(
                self._slope(rows, "commutator_residual", -2 + 2 * delta, 0.2, "correspondance de Poisson")
            )
        elif experiment == "trace":
            _, values = self._values(rows, "trace_defect")
            ratio = max(values) / min(values) if values and min(values) > 0 else 1.0
            fits.append(
                FitResult(
                    metric="trace_defect",
                    kind="ratio_below",
                    value=ratio,
                    predicted=TRACE_RATIO_LIMIT,
                    provenance="formule de trace, reste O(N^0)",
                    passed=ratio < TRACE_RATIO_LIMIT,
                )
            )
            fits.append(self._bound(rows, "trace_kernel_defect", 1e-8, "trace par le noyau"))
        elif experiment == "funcalc":
            fits.append(
                self._slope(rows, "principal_symbol_error", -1.0, 0.3, "symbole principal χ∘f")
            )
            if any(row.metric == "hs_oracle_gap" for row in rows):
                fits.append(self._bound(rows, "hs_oracle_gap", 1e-6, "oracle spectral"))
                gaps = dict(zip(*self._values(rows, "hs_oracle_gap")))
                budgets = dict(zip(*self._values(rows, "hs_budget")))
                within = all(gaps[N] <= budgets[N] + 1e-12 for N in gaps)
                fits.append(
                    FitResult(
                        metric="hs_budget",
                        kind="record",
                        value=max(budgets.values()),
                        provenance="budget HS >= écart à l'oracle",
                        passed=within,
                    )
                )
        elif experiment == "parametrix":
            predicted = -(J + 1) * (1 - 2 * delta)
            for metric in ("right_residual", "left_residual"):
                fits.append(self._slope(rows, metric, predicted, 0.3, "parametrix"))
            fits.append(self._sided_gap(rows))
        elif experiment == "kernel":
            for J_order in self._context["orders"]:
                fits.append(
                    self._slope(
                        rows, f"diagonal_residual_J{J_order}", -(J_order + 1), 0.3, "développement diagonal"
                    )
                )
                if self.geometry.model_id is ModelId.BARGMANN:
                    fits.append(
                        self._slope(
                            rows,
                            f"offdiagonal_residual_J{J_order}",
                            -(J_order + 1),
                            0.3,
                            "développement hors diagonale, |x-y| = N^{-1/2}",
                        )
                    )
            if self.geometry.model_id is ModelId.BARGMANN:
                fits.append(
                    self._bound(
                        rows, "gaussian_factor_defect", GAUSSIAN_TOLERANCE, "|K_N(x,y)| = (N/2π)e^{-N|x-y|²/2}"
                    )
                )
            if self.geometry.model_id is ModelId.PROJECTIVE_LINE:
                fits.append(
                    self._bound(rows, "amplitude_identity", AMPLITUDE_TOLERANCE, "b₁ = 1, b_{≥2} = 0")
                )
        return fits

    def _sided_gap(self, rows: List[ReportRow]) -> FitResult:
        gaps = dict(zip(*self._values(rows, "sided_gap")))
        right = dict(zip(*self._values(rows, "right_residual")))
        left = dict(zip(*self._values(rows, "left_residual")))
        ratio = max(gaps[N] / (right[N] + left[N] + 1e-300) for N in gaps) if gaps else 0.0
        return FitResult(
            metric="sided_gap",
            kind="ratio_below",
            value=ratio,
            predicted=10.0,
            provenance="inverse à gauche ≈ inverse à droite",
            passed=ratio < 10.0 or max(gaps.values(), default=0.0) < EXACT_THRESHOLD,
        )

    def _symbol_class(self) -> ConvergenceReport:
        config = self.config
        N_list = [float(N) for N in config.n_list]
        if config.g is not None:
            m = OrderFunction(expr=parse_symbol(config.g), delta=config.delta)
            order_certificate = check_order_function(m, config.delta, N_list)
            fits = [
                FitResult(
                    metric="order_function",
                    kind="record",
                    value=order_certificate.C,
                    provenance=f"M0 = {order_certificate.M0}",
                    passed=order_certificate.certified,
                )
            ]
        else:
            m = unit_order_function(config.delta)
            fits = []
        certificate = check_symbol_class(self.f, m, N_list, delta=config.delta)
        rows = [
            ReportRow(metric=f"C_alpha{alpha}", N=int(N), value=value)
            for alpha, constants in certificate.per_N.items()
            for N, value in zip(N_list, constants)
            if np.isfinite(value)
        ]
        fits.append(
            FitResult(
                metric="symbol_class",
                kind="record",
                value=certificate.C,
                provenance="|∂^α f| <= C_α N^{δ|α|} m",
                passed=certificate.certified,
            )
        )
        self._context["certificate"] = certificate
        return self._report(rows, fits)

    def _report(self, rows: List[ReportRow], fits: List[FitResult]) -> ConvergenceReport:
        if not rows:
            verdict = "no-op"
        elif any(fit.passed is False for fit in fits):
            verdict = "fail"
        else:
            verdict = "pass"
        return ConvergenceReport(
            experiment=self.config.experiment,
            geometry=self.geometry.short_id,
            rows=rows,
            fits=fits,
            verdict=verdict,
            notes=self.notes,
            config_echo=self.config.model_dump(mode="json"),
        )

    def run(self) -> ConvergenceReport:
        """Exécute l'expérience; déterministe pour une configuration et une graine données."""
        logger.info(
            "Début de l'expérience",
            experiment=self.config.experiment,
            geometry=self.geometry.short_id,
            N_list=self.config.n_list,
        )
        if self.config.experiment == "symbol-class":
            report = self._symbol_class()
        else:
            self._prepare()
            rows = self._sweep()
            report = self._report(rows, self._fits(rows))
        logger.info("Fin de l'expérience", experiment=self.config.experiment, verdict=report.verdict)
        return report

    @property
    def certificate(self):
        return self._context.get("certificate")

    @property
    def kernel_samples(self) -> Dict[int, List[Tuple[complex, complex, complex]]]:
        """(x, y, noyau pondéré) mesurés par l'expérience kernel, par N."""
        return self._context.get("kernel_samples", {})


def run_experiment(config: SweepConfig) -> ConvergenceReport:
    return ExperimentRunner(config).run()
