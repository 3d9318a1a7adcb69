"""Tests du harnais d'expériences: ajustement des pentes, rapports et ligne de commande."""

import csv
import json
import sys
from pathlib import Path

import numpy as np
import pydantic
import pytest

# Ajouter le répertoire racine au path
sys.path.append(str(Path(__file__).parent))

from app.core.exceptions import FitError
from app.main import main
from app.schemas.experiments import ChiSpec, ConvergenceReport, FitResult, ReportRow, SweepConfig
from app.services.experiment_runner import ExperimentRunner, run_experiment
from app.services.rate_fitting import fit_rate
from app.services.report_writer import emit_report, report_payload
from app.services.toeplitz_service import read_matrix


def test_fit_rate_recovers_power_law():
    """3·N^{-2} donne une pente -2 et une prédiction exacte."""
    N = np.array([32, 64, 128, 256])
    fit = fit_rate(N, 3.0 * N ** -2.0)
    assert fit.slope == pytest.approx(-2.0, abs=1e-10)
    assert fit.used == 4
    assert not fit.floor
    assert fit.predict(64) == pytest.approx(3.0 / 64 ** 2)


def test_fit_rate_stops_at_floor():
    """Seul le préfixe au-dessus du plancher numérique est ajusté."""
    fit = fit_rate([10, 20, 40, 80], [1e-3, 2.5e-4, 1e-15, 1e-16])
    assert fit.used == 2
    assert fit.floor
    assert fit.slope == pytest.approx(-2.0)


def test_fit_rate_tolerates_noise():
    """5 % de bruit multiplicatif sur N^{-1} laisse la pente dans [-1.15, -0.85]."""
    rng = np.random.default_rng(0)
    N = np.array([32, 48, 64, 96, 128, 192, 256])
    values = N ** -1.0 * (1 + 0.05 * rng.uniform(-1, 1, N.size))
    fit = fit_rate(N, values)
    assert -1.15 <= fit.slope <= -0.85
    assert fit.stderr > 0


def test_fit_rate_errors():
    with pytest.raises(FitError):
        fit_rate([10, 20], [1e-2, 1e-3])
    with pytest.raises(FitError):
        fit_rate([10, 20, 40], [1e-2, 1e-15, 1e-16])


def test_sweep_config_validation():
    """Listes de N croissantes, au moins trois N pour une pente, g requis pour composer."""
    with pytest.raises(pydantic.ValidationError):
        SweepConfig(experiment="projection", n_list=[16, 8])
    with pytest.raises(pydantic.ValidationError):
        SweepConfig(experiment="projection", n_list=[])
    with pytest.raises(pydantic.ValidationError):
        SweepConfig(experiment="kernel", n_list=[16, 32])
    with pytest.raises(pydantic.ValidationError):
        SweepConfig(experiment="composition", n_list=[8, 16, 32])
    with pytest.raises(pydantic.ValidationError):
        SweepConfig(experiment="projection", unknown_field=1)
    config = SweepConfig(experiment="parametrix", n_list=[8, 16, 32], z_re=-1.0, z_im=0.5)
    assert config.spectral_parameter == complex(-1.0, 0.5)


def test_projection_experiment_passes():
    """T_{N,1} = I: verdict pass, une ligne par N."""
    config = SweepConfig(experiment="projection", geometry="cp1", n_list=[8, 16])
    report = run_experiment(config)
    assert report.verdict == "pass"
    assert [row.N for row in report.series("identity_error")] == [8, 16]
    assert all(row.value < 1e-9 for row in report.rows)


def test_exact_composition_is_reported_at_floor():
    """|z|² ⋆ |z|² est exact à J = 1: l'ajustement est marqué au plancher et réussit."""
    config = SweepConfig(
        experiment="composition",
        geometry="bargmann",
        n_list=[8, 12, 16],
        f="z*conj(z)",
        g="z*conj(z)",
        J=1,
    )
    report = run_experiment(config)
    assert report.verdict == "pass"
    fit = next(fit for fit in report.fits if fit.metric == "normalized_error")
    assert fit.floor
    assert fit.passed


def test_symbol_class_experiment_records_certificate():
    config = SweepConfig(experiment="symbol-class", f="bump(0, 1.2)", n_list=[10, 100, 1000])
    runner = ExperimentRunner(config)
    report = runner.run()
    assert report.verdict == "pass"
    assert runner.certificate is not None and runner.certificate.certified
    assert any(row.metric == "C_alpha(0,0)" for row in report.rows)


def test_empty_sweep_is_no_op():
    """Aucune ligne mesurée: verdict no-op."""
    runner = ExperimentRunner(SweepConfig(experiment="projection", n_list=[8]))
    report = runner._report([], [])
    assert report.verdict == "no-op"


def test_empty_report_files(tmp_path):
    """Un rapport vide donne des fichiers valides aux tableaux vides."""
    report = ConvergenceReport(experiment="trace", geometry="cp1")
    csv_path, json_path = emit_report(report, tmp_path)
    assert csv_path.read_text(encoding="utf-8") == "metric,N,value\n"
    payload = json.loads(json_path.read_text(encoding="utf-8"))
    assert payload["rows"] == [] and payload["fits"] == []
    assert payload["verdict"] == "no-op"


def _report() -> ConvergenceReport:
    return ConvergenceReport(
        experiment="composition",
        geometry="bargmann",
        rows=[
            ReportRow(metric="normalized_error", N=64, value=2.5e-4),
            ReportRow(metric="normalized_error", N=32, value=1e-3),
        ],
        fits=[FitResult(metric="normalized_error", slope=float("inf"), passed=True)],
        verdict="pass",
    )


def test_report_files(tmp_path):
    """CSV metric,N,value trié; JSON trié avec inf remplacé par null."""
    csv_path, json_path = emit_report(_report(), tmp_path)
    with open(csv_path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["metric", "N", "value"]
    assert [row[1] for row in rows[1:]] == ["32", "64"]
    assert rows[1][2] == "1.0000000000000000e-03"

    payload = json.loads(json_path.read_text(encoding="utf-8"))
    assert payload["fits"][0]["slope"] is None
    assert payload["fits"][0]["pass"] is True
    assert report_payload(_report()) == payload


def test_reports_are_deterministic(tmp_path):
    """Deux exécutions de la même configuration écrivent des fichiers identiques."""
    config = SweepConfig(experiment="projection", geometry="cp1", n_list=[8, 16], seed=3)
    first = emit_report(run_experiment(config), tmp_path / "a")
    second = emit_report(run_experiment(config), tmp_path / "b")
    for left, right in zip(first, second):
        assert left.read_bytes() == right.read_bytes()


def test_cli_rejects_invalid_config(tmp_path):
    """Une configuration invalide donne le code de sortie 2."""
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"experiment": "composition", "n_list": [8, 16, 32]}))
    assert main(["--config", str(config), "--out-dir", str(tmp_path), "sweep"]) == 2

    config.write_text(json.dumps({"experiment": "projection", "n_list": [16, 8]}))
    assert main(["--config", str(config), "--out-dir", str(tmp_path), "sweep"]) == 2

    assert main(["--out-dir", str(tmp_path), "sweep"]) == 2
    assert main(["--out-dir", str(tmp_path), "quantize", "--N", "4", "--symbol", "z +"]) == 2
    assert main(["--out-dir", str(tmp_path), "trace", "--N-list", "8,16", "--geometry", "torus"]) == 2


def test_cli_sweep_writes_report(tmp_path):
    config = tmp_path / "projection.json"
    config.write_text(json.dumps({"experiment": "projection", "geometry": "cp1", "n_list": [8, 16]}))
    assert main(["--config", str(config), "--out-dir", str(tmp_path), "sweep"]) == 0
    assert (tmp_path / "projection_cp1.csv").exists()
    payload = json.loads((tmp_path / "projection_cp1.json").read_text(encoding="utf-8"))
    assert payload["verdict"] == "pass"


def test_cli_quantize_writes_matrix(tmp_path):
    out = tmp_path / "T.bin"
    code = main(
        ["quantize", "--geometry", "cp1", "--N", "4", "--symbol", "z*conj(z)", "--out", str(out)]
    )
    assert code == 0
    matrix = read_matrix(out)
    assert matrix.shape == (5, 5)
    np.testing.assert_allclose(np.diag(matrix).imag, 0.0, atol=1e-14)


GAUSSIAN = "exp(-z*conj(z))"
SHIFTED_GAUSSIAN = "exp(-(z - 0.5)*(conj(z) - 0.5))"
SWEEP = [32, 64, 128, 256]


def _fit(report: ConvergenceReport, metric: str) -> FitResult:
    return next(fit for fit in report.fits if fit.metric == metric)


def test_commutator_matches_poisson_bracket():
    """‖[T_f,T_g] - (1/(iN))T_{{f,g}}‖ décroît au moins comme N^{-1.8} sur Bargmann."""
    config = SweepConfig(
        experiment="commutator", geometry="bargmann", n_list=SWEEP, f=GAUSSIAN, g=SHIFTED_GAUSSIAN
    )
    report = run_experiment(config)
    fit = _fit(report, "commutator_residual")
    assert fit.slope <= -1.8
    assert report.verdict == "pass"


def test_composition_remainder_rate():
    """δ = 0, J = 1: le reste normalisé de T_f T_g - T_{h₀ + N^{-1}h₁} a une pente <= -1.6."""
    config = SweepConfig(
        experiment="composition", geometry="bargmann", n_list=SWEEP, f=GAUSSIAN, g=SHIFTED_GAUSSIAN, J=1
    )
    report = run_experiment(config)
    fit = _fit(report, "normalized_error")
    assert fit.slope <= -1.6
    assert fit.predicted == -2.0
    assert report.verdict == "pass"


def test_trace_defect_is_bounded_on_cp1():
    """Symbole bosse sur CP¹: |Tr T_f - (N/2π)∫f| reste borné (rapport < 3)."""
    config = SweepConfig(experiment="trace", geometry="cp1", n_list=SWEEP, f="bump(0, 1.2)")
    report = run_experiment(config)
    assert _fit(report, "trace_defect").value < 3.0
    assert _fit(report, "trace_kernel_defect").passed
    assert report.verdict == "pass"


def test_functional_calculus_principal_symbol_rate():
    """CP¹, f = h + 2: ‖χ(T_f) - T_{χ∘f}‖ a une pente <= -0.7; HS concorde avec l'oracle."""
    config = SweepConfig(
        experiment="funcalc",
        geometry="cp1",
        n_list=SWEEP,
        f="(1 - z*conj(z))/(1 + z*conj(z)) + 2",
        chi=ChiSpec(center=2.0, width=1.0),
        hs_max_n=32,
    )
    report = run_experiment(config)
    assert _fit(report, "principal_symbol_error").slope <= -0.7
    assert _fit(report, "hs_oracle_gap").value < 1e-6
    assert report.verdict == "pass"


def test_parametrix_residual_rate():
    """Bargmann, f = e^{-|z|²} + 2, z = 0, J = 1: résidus en N^{-2} des deux côtés."""
    config = SweepConfig(experiment="parametrix", geometry="bargmann", n_list=SWEEP, f=f"{GAUSSIAN} + 2", J=1)
    report = run_experiment(config)
    for metric in ("right_residual", "left_residual"):
        fit = _fit(report, metric)
        assert fit.slope <= -1.7
        assert fit.tolerance == 0.3
    assert _fit(report, "sided_gap").passed
    assert report.verdict == "pass"


def test_kernel_expansions_on_bargmann():
    """Résidus diagonaux et hors diagonale en N^{-(J+1)}, facteur gaussien à 1e-8."""
    config = SweepConfig(experiment="kernel", geometry="bargmann", n_list=[16, 32, 64, 128], f=GAUSSIAN, J=2)
    runner = ExperimentRunner(config)
    report = runner.run()
    for J in range(3):
        for side in ("diagonal", "offdiagonal"):
            fit = _fit(report, f"{side}_residual_J{J}")
            assert fit.kind == "slope_at_most"
            assert fit.passed
    assert _fit(report, "gaussian_factor_defect").value < 1e-8
    assert report.verdict == "pass"
    # e^{Δ/N}e^{-|z|²} = N/(N+1) en 0
    x, _, value = runner.kernel_samples[64][0]
    assert x == 0
    assert value.real == pytest.approx(64 / (2 * np.pi) * 64 / 65, rel=1e-8)


def test_kernel_amplitude_identity_on_cp1():
    config = SweepConfig(experiment="kernel", geometry="cp1", n_list=[16, 32, 64], f=GAUSSIAN, J=1)
    report = run_experiment(config)
    assert _fit(report, "amplitude_identity").value < 1e-12


def test_cli_compose_report_schema(tmp_path):
    """--report écrit le rapport avec per_N, pentes ajustée et prédite, verdict."""
    out = tmp_path / "compose.json"
    code = main(
        [
            "--out-dir", str(tmp_path),
            "compose", "--geometry", "bargmann", "--N-list", "8,12,16",
            "--f", "z*conj(z)", "--g", "z*conj(z)", "--J", "1", "--report", str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert [entry["N"] for entry in payload["per_N"]] == [8, 12, 16]
    assert set(payload["per_N"][0]) == {"N", "err_norm", "normalized_err"}
    assert payload["predicted_slope"] == -2.0
    assert payload["pass"] is True
    assert payload["verdict"] == "pass"
    assert payload["config_echo"]["f"] == "z*conj(z)"
    assert {"metric", "slope", "stderr", "predicted", "tolerance", "pass"} <= set(payload["fits"][0])
    assert out.read_text(encoding="utf-8") == (tmp_path / "composition_bargmann.json").read_text(encoding="utf-8")


def test_cli_kernel_writes_values(tmp_path):
    """Un CSV x_re,x_im,y_re,y_im,value par N."""
    code = main(
        [
            "--out-dir", str(tmp_path),
            "kernel", "--geometry", "bargmann", "--N-list", "16,32,64", "--symbol", GAUSSIAN, "--J", "1",
        ]
    )
    assert code == 0
    with open(tmp_path / "kernel_bargmann_N16.csv", newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["x_re", "x_im", "y_re", "y_im", "value"]
    assert len(rows) == 4
    assert float(rows[1][4]) == pytest.approx(16 / (2 * np.pi) * 16 / 17, rel=1e-8)
    assert float(rows[3][2]) == pytest.approx(0.25)
    assert (tmp_path / "kernel_bargmann_N64.csv").exists()


def test_cli_quantize_writes_quadrature_report(tmp_path):
    out = tmp_path / "T.bin"
    assert main(["quantize", "--geometry", "cp1", "--N", "8", "--symbol", "1", "--out", str(out)]) == 0
    payload = json.loads((tmp_path / "quadrature_cp1_N8.json").read_text(encoding="utf-8"))
    assert payload["model"] == "cp1"
    assert payload["dimension"] == 9
    assert payload["norm_residual"] <= payload["target"]
