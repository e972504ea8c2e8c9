import io

import pandas as pd
import pytest

from stt.core.exceptions import ExportException
from stt.schemas.report import RmseReport, TrialTraceDocument, VerificationReport
from stt.schemas.scenario import ScenarioConfig
from stt.services.export import csv_header, export, load_report, report_frame
from stt.services.harness import monte_carlo, run_trial
from stt.services.verification import verify

CFG = ScenarioConfig(n=2, horizon=12, graph={"k": 1})


def test_csv_header_for_two_observers():
    assert csv_header(2) == (
        "step,t_seconds,truth_px,truth_py,truth_pz,truth_vx,truth_vy,truth_vz,"
        "obs0_est_px,obs0_est_py,obs0_est_pz,obs0_est_vx,obs0_est_vy,obs0_est_vz,obs0_err_pos,obs0_err_vel,"
        "obs1_est_px,obs1_est_py,obs1_est_pz,obs1_est_vx,obs1_est_vy,obs1_est_vz,obs1_err_pos,obs1_err_vel"
    )


def test_trace_csv(tmp_path):
    trace = run_trial(CFG, seed=4)
    out = tmp_path / "trace.csv"
    export(trace, "csv", out)
    text = out.read_text()
    assert text.splitlines()[0] == csv_header(2)
    frame = pd.read_csv(io.StringIO(text))
    assert list(frame["step"]) == list(range(1, 13))
    assert frame["t_seconds"].iloc[-1] == pytest.approx(1.2)
    assert frame["obs1_err_pos"].iloc[-1] == pytest.approx(trace.position_errors[-1, 1])


def test_empty_trace_csv_is_header_only(tmp_path):
    trace = run_trial(CFG.model_copy(update={"horizon": 0}), seed=4)
    out = tmp_path / "empty.csv"
    export(trace, "csv", out)
    assert out.read_text() == csv_header(2) + "\n"


def test_trace_json_document(tmp_path):
    trace = run_trial(CFG, seed=4)
    out = tmp_path / "trace.json"
    export(trace, "json", out, seed=4)
    doc = load_report(out, TrialTraceDocument)
    assert doc.seed == 4 and doc.n == 2
    assert doc.columns == csv_header(2).split(",")
    assert len(doc.rows) == 12
    assert len(doc.messages) == 12 and len(doc.messages[0][0]) == 27


def test_report_json_round_trip(tmp_path):
    report = monte_carlo(CFG, trials=2, seed=9)
    out = tmp_path / "rmse.json"
    export(report, "json", out)
    assert load_report(out, RmseReport) == report


def test_exports_are_byte_identical(tmp_path):
    paths = []
    for name in ("a.csv", "b.csv"):
        paths.append(tmp_path / name)
        export(monte_carlo(CFG, trials=2, seed=9), "csv", paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_verification_csv_layout():
    frame = report_frame(verify(["lemma5"]))
    assert list(frame.columns) == ["name", "lhs", "rhs", "passed", "applicable", "detail"]
    assert frame["passed"].all()


def test_stdout_export(capsys):
    export(verify(["lemma5"]), "json", "-")
    assert VerificationReport.model_validate_json(capsys.readouterr().out).passed


def test_missing_directory(tmp_path):
    with pytest.raises(ExportException) as ex:
        export(run_trial(CFG, seed=1), "csv", tmp_path / "missing" / "trace.csv")
    assert ex.value.exit_code == 2


def test_unknown_format(tmp_path):
    with pytest.raises(ExportException):
        export(run_trial(CFG, seed=1), "xml", tmp_path / "trace.xml")


def test_load_report_rejects_wrong_model(tmp_path):
    out = tmp_path / "check.json"
    export(verify(["lemma5"]), "json", out)
    with pytest.raises(ExportException):
        load_report(out, RmseReport)
