# stt/services/export.py
import io
import logging
import sys
from pathlib import Path
from typing import List, Optional, Type, TypeVar, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from stt.core.exceptions import ExportException
from stt.models.trace import TrialTrace
from stt.schemas.report import (
    CompareReport,
    RmseReport,
    SweepReport,
    TrialTraceDocument,
    VerificationReport,
)

logger = logging.getLogger(__name__)

TRUTH_COLUMNS = ["truth_px", "truth_py", "truth_pz", "truth_vx", "truth_vy", "truth_vz"]
STATE_SUFFIXES = ["px", "py", "pz", "vx", "vy", "vz"]

ReportT = TypeVar("ReportT", bound=BaseModel)


def csv_columns(n: int) -> List[str]:
    columns = ["step", "t_seconds"] + TRUTH_COLUMNS
    for i in range(n):
        columns += [f"obs{i}_est_{s}" for s in STATE_SUFFIXES]
        columns += [f"obs{i}_err_pos", f"obs{i}_err_vel"]
    return columns


def csv_header(n: int) -> str:
    return ",".join(csv_columns(n))


def trace_frame(trace: TrialTrace) -> pd.DataFrame:
    H, n = trace.horizon, trace.n
    blocks = [trace.steps[:, None].astype(float), (trace.steps * trace.dt)[:, None], trace.truth]
    pos_err = trace.position_errors
    vel_err = trace.velocity_errors
    for i in range(n):
        blocks += [trace.estimates[:, i, :], pos_err[:, i:i + 1], vel_err[:, i:i + 1]]
    data = np.hstack(blocks) if H else np.zeros((0, len(csv_columns(n))))
    frame = pd.DataFrame(data, columns=csv_columns(n))
    frame["step"] = frame["step"].astype(int)
    return frame


def trace_document(trace: TrialTrace, seed: int) -> TrialTraceDocument:
    frame = trace_frame(trace)
    return TrialTraceDocument(
        seed=seed,
        n=trace.n,
        dt=trace.dt,
        columns=list(frame.columns),
        rows=frame.to_dict(orient="records"),
        messages=trace.messages.tolist(),
    )


def report_frame(report: BaseModel) -> pd.DataFrame:
    if isinstance(report, RmseReport):
        return pd.DataFrame({
            "step": report.steps,
            "position_rmse": report.position_rmse,
            "velocity_rmse": report.velocity_rmse,
        })
    if isinstance(report, CompareReport):
        first = next(iter(report.reports.values()))
        frame = pd.DataFrame({"step": first.steps})
        for name, sub in report.reports.items():
            frame[f"{name}_position_rmse"] = sub.position_rmse
            frame[f"{name}_velocity_rmse"] = sub.velocity_rmse
        return frame
    if isinstance(report, SweepReport):
        return pd.DataFrame([{"sigma": p.sigma, **p.steady_state.model_dump()} for p in report.points])
    if isinstance(report, VerificationReport):
        return pd.DataFrame([
            {"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "passed": c.passed,
             "applicable": c.applicable, "detail": c.detail}
            for c in report.checks
        ])
    raise ExportException("<csv>", f"No CSV layout for {type(report).__name__}")


def _write(text: str, path: Optional[Union[str, Path]]):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as ex:
        raise ExportException(str(path), ex.strerror or str(ex))
    logger.info("Wrote %s", path)


def _csv_text(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def export(obj: Union[TrialTrace, BaseModel], fmt: str, path: Optional[Union[str, Path]] = None, seed: int = 0):
    if fmt not in ("csv", "json"):
        raise ExportException(str(path), f"unsupported format {fmt}")
    if isinstance(obj, TrialTrace):
        if fmt == "csv":
            text = _csv_text(trace_frame(obj))
        else:
            text = trace_document(obj, seed).model_dump_json(indent=2)
    elif fmt == "csv":
        text = _csv_text(report_frame(obj))
    else:
        text = obj.model_dump_json(indent=2)
    _write(text if text.endswith("\n") else text + "\n", path)


def load_report(path: Union[str, Path], model: Type[ReportT]) -> ReportT:
    path = Path(path)
    try:
        return model.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as ex:
        raise ExportException(str(path), ex.strerror or str(ex))
    except ValidationError as ex:
        raise ExportException(str(path), f"not a valid {model.__name__}: {ex.error_count()} error(s)")
