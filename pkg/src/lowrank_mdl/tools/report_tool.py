"""report.json, curve.csv, eigen-frames, time courses and background/foreground dumps."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from lowrank_mdl import __version__
from lowrank_mdl.tools.bits_tool import BitAllocation, CoderMode, QuantizationGrid
from lowrank_mdl.tools.frames_tool import FrameStackManifest, export_frames, format_number, save_pgm

_logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("kind", "index", "lambda_sparse", "lambda_nuclear", "rank",
                 "l_u", "l_sigma", "l_v", "l_e", "total", "halvings", "status")


# ---- Types ----

class SolverRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int
    residual: float
    mu: Optional[float] = None


class CandidateRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["path", "rank0", "raw"]
    index: Optional[int] = None
    lambda_nuclear: Optional[float] = None
    lambda_sparse: Optional[float] = None
    rank: int
    status: Literal["ok", "failed"]
    failure: Optional[str] = None
    allocation: Optional[BitAllocation] = None
    grid: Optional[QuantizationGrid] = None
    halvings: int = 0
    solver: Optional[SolverRecord] = None


class ReportFile(BaseModel):
    """Everything a selection run produced, minus the matrices."""

    model_config = ConfigDict(frozen=True)

    version: str = Field(__version__, description="version de lowrank_mdl qui a écrit le rapport")
    data_shape: Tuple[int, int]
    frame_shape: Optional[Tuple[int, int]] = None
    family: Literal["rpca", "pca"]
    u_mode: CoderMode
    v_mode: CoderMode
    schedule_lambda_nuclear: Optional[Tuple[float, ...]] = None
    schedule_lambda_sparse: Optional[Tuple[float, ...]] = None
    start_grid: QuantizationGrid
    best_index: int
    candidates: Tuple[CandidateRecord, ...]
    frames: Optional[Tuple[str, ...]] = Field(None, description="fichiers image d'entrée, dans l'ordre des colonnes")

    @classmethod
    def from_report(cls, report, manifest: Optional[FrameStackManifest] = None) -> "ReportFile":
        records = []
        for c in report.candidates:
            solver = None if c.solver is None else SolverRecord(**c.solver.model_dump())
            records.append(CandidateRecord(
                kind=c.kind, index=c.index, lambda_nuclear=c.lambda_nuclear, lambda_sparse=c.lambda_sparse,
                rank=c.rank, status="ok" if c.ok else "failed", failure=c.failure,
                allocation=c.allocation, grid=c.grid, halvings=c.halvings, solver=solver,
            ))
        schedule = report.schedule
        return cls(
            data_shape=report.data_shape, frame_shape=report.frame_shape, family=report.family,
            u_mode=report.u_mode, v_mode=report.v_mode,
            schedule_lambda_nuclear=schedule,
            schedule_lambda_sparse=None if schedule is None else tuple(1.0 / v for v in schedule),
            start_grid=report.start_grid, best_index=report.best_index, candidates=tuple(records),
            frames=None if manifest is None else manifest.files,
        )

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: Union[str, bytes]) -> "ReportFile":
        return cls.model_validate_json(text)


class DecompositionRecord(BaseModel):
    """decomposition.json: a single solve of the ``decompose`` command."""

    model_config = ConfigDict(frozen=True)

    version: str = __version__
    data_shape: Tuple[int, int]
    lambda_sparse: float
    lambda_nuclear: float
    rank: int
    solver: SolverRecord


# ---- Export ----

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def curve_rows(report_file: ReportFile) -> List[List[str]]:
    rows = []
    for c in report_file.candidates:
        bits = c.allocation.as_row() if c.allocation is not None else {}
        values = {"kind": c.kind, "index": c.index, "lambda_sparse": c.lambda_sparse,
                  "lambda_nuclear": c.lambda_nuclear, "rank": c.rank, "halvings": c.halvings,
                  "status": c.status, **bits}
        rows.append([_cell(values.get(column)) for column in CURVE_COLUMNS])
    return rows


def write_csv(path: Path, rows, header=None) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        writer.writerows(rows)
    return path


def eigenframe(column: np.ndarray, frame_shape: Tuple[int, int]) -> np.ndarray:
    """Min-max rescale to [0, 255]; a constant column becomes mid-gray."""
    lo, hi = float(column.min()), float(column.max())
    if hi <= lo:
        scaled = np.full(column.shape, 128.0)
    else:
        scaled = 255.0 * (column - lo) / (hi - lo)
    return scaled.reshape(frame_shape)


def export_artifacts(report, manifest: Optional[FrameStackManifest], out_dir: Union[str, Path],
                     foreground_offset: int = 128) -> List[Path]:
    """Write the artifacts of a selection run into ``out_dir``; returns the files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_file = ReportFile.from_report(report, manifest)
    best = report.best
    written: List[Path] = []

    written.append(write_csv(out_dir / "curve.csv", curve_rows(report_file), header=CURVE_COLUMNS))

    quantized = best.quantized
    if quantized is not None and quantized.k:
        timecourses = (quantized.V * quantized.sigma).T
        written.append(write_csv(out_dir / "timecourses.csv",
                                 [[format_number(v) for v in row] for row in timecourses]))

    frame_shape = report.frame_shape
    if frame_shape is None:
        _logger.warning("no frame shape: eigen-frames and frame dumps are skipped")
    elif quantized is not None and best.E is not None:
        for i in range(quantized.k):
            path = out_dir / f"eigenframe_{i + 1}.pgm"
            save_pgm(eigenframe(quantized.U[:, i], frame_shape), path)
            written.append(path)
        names = manifest.files if manifest is not None else None
        background = quantized.reconstruct() if quantized.k else np.zeros(best.E.shape)
        written += export_frames(background, frame_shape, out_dir / "background", names)
        written += export_frames(best.E + foreground_offset, frame_shape, out_dir / "foreground", names)

    report_path = out_dir / "report.json"
    report_path.write_text(report_file.to_json(), encoding="utf-8")
    written.append(report_path)
    _logger.info("wrote %d files to %s", len(written), out_dir)
    return written
