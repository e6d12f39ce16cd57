import csv

import numpy as np
import pytest

from lowrank_mdl.selector import select_model
from lowrank_mdl.tools.frames_tool import load_frame_stack, load_pgm
from lowrank_mdl.tools.numerics_tool import DataMatrix
from lowrank_mdl.tools.report_tool import CURVE_COLUMNS, ReportFile, eigenframe, export_artifacts
from lowrank_mdl.tools.rpca_tool import LambdaSchedule


def _schedule(shape, count=4):
    return LambdaSchedule.geometric(shape, count=count, low=0.1, high=3.0)


@pytest.fixture
def stack_report(pgm_dir):
    data, manifest = load_frame_stack(pgm_dir)
    return select_model(data, schedule=_schedule(data.shape)), manifest


def test_report_json_round_trip(stack_report):
    report, manifest = stack_report
    report_file = ReportFile.from_report(report, manifest)
    again = ReportFile.from_json(report_file.to_json())
    assert again == report_file
    assert again.best_index == report.best_index
    assert again.frames == manifest.files
    assert again.schedule_lambda_sparse == pytest.approx(_schedule(report.data_shape).sparse_weights)


def test_exported_files(stack_report, tmp_path):
    report, manifest = stack_report
    written = export_artifacts(report, manifest, tmp_path)
    assert all(p.exists() for p in written)
    with open(tmp_path / "curve.csv", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == CURVE_COLUMNS
    assert len(rows) - 1 == len(report.candidates)

    best = report.best
    assert sorted(p.name for p in (tmp_path / "foreground").iterdir()) == list(manifest.files)
    assert sorted(p.name for p in (tmp_path / "background").iterdir()) == list(manifest.files)
    eigenframes = sorted(tmp_path.glob("eigenframe_*.pgm"))
    assert len(eigenframes) == best.rank
    if best.rank:
        assert load_pgm(eigenframes[0]).shape == report.frame_shape
        with open(tmp_path / "timecourses.csv", encoding="utf-8", newline="") as handle:
            assert len(list(csv.reader(handle))) == best.rank


def test_background_plus_foreground_gives_the_frames(stack_report, tmp_path):
    report, manifest = stack_report
    export_artifacts(report, manifest, tmp_path, foreground_offset=128)
    best = report.best
    background = np.rint(best.quantized.reconstruct()) if best.rank else 0.0
    X, _ = load_frame_stack(manifest.directory)
    np.testing.assert_array_equal(background + best.E, X.entries)


def test_rank_zero_run_has_no_eigenframes(rng, tmp_path):
    X = DataMatrix(entries=rng.integers(-20, 21, size=(60, 30)).astype(np.float64), frame_shape=(6, 10))
    report = select_model(X, schedule=_schedule(X.shape, count=3))
    assert report.best.rank == 0
    export_artifacts(report, None, tmp_path)
    assert not list(tmp_path.glob("eigenframe_*.pgm"))
    assert not (tmp_path / "timecourses.csv").exists()
    assert len(list((tmp_path / "foreground").iterdir())) == 30


def test_matrix_input_skips_frame_dumps(tmp_path, centered_noise):
    report = select_model(centered_noise, schedule=_schedule(centered_noise.shape, count=3))
    export_artifacts(report, None, tmp_path)
    assert (tmp_path / "report.json").exists()
    assert not (tmp_path / "foreground").exists()


def test_constant_column_gives_a_gray_eigenframe():
    np.testing.assert_array_equal(eigenframe(np.full(6, 0.4), (2, 3)), np.full((2, 3), 128.0))
    frame = eigenframe(np.array([-1.0, 0.0, 1.0, 3.0]), (2, 2))
    assert frame.min() == 0.0 and frame.max() == 255.0
