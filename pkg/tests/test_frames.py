import numpy as np
import pytest

from lowrank_mdl.errors import FormatError, InvalidInputError
from lowrank_mdl.tools.frames_tool import (
    export_frames,
    load_frame_stack,
    load_matrix_csv,
    load_pgm,
    save_matrix_csv,
    save_pgm,
)


def _write(path, data: bytes):
    path.write_bytes(data)
    return path


def test_two_small_frames_become_columns(tmp_path):
    _write(tmp_path / "a.pgm", b"P5\n2 2\n255\n" + bytes([1, 2, 3, 4]))
    _write(tmp_path / "b.pgm", b"P5\n2 2\n255\n" + bytes([5, 6, 7, 8]))
    data, manifest = load_frame_stack(tmp_path)
    np.testing.assert_array_equal(data.entries, [[1, 5], [2, 6], [3, 7], [4, 8]])
    assert data.frame_shape == (2, 2)
    assert manifest.files == ("a.pgm", "b.pgm")


def test_single_frame_is_one_column(tmp_path):
    _write(tmp_path / "only.pgm", b"P5\n3 1\n255\n" + bytes([9, 8, 7]))
    data, _ = load_frame_stack(tmp_path)
    assert data.shape == (3, 1)
    assert data.frame_shape == (1, 3)


def test_frames_round_trip_byte_for_byte(pgm_dir, tmp_path):
    data, manifest = load_frame_stack(pgm_dir)
    out = tmp_path / "copy"
    export_frames(data, data.frame_shape, out, manifest.files)
    for name in manifest.files:
        assert (out / name).read_bytes() == (pgm_dir / name).read_bytes()


def test_header_comments_are_skipped(tmp_path):
    path = _write(tmp_path / "c.pgm", b"P5\n# made by hand\n2 1\n# still header\n255\n" + bytes([10, 200]))
    np.testing.assert_array_equal(load_pgm(path), [[10, 200]])


def test_mixed_frame_sizes_are_rejected(tmp_path):
    _write(tmp_path / "a.pgm", b"P5\n2 2\n255\n" + bytes(4))
    _write(tmp_path / "b.pgm", b"P5\n3 1\n255\n" + bytes(3))
    with pytest.raises(FormatError):
        load_frame_stack(tmp_path)


@pytest.mark.parametrize("raw", [
    b"P2\n2 1\n255\n1 2\n",
    b"P5\n2 1\n65535\n" + bytes(4),
    b"P5\n2 1\n100\n" + bytes([3, 7]),
    b"P5\n2 2\n255\n" + bytes(3),
    b"P5\n2",
])
def test_unsupported_pgm_files(tmp_path, raw):
    with pytest.raises(FormatError):
        load_pgm(_write(tmp_path / "bad.pgm", raw))


def test_missing_or_empty_stack(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_frame_stack(tmp_path / "nowhere")
    with pytest.raises(FormatError):
        load_frame_stack(tmp_path)


def test_saved_frames_are_clamped(tmp_path):
    path = tmp_path / "clamped.pgm"
    save_pgm(np.array([[-3.0, 12.4, 300.0]]), path)
    np.testing.assert_array_equal(load_pgm(path), [[0, 12, 255]])
    with pytest.raises(InvalidInputError):
        save_pgm(np.zeros(3), path)


def test_export_names_frames_in_order(tmp_path):
    written = export_frames(np.zeros((4, 3)), (2, 2), tmp_path)
    assert [p.name for p in written] == ["frame_0000.pgm", "frame_0001.pgm", "frame_0002.pgm"]
    with pytest.raises(InvalidInputError):
        export_frames(np.zeros((5, 3)), (2, 2), tmp_path)


def test_csv_matrix(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("1,2.5,-3\n\n4,5e-3,6\n", encoding="utf-8")
    data = load_matrix_csv(path)
    np.testing.assert_array_equal(data.entries, [[1.0, 2.5, -3.0], [4.0, 0.005, 6.0]])
    assert data.frame_shape is None


def test_csv_round_trip_keeps_every_bit(rng, tmp_path):
    X = rng.normal(size=(5, 4)) * 1e3
    save_matrix_csv(X, tmp_path / "x.csv")
    np.testing.assert_array_equal(load_matrix_csv(tmp_path / "x.csv").entries, X)


def test_ragged_csv_reports_the_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2,3\n4,5\n", encoding="utf-8")
    with pytest.raises(FormatError) as info:
        load_matrix_csv(path)
    assert info.value.row == 2


def test_non_numeric_csv_cell(tmp_path):
    path = tmp_path / "text.csv"
    path.write_text("1,2\n3,abc\n", encoding="utf-8")
    with pytest.raises(FormatError) as info:
        load_matrix_csv(path)
    assert info.value.row == 2
    assert info.value.column == 2


def test_saved_frames_carry_the_minimal_header(tmp_path):
    path = tmp_path / "tiny.pgm"
    save_pgm(np.array([[1.0, 2.0, 3.0]]), path)
    assert path.read_bytes() == b"P5\n3 1\n255\n" + bytes([1, 2, 3])
