"""Frame stacks (binary 8-bit PGM) and plain CSV matrices in and out of ``DataMatrix``."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

from lowrank_mdl.errors import FormatError, InvalidInputError
from lowrank_mdl.tools.numerics_tool import DataMatrix

_logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PGM_MAGIC = b"P5"
PGM_MAXVAL = 255
PGM_SUFFIXES = (".pgm",)


class FrameStackManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    directory: str = Field(..., description="dossier d'où les images ont été lues")
    files: Tuple[str, ...] = Field(..., min_length=1, description="noms des fichiers image, dans l'ordre des colonnes")
    frame_shape: Tuple[int, int] = Field(..., description="(hauteur, largeur)")
    depth: int = Field(8, description="bits par pixel")


# ---- PGM ----

def load_pgm(path: PathLike) -> np.ndarray:
    """Read a binary 8-bit PGM (P5, maxval 255) as a (height, width) uint8 array."""
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(2) != PGM_MAGIC:
            raise FormatError("not a binary PGM (magic P5 expected)", path=path)
    try:
        with Image.open(path) as img:
            # maxval 255 est lu tel quel par le décodeur "raw"
            if img.format != "PPM" or img.mode != "L" or img.tile[0][0] != "raw":
                raise FormatError("only 8-bit PGM (maxval 255) is supported", path=path)
            pixels = np.asarray(img, dtype=np.uint8)
    except (OSError, ValueError, SyntaxError) as e:
        raise FormatError(f"unreadable PGM: {e}", path=path)
    return pixels.copy()


def save_pgm(image, path: PathLike) -> None:
    """Write a (height, width) image of values in [0, 255] as binary PGM."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise InvalidInputError(f"a PGM frame must be 2-D, got shape {image.shape}")
    pixels = np.clip(np.rint(image.astype(np.float64)), 0, PGM_MAXVAL).astype(np.uint8)
    Image.fromarray(pixels).save(Path(path), format="PPM")


def load_frame_stack(directory: PathLike) -> Tuple[DataMatrix, FrameStackManifest]:
    """Stack every PGM of ``directory`` (lexicographic order) as the columns of X."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frame directory {directory} does not exist")
    files = sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in PGM_SUFFIXES)
    if not files:
        raise FormatError("no PGM frames found", path=directory)
    columns = []
    shape: Optional[Tuple[int, int]] = None
    for path in files:
        frame = load_pgm(path)
        if shape is None:
            shape = frame.shape
        elif frame.shape != shape:
            raise FormatError(f"frame is {frame.shape[0]}x{frame.shape[1]}, expected {shape[0]}x{shape[1]}",
                              path=path)
        columns.append(frame.reshape(-1))
    X = np.stack(columns, axis=1).astype(np.float64)
    manifest = FrameStackManifest(directory=str(directory), files=tuple(p.name for p in files), frame_shape=shape)
    _logger.info("loaded %d frames of %dx%d from %s", len(files), shape[0], shape[1], directory)
    return DataMatrix(entries=X, frame_shape=shape), manifest


def export_frames(X, frame_shape: Tuple[int, int], directory: PathLike,
                  names: Optional[Sequence[str]] = None) -> List[Path]:
    """Write every column of X as a PGM frame; inverse of ``load_frame_stack``."""
    X = X.entries if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
    height, width = frame_shape
    if X.ndim != 2 or X.shape[0] != height * width:
        raise InvalidInputError(f"matrix {X.shape} does not hold {height}x{width} frames")
    if names is not None and len(names) != X.shape[1]:
        raise InvalidInputError(f"{len(names)} names for {X.shape[1]} frames")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(X.shape[1])))
    written = []
    for j in range(X.shape[1]):
        name = names[j] if names is not None else f"frame_{j:0{digits}d}.pgm"
        path = directory / name
        save_pgm(X[:, j].reshape(height, width), path)
        written.append(path)
    return written


# ---- CSV ----

def load_matrix_csv(path: PathLike) -> DataMatrix:
    """Read a rectangular CSV of decimal numbers."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"matrix file {path} does not exist")
    rows: List[List[float]] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for i, record in enumerate(csv.reader(handle), start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            values = []
            for j, cell in enumerate(record, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise FormatError(f"non-numeric cell {cell!r}", path=path, row=i, column=j)
                if not np.isfinite(value):
                    raise FormatError(f"non-finite cell {cell!r}", path=path, row=i, column=j)
                values.append(value)
            if rows and len(values) != len(rows[0]):
                raise FormatError(f"{len(values)} columns, expected {len(rows[0])}", path=path, row=i)
            rows.append(values)
    if not rows:
        raise FormatError("empty matrix file", path=path)
    return DataMatrix(entries=np.array(rows, dtype=np.float64))


def format_number(value: float) -> str:
    """17 significant digits: parses back to the same double."""
    return format(float(value), ".17g")


def save_matrix_csv(X, path: PathLike) -> None:
    X = X.entries if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError(f"a CSV matrix must be 2-D, got shape {X.shape}")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for row in X:
            writer.writerow([format_number(v) for v in row])
