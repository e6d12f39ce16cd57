import numpy as np
import pytest

from lowrank_mdl.tools.frames_tool import save_pgm
from lowrank_mdl.tools.numerics_tool import DataMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def smooth_frames(height: int, width: int, n: int, rank: int, spikes: float = 0.0, seed: int = 0) -> np.ndarray:
    """Integer frames in [0, 255]: a smooth background plus ``rank - 1`` moving smooth patterns.

    Column j is frame j flattened in raster order; ``spikes`` is the fraction
    of entries replaced by saturated outliers.
    """
    gen = np.random.default_rng(seed)
    j = np.arange(height)[:, None] / height
    l = np.arange(width)[None, :] / width
    t = np.arange(n) / n
    images = [110.0 + 30.0 * np.cos(np.pi * j) * np.cos(np.pi * l)]
    courses = [np.ones(n)]
    for i in range(1, rank):
        images.append(np.sin(np.pi * (i + 1) * j + 0.3 * i) * np.cos(np.pi * i * l))
        courses.append((45.0 / i) * np.sin(2.0 * np.pi * i * t + 0.7 * i))
    X = sum(img.reshape(-1)[:, None] * c[None, :] for img, c in zip(images, courses))
    if spikes > 0:
        mask = gen.random(X.shape) < spikes
        X[mask] = gen.choice([0.0, 255.0], size=int(mask.sum()))
    return np.clip(np.rint(X), 0, 255)


@pytest.fixture
def make_frames():
    return smooth_frames


@pytest.fixture
def frame_matrix():
    """10x10 frames, 40 of them, rank 3 with 5% spikes."""
    return DataMatrix(entries=smooth_frames(10, 10, 40, rank=3, spikes=0.05), frame_shape=(10, 10))


@pytest.fixture
def centered_noise(rng):
    """Integer noise with zero mean: nothing low-rank to find."""
    return rng.integers(-20, 21, size=(60, 30)).astype(np.float64)


@pytest.fixture
def pgm_dir(tmp_path):
    """A folder of 8x8 PGM frames (rank 2, a few spikes)."""
    frames = smooth_frames(8, 8, 12, rank=2, spikes=0.02, seed=3)
    folder = tmp_path / "frames"
    folder.mkdir()
    for i in range(frames.shape[1]):
        save_pgm(frames[:, i].reshape(8, 8), folder / f"frame_{i:03d}.pgm")
    return folder
