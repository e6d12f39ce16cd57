import numpy as np
import pytest

from lowrank_mdl.errors import PipelineError
from lowrank_mdl.selector import LowRankSelector, ModelCandidate, _argmin, select_model
from lowrank_mdl.tools.bits_tool import BitAllocation, CodeLength
from lowrank_mdl.tools.numerics_tool import DataMatrix
from lowrank_mdl.tools.rpca_tool import LambdaSchedule
from lowrank_mdl.tools.settings_tool import Settings


def _few_lambdas(shape, count=6):
    return LambdaSchedule.geometric(shape, count=count, low=0.1, high=3.0)


def _scored(total, rank, kind="path", index=None):
    return ModelCandidate(kind=kind, index=index, rank=rank,
                          allocation=BitAllocation(l_e=CodeLength(bits=total), total=None))


def test_recovers_the_rank_of_smooth_frames(frame_matrix):
    report = select_model(frame_matrix)
    assert report.best.rank == 3
    assert report.u_mode == "predictive"
    kinds = [c.kind for c in report.candidates]
    assert kinds[-2:] == ["rank0", "raw"]
    assert kinds.count("path") == 30


def test_noise_has_no_low_rank_structure(centered_noise):
    report = select_model(centered_noise, schedule=_few_lambdas(centered_noise.shape))
    assert report.best.rank == 0
    assert report.u_mode == "spherical"
    rank0 = next(c for c in report.candidates if c.kind == "rank0")
    assert report.best.total_bits == pytest.approx(rank0.total_bits)


def test_report_lists_every_candidate(frame_matrix):
    schedule = _few_lambdas(frame_matrix.shape)
    report = select_model(frame_matrix, schedule=schedule)
    assert len(report.candidates) == len(schedule) + 2
    path = [c for c in report.candidates if c.kind == "path"]
    assert [c.index for c in path] == list(range(len(schedule)))
    assert all(c.lambda_sparse == pytest.approx(1.0 / c.lambda_nuclear) for c in path)
    assert all(c.solver is not None and c.solver.iterations >= 1 for c in path)
    best = report.best
    assert all(best.total_bits <= c.total_bits for c in report.candidates if c.ok)
    assert best.quantized.k == best.rank
    assert best.E.shape == frame_matrix.shape


def test_selection_is_deterministic(frame_matrix):
    schedule = _few_lambdas(frame_matrix.shape, count=4)
    first = select_model(frame_matrix, schedule=schedule)
    second = select_model(frame_matrix, schedule=schedule)
    assert [c.total_bits for c in first.candidates] == [c.total_bits for c in second.candidates]
    assert first.best_index == second.best_index


def test_worker_threads_do_not_change_the_result(frame_matrix):
    schedule = _few_lambdas(frame_matrix.shape, count=4)
    serial = select_model(frame_matrix, schedule=schedule)
    threaded = select_model(frame_matrix, schedule=schedule,
                            settings=Settings().with_overrides({"runtime": {"workers": 2}}))
    assert [c.total_bits for c in serial.candidates] == [c.total_bits for c in threaded.candidates]
    assert serial.best_index == threaded.best_index


def test_ties_go_to_the_smaller_rank_then_the_earlier_candidate():
    candidates = [_scored(10.0, 2, index=0), _scored(10.0, 1, index=1), _scored(10.0, 1, index=2),
                  ModelCandidate(kind="path", index=3, failure="did not converge")]
    assert _argmin(candidates) == 1


def test_nothing_scored_is_a_pipeline_error():
    with pytest.raises(PipelineError):
        _argmin([ModelCandidate(kind="path", index=0, failure="did not converge")])


def test_failed_path_is_a_pipeline_error(centered_noise):
    settings = Settings().with_overrides({"solver": {"max_iter": 1}})
    with pytest.raises(PipelineError):
        select_model(centered_noise, schedule=_few_lambdas(centered_noise.shape, count=3), settings=settings)


def test_pca_family_walks_every_rank(frame_matrix):
    report = LowRankSelector().select_model(frame_matrix, family="pca")
    path = [c for c in report.candidates if c.kind == "path"]
    assert [c.rank for c in path] == list(range(1, len(path) + 1))
    assert report.schedule is None
    assert report.best.rank >= 1


def test_spherical_coders_also_find_the_rank(frame_matrix):
    report = select_model(frame_matrix, schedule=_few_lambdas(frame_matrix.shape, count=10),
                          u_mode="spherical", v_mode="spherical")
    assert report.u_mode == "spherical"
    assert 1 <= report.best.rank <= 5


@pytest.mark.slow
def test_recovers_rank_five_on_large_frames(make_frames):
    X = DataMatrix(entries=make_frames(20, 20, 200, rank=5, spikes=0.05, seed=7), frame_shape=(20, 20))
    assert select_model(X).best.rank == 5


@pytest.mark.slow
def test_large_noise_selects_rank_zero():
    X = np.random.default_rng(11).integers(-127, 128, size=(100, 50)).astype(np.float64)
    assert select_model(X).best.rank == 0


@pytest.mark.slow
def test_uniform_noise_keeps_only_its_mean():
    # a constant offset of about 127 is the one structure uniform noise has
    X = np.random.default_rng(5).integers(0, 256, size=(100, 50)).astype(np.float64)
    report = select_model(X)
    rank0 = next(c for c in report.candidates if c.kind == "rank0")
    assert report.best.rank == 1
    assert rank0.total_bits > report.best.total_bits
