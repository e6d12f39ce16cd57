import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from lowrank_mdl.errors import ConvergenceError, LowRankMDLError, PipelineError
from lowrank_mdl.tools.bits_tool import BitAllocation, CoderMode, QuantizationGrid
from lowrank_mdl.tools.codelength_tool import Refinement, UMode, refine_quantization, resolve_u_mode
from lowrank_mdl.tools.numerics_tool import DataMatrix, Decomposition
from lowrank_mdl.tools.quantize_tool import QuantizedSVD, default_delta_e
from lowrank_mdl.tools.rpca_tool import LambdaSchedule, SolverConfig, iter_path, pca_path
from lowrank_mdl.tools.settings_tool import Settings

_logger = logging.getLogger(__name__)

CandidateKind = Literal["path", "rank0", "raw"]
Family = Literal["rpca", "pca"]


#################################################
####           Types du rapport              ####
#################################################

class SolverStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int = Field(..., ge=0)
    residual: float = Field(..., ge=0.0, description="résidu primal relatif final")
    mu: Optional[float] = Field(None, description="pénalité atteinte")


class ModelCandidate(BaseModel):
    """One scored (or failed) model of the sweep."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: CandidateKind
    index: Optional[int] = Field(None, description="position sur le chemin de lambda")
    lambda_nuclear: Optional[float] = Field(None, description="poids de la norme nucléaire (None pour les références et la PCA)")
    lambda_sparse: Optional[float] = Field(None, description="poids l1 de la forme canonique, 1 / lambda_nuclear")
    rank: int = Field(0, ge=0)
    allocation: Optional[BitAllocation] = None
    grid: Optional[QuantizationGrid] = None
    halvings: int = Field(0, ge=0)
    solver: Optional[SolverStats] = None
    failure: Optional[str] = Field(None, description="raison pour laquelle le candidat n'a pas pu être évalué")
    quantized: Optional[QuantizedSVD] = Field(None, exclude=True)
    E: Optional[np.ndarray] = Field(None, exclude=True)

    @model_validator(mode="after")
    def _consistent(self) -> "ModelCandidate":
        if self.failure is None and self.allocation is None:
            raise ValueError("a scored candidate needs an allocation")
        if self.quantized is not None and self.quantized.k != self.rank:
            raise ValueError(f"rank {self.rank} does not match {self.quantized.k} retained singular values")
        return self

    @property
    def ok(self) -> bool:
        return self.failure is None

    @property
    def total_bits(self) -> float:
        return self.allocation.total.bits if self.allocation is not None else float("nan")


class SelectionReport(BaseModel):
    """All candidates in sweep order (references last) and the argmin of the total codelength."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    candidates: Tuple[ModelCandidate, ...]
    best_index: int
    family: Family
    schedule: Optional[Tuple[float, ...]] = Field(None, description="valeurs de lambda_nuclear parcourues")
    u_mode: CoderMode
    v_mode: CoderMode
    start_grid: QuantizationGrid
    frame_shape: Optional[Tuple[int, int]] = None
    data_shape: Tuple[int, int]

    @model_validator(mode="after")
    def _best_is_minimal(self) -> "SelectionReport":
        best = self.candidates[self.best_index]
        if not best.ok:
            raise ValueError("the selected candidate failed")
        if any(c.ok and c.total_bits < best.total_bits for c in self.candidates):
            raise ValueError("best_index does not attain the minimum total codelength")
        return self

    @property
    def best(self) -> ModelCandidate:
        return self.candidates[self.best_index]


#################################################
####              Sélecteur                  ####
#################################################

def _argmin(candidates: List[ModelCandidate]) -> int:
    scored = [(c.total_bits, c.rank, i) for i, c in enumerate(candidates) if c.ok]
    if not scored:
        raise PipelineError("no candidate could be scored")
    return min(scored)[2]


class LowRankSelector:
    """Sweep a family of low-rank models and keep the one with the shortest description of X."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or Settings()

    def schedule_for(self, shape: Tuple[int, int]) -> LambdaSchedule:
        s = self.settings.schedule
        return LambdaSchedule.geometric(shape, count=s.count, low=s.low, high=s.high)

    def start_grid(self, X: DataMatrix) -> QuantizationGrid:
        q = self.settings.quantization
        delta_e = default_delta_e(X) if q.delta_e == "auto" else float(q.delta_e)
        return QuantizationGrid.start(X.rows, X.cols, delta_e=delta_e, delta_sigma=q.delta_sigma)

    def score(self, X: DataMatrix, A: np.ndarray, grid: QuantizationGrid, u_mode: UMode,
              v_mode: CoderMode) -> Refinement:
        q = self.settings.quantization
        return refine_quantization(X, A, grid, u_mode=u_mode, v_mode=v_mode,
                                   rank_tol=q.rank_tol, max_halvings=q.max_halvings)

    def _sweep(self, X: DataMatrix, family: Family, schedule: LambdaSchedule,
               solver_config: SolverConfig) -> List[Tuple[dict, Union[Decomposition, LowRankMDLError]]]:
        if family == "pca":
            return [({"kind": "path", "index": i}, d) for i, d in enumerate(pca_path(X))]
        jobs = []
        for index, lambda_nuclear, result in iter_path(X, schedule, solver_config):
            jobs.append(({"kind": "path", "index": index, "lambda_nuclear": lambda_nuclear,
                          "lambda_sparse": 1.0 / lambda_nuclear}, result))
        return jobs

    def _candidate(self, X: DataMatrix, meta: dict, result: Union[Decomposition, LowRankMDLError],
                   grid: QuantizationGrid, u_mode: CoderMode, v_mode: CoderMode) -> ModelCandidate:
        if isinstance(result, ConvergenceError):
            last = result.last_iterate
            stats = SolverStats(iterations=result.iterations, residual=result.residual,
                                mu=getattr(last, "mu", None))
            return ModelCandidate(**meta, solver=stats, failure=str(result))
        stats = None
        if result.lambda_nuclear is not None:
            stats = SolverStats(iterations=result.iterations, residual=result.residual, mu=result.mu)
        try:
            refined = self.score(X, result.A, grid, u_mode, v_mode)
        except LowRankMDLError as e:
            _logger.warning("%s candidate %s could not be scored: %s", meta["kind"], meta.get("index"), e)
            return ModelCandidate(**meta, solver=stats, failure=str(e))
        candidate = ModelCandidate(**meta, rank=refined.quantized.k, allocation=refined.allocation,
                                   grid=refined.grid, halvings=refined.halvings, solver=stats,
                                   quantized=refined.quantized, E=refined.E)
        _logger.info("%s candidate %s: rank %d, %.6g bits (%d halvings)", candidate.kind,
                     "-" if candidate.index is None else candidate.index, candidate.rank,
                     candidate.total_bits, candidate.halvings)
        return candidate

    def select_model(self, X: Union[DataMatrix, np.ndarray], schedule: Optional[LambdaSchedule] = None,
                     solver_config: Optional[SolverConfig] = None, u_mode: Optional[UMode] = None,
                     v_mode: Optional[CoderMode] = None, family: Optional[Family] = None) -> SelectionReport:
        """Solve the path, score every model plus the rank-0 and raw references, return the argmin.

        Candidates whose solve or scoring failed stay in the report with their
        failure and are never selected. Ties go to the smaller rank.
        """
        data = X if isinstance(X, DataMatrix) else DataMatrix(entries=X)
        coders = self.settings.coders
        family = family or coders.family
        resolved_u = resolve_u_mode(u_mode or coders.u_mode, data.frame_shape)
        v_mode = v_mode or coders.v_mode
        schedule = schedule or self.schedule_for(data.shape)
        solver_config = solver_config or self.settings.solver
        grid = self.start_grid(data)

        jobs = self._sweep(data, family, schedule, solver_config)
        jobs.append(({"kind": "rank0"}, Decomposition(A=np.zeros(data.shape), E=data.entries)))
        jobs.append(({"kind": "raw"}, Decomposition(A=data.entries, E=np.zeros(data.shape))))

        def build(job):
            return self._candidate(data, job[0], job[1], grid, resolved_u, v_mode)

        workers = self.settings.runtime.workers
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                candidates = list(pool.map(build, jobs))
        else:
            candidates = [build(job) for job in jobs]

        path = [c for c in candidates if c.kind == "path"]
        if path and not any(c.ok for c in path):
            raise PipelineError(f"all {len(path)} candidates of the {family} sweep failed")
        ranks = [c.rank for c in path if c.ok]
        if any(b < a for a, b in zip(ranks, ranks[1:])):
            _logger.warning("rank is not monotone along the sweep: %s", ranks)

        best_index = _argmin(candidates)
        report = SelectionReport(
            candidates=tuple(candidates), best_index=best_index, family=family,
            schedule=schedule.values if family == "rpca" else None, u_mode=resolved_u, v_mode=v_mode,
            start_grid=grid, frame_shape=data.frame_shape, data_shape=data.shape,
        )
        best = report.best
        _logger.info("selected %s candidate %s: rank %d, %.6g bits", best.kind,
                     "-" if best.index is None else best.index, best.rank, best.total_bits)
        return report


def select_model(X: Union[DataMatrix, np.ndarray], schedule: Optional[LambdaSchedule] = None,
                 solver_config: Optional[SolverConfig] = None, u_mode: Optional[UMode] = None,
                 v_mode: Optional[CoderMode] = None, family: Optional[Family] = None,
                 settings: Optional[Settings] = None) -> SelectionReport:
    return LowRankSelector(settings).select_model(X, schedule, solver_config, u_mode, v_mode, family)
