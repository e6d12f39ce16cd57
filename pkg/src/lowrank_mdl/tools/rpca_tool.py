"""Robust PCA by inexact augmented Lagrangian iterations, with warm-started paths.

The convex program ||X - W||_1 + lambda ||W||_* is solved in its canonical
scaled form

    min ||A||_* + lambda_E ||E||_1   s.t.   X = A + E,   lambda_E = 1 / lambda

so ``lambda_nuclear`` (nuclear-norm weight) and ``lambda_sparse`` (l1 weight)
always travel together.
"""

from __future__ import annotations

import logging
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, field_validator

from lowrank_mdl.errors import ConvergenceError, InvalidInputError
from lowrank_mdl.tools.numerics_tool import (
    DataMatrix,
    Decomposition,
    as_finite_matrix,
    nuclear_norm,
    singular_value_threshold,
    soft_threshold,
)

_logger = logging.getLogger(__name__)

_BALANCE = 10.0


# ---- Types ----

class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tol: PositiveFloat = Field(1e-7, description="seuil d'arrêt des résidus primal et dual relatifs")
    max_iter: PositiveInt = Field(1000, description="nombre maximal d'itérations par lambda")
    mu0: Optional[PositiveFloat] = Field(None, description="pénalité initiale ; None signifie 1.25 / sigma_max(X)")
    rho: float = Field(1.5, gt=1.0, description="facteur de variation de la pénalité")
    mu_max_factor: PositiveFloat = Field(1e7, description="borne de la pénalité, en multiple de mu0")


class AlmState(BaseModel):
    """Iterate of the inexact ALM loop."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    Y: np.ndarray = Field(..., description="variable duale")
    mu: PositiveFloat = Field(..., description="pénalité")
    A: np.ndarray = Field(..., description="itéré bas rang")
    E: np.ndarray = Field(..., description="itéré parcimonieux")
    iter: int = Field(0, ge=0)
    rank: int = Field(0, ge=0)


class LambdaSchedule(BaseModel):
    """Nuclear-norm weights lambda_nuclear in sweep order (strictly decreasing).

    Decreasing lambda_nuclear is increasing lambda_sparse: the path starts at
    the sparsest low-rank part (A = 0) and gains rank as it goes.
    """

    model_config = ConfigDict(frozen=True)

    values: Tuple[PositiveFloat, ...] = Field(..., min_length=1)

    @field_validator("values")
    @classmethod
    def _strictly_decreasing(cls, values):
        if any(not np.isfinite(v) for v in values):
            raise ValueError("schedule values must be finite")
        if any(a <= b for a, b in zip(values, values[1:])):
            raise ValueError("schedule values must be strictly decreasing")
        return values

    @classmethod
    def from_sparse_weights(cls, weights: Sequence[float]) -> "LambdaSchedule":
        """Build from l1 weights lambda_E, in any order."""
        ordered = sorted(set(float(w) for w in weights))
        return cls(values=tuple(1.0 / w for w in ordered))

    @classmethod
    def geometric(cls, shape: Tuple[int, int], count: int = 30, low: float = 0.05,
                  high: float = 4.0) -> "LambdaSchedule":
        """``count`` lambda_E values spanning [low, high] / sqrt(max(m, n))."""
        base = 1.0 / np.sqrt(max(shape))
        if count == 1:
            return cls.from_sparse_weights([low * base])
        return cls.from_sparse_weights(np.geomspace(low * base, high * base, count))

    @property
    def sparse_weights(self) -> Tuple[float, ...]:
        return tuple(1.0 / v for v in self.values)

    def __len__(self) -> int:
        return len(self.values)


# ---- Opérations ----

def _as_array(X: Union[DataMatrix, np.ndarray]) -> np.ndarray:
    return X.entries if isinstance(X, DataMatrix) else as_finite_matrix(X, "X")


def rpca_objective(X: Union[DataMatrix, np.ndarray], W, lambda_nuclear: float) -> float:
    """||X - W||_1 + lambda_nuclear * ||W||_*."""
    X = _as_array(X)
    W = as_finite_matrix(W, "W")
    if W.shape != X.shape:
        raise InvalidInputError(f"W {W.shape} does not match X {X.shape}")
    if lambda_nuclear <= 0:
        raise InvalidInputError(f"lambda must be positive, got {lambda_nuclear}")
    return float(np.abs(X - W).sum()) + lambda_nuclear * nuclear_norm(W)


def _initial_dual(X: np.ndarray, lam: float) -> np.ndarray:
    # Y0 = X / J(X), J(X) = max(||X||_2, ||X||_inf / lambda_E)
    scale = max(float(scipy.linalg.norm(X, 2)), float(np.abs(X).max()) / lam)
    return X / scale


def rpca_alm(X: Union[DataMatrix, np.ndarray], lambda_nuclear: float,
             init: Optional[Decomposition] = None,
             config: Optional[SolverConfig] = None) -> Decomposition:
    """Solve min ||X - W||_1 + lambda_nuclear ||W||_* by inexact ALM.

    Stops once both the primal residual ||X - A - E|| and the dual residual
    mu ||E_k - E_(k-1)|| are below ``tol * ||X||``; the penalty is balanced
    between the two. ``init`` warm starts (A, E) and, when it carries them,
    the multiplier Y and the penalty reached by the previous solve. Raises
    ``ConvergenceError`` carrying the last iterate when ``max_iter`` is
    exhausted.
    """
    config = config or SolverConfig()
    X = _as_array(X)
    if lambda_nuclear <= 0:
        raise InvalidInputError(f"lambda must be positive, got {lambda_nuclear}")
    lam = 1.0 / lambda_nuclear
    norm_x = float(np.linalg.norm(X))

    if norm_x == 0.0:
        zero = np.zeros_like(X)
        return Decomposition(A=zero, E=zero, lambda_nuclear=lambda_nuclear, multiplier=zero)

    sigma_max = float(scipy.linalg.norm(X, 2))
    mu0 = config.mu0 if config.mu0 is not None else 1.25 / sigma_max
    mu_max = mu0 * config.mu_max_factor
    mu_min = mu0 / config.mu_max_factor

    if init is not None:
        if init.A.shape != X.shape:
            raise InvalidInputError(f"warm start shape {init.A.shape} does not match X {X.shape}")
        A, E = np.array(init.A), np.array(init.E)
        Y = np.array(init.multiplier) if init.multiplier is not None else _initial_dual(X, lam)
        mu = float(np.clip(init.mu, mu_min, mu_max)) if init.mu else mu0
    else:
        A, E = np.zeros_like(X), np.zeros_like(X)
        Y = _initial_dual(X, lam)
        mu = mu0

    state = AlmState(Y=Y, mu=mu, A=A, E=E)
    residual = float(np.linalg.norm(X - A - E)) / norm_x
    while state.iter < config.max_iter:
        state.iter += 1
        mu = state.mu
        previous_E = state.E
        state.A, state.rank = singular_value_threshold(X - state.E + state.Y / mu, 1.0 / mu,
                                                       return_rank=True)
        state.E = soft_threshold(X - state.A + state.Y / mu, lam / mu)
        gap = X - state.A - state.E
        state.Y = state.Y + mu * gap
        residual = float(np.linalg.norm(gap)) / norm_x
        dual = mu * float(np.linalg.norm(state.E - previous_E)) / norm_x
        _logger.debug("ALM iter %d: rank %d, primal %.3e, dual %.3e, mu %.3e",
                      state.iter, state.rank, residual, dual, mu)
        if residual <= config.tol and dual <= config.tol:
            break
        # équilibrage des résidus primal / dual
        if residual > _BALANCE * dual:
            state.mu = min(config.rho * mu, mu_max)
        elif dual > _BALANCE * residual:
            state.mu = max(mu / config.rho, mu_min)
    else:
        last = Decomposition(A=state.A, E=state.E, lambda_nuclear=lambda_nuclear, multiplier=state.Y,
                             iterations=state.iter, residual=residual, mu=state.mu)
        raise ConvergenceError(
            f"no convergence in {config.max_iter} iterations (residual {residual:.3e})",
            last_iterate=last, residual=residual, iterations=state.iter,
        )

    return Decomposition(A=state.A, E=state.E, lambda_nuclear=lambda_nuclear, multiplier=state.Y,
                         iterations=state.iter, residual=residual, mu=state.mu)


def iter_path(X: Union[DataMatrix, np.ndarray], schedule: LambdaSchedule,
              config: Optional[SolverConfig] = None,
              warm_start: bool = True) -> Iterator[Tuple[int, float, Union[Decomposition, ConvergenceError]]]:
    """Yield ``(index, lambda_nuclear, result)`` along the schedule.

    A failed solve yields its (index-annotated) ``ConvergenceError`` instead
    of stopping the sweep; the next solve warm starts from its last iterate.
    """
    previous: Optional[Decomposition] = None
    for index, lambda_nuclear in enumerate(schedule.values):
        try:
            result = rpca_alm(X, lambda_nuclear, init=previous if warm_start else None, config=config)
            previous = result
            _logger.info("lambda #%d: lambda_E=%.6g lambda=%.6g rank %d in %d iterations",
                         index, 1.0 / lambda_nuclear, lambda_nuclear, result.rank(), result.iterations)
            yield index, lambda_nuclear, result
        except ConvergenceError as exc:
            previous = exc.last_iterate
            _logger.warning("lambda #%d (lambda_E=%.6g) did not converge: residual %.3e",
                            index, 1.0 / lambda_nuclear, exc.residual)
            yield index, lambda_nuclear, exc.at(index, lambda_nuclear)


def rpca_path(X: Union[DataMatrix, np.ndarray], schedule: LambdaSchedule,
              config: Optional[SolverConfig] = None, warm_start: bool = True) -> List[Decomposition]:
    """One decomposition per schedule value, each warm started from the previous one."""
    path: List[Decomposition] = []
    for _, _, result in iter_path(X, schedule, config, warm_start=warm_start):
        if isinstance(result, ConvergenceError):
            raise result
        path.append(result)
    return path


def pca_path(X: Union[DataMatrix, np.ndarray], max_rank: Optional[int] = None) -> List[Decomposition]:
    """Truncated-SVD approximations of rank 1..max_rank (classic PCA family)."""
    X = _as_array(X)
    U, s, Vt = scipy.linalg.svd(X, full_matrices=False)
    limit = int(np.count_nonzero(s > 0)) if max_rank is None else min(max_rank, int(np.count_nonzero(s > 0)))
    path = []
    for k in range(1, limit + 1):
        A = (U[:, :k] * s[:k]) @ Vt[:k]
        path.append(Decomposition(A=A, E=X - A))
    return path
