"""Total description length L(X | A) = L(U) + L(Sigma) + L(V) + L(E), and its grid refinement."""

from __future__ import annotations

import logging
from typing import Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from lowrank_mdl.errors import ConsistencyError, InvalidInputError
from lowrank_mdl.tools.bits_tool import BitAllocation, CoderMode, QuantizationGrid
from lowrank_mdl.tools.integer_code_tool import sigma_codelength
from lowrank_mdl.tools.numerics_tool import DEFAULT_RANK_TOL, DataMatrix, ReducedSVD, as_finite_matrix
from lowrank_mdl.tools.predictive_code_tool import matrix_U_codelength, matrix_V_codelength
from lowrank_mdl.tools.quantize_tool import QuantizedSVD, exact_svd, grid_indices, quantize_decomposition
from lowrank_mdl.tools.sparse_code_tool import sparse_error_codelength

_logger = logging.getLogger(__name__)

MAX_HALVINGS = 40

UMode = Literal["auto", "predictive", "spherical"]


# ---- Types ----

class Refinement(BaseModel):
    """Best grid found by halving delta_u and delta_v, with everything needed to export it."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: QuantizationGrid
    allocation: BitAllocation
    halvings: int = Field(..., ge=0, description="divisions par deux acceptées")
    quantized: QuantizedSVD
    E: np.ndarray = Field(..., description="partie erreur sur la grille delta_e")


# ---- Opérations ----

def resolve_u_mode(mode: UMode, frame_shape: Optional[Tuple[int, int]]) -> CoderMode:
    """``auto`` is predictive when the frame shape is known, spherical otherwise."""
    if mode == "auto":
        return "predictive" if frame_shape is not None else "spherical"
    return mode


def check_lossless(X: np.ndarray, quantized: QuantizedSVD, E: np.ndarray, delta_e: float) -> None:
    """Raise ``ConsistencyError`` unless round(A_hat / delta_e) + E / delta_e == round(X / delta_e)."""
    e_index = grid_indices(E, delta_e)
    slack = 1e-9 * delta_e * max(1.0, float(np.abs(e_index).max(initial=0.0)))
    if np.any(np.abs(e_index * delta_e - E) > slack):
        raise ConsistencyError("E is not on the delta_e grid")
    a_index = grid_indices(quantized.reconstruct(), delta_e) if quantized.k else 0.0
    mismatch = int(np.count_nonzero(a_index + e_index != grid_indices(X, delta_e)))
    if mismatch:
        raise ConsistencyError(f"quantized A + E differs from X in {mismatch} entr{'y' if mismatch == 1 else 'ies'}")


def total_codelength(X: Union[DataMatrix, np.ndarray], quantized: QuantizedSVD, E, grid: QuantizationGrid,
                     u_mode: UMode = "auto", v_mode: CoderMode = "predictive",
                     frame_shape: Optional[Tuple[int, int]] = None) -> BitAllocation:
    """BitAllocation of the described pair; the rank-0 model only pays for E."""
    if isinstance(X, DataMatrix):
        frame_shape = frame_shape if frame_shape is not None else X.frame_shape
        X = X.entries
    X = as_finite_matrix(X, "X")
    E = as_finite_matrix(E, "E")
    if E.shape != X.shape:
        raise InvalidInputError(f"E {E.shape} does not match X {X.shape}")
    check_lossless(X, quantized, E, grid.delta_e)

    l_e = sparse_error_codelength(E, grid.delta_e)
    if quantized.k == 0:
        return BitAllocation(l_e=l_e, total=None)
    exact = quantized.exact
    return BitAllocation(
        l_u=matrix_U_codelength(exact.U, frame_shape, grid, resolve_u_mode(u_mode, frame_shape)),
        l_sigma=sigma_codelength(exact.sigma, grid.delta_sigma),
        l_v=matrix_V_codelength(exact.V, grid, v_mode),
        l_e=l_e,
        total=None,
    )


def refine_quantization(X: Union[DataMatrix, np.ndarray], A, start_grid: QuantizationGrid,
                        u_mode: UMode = "auto", v_mode: CoderMode = "predictive",
                        rank_tol: float = DEFAULT_RANK_TOL, max_halvings: int = MAX_HALVINGS,
                        svd: Optional[ReducedSVD] = None) -> Refinement:
    """Halve delta_u and delta_v together until L(X | A) stops strictly decreasing.

    ``svd`` skips the decomposition of ``A`` when the caller already has it.
    """
    data = X if isinstance(X, DataMatrix) else DataMatrix(entries=X)
    if svd is None:
        svd = exact_svd(as_finite_matrix(A, "A"), rank_tol)
    mode = resolve_u_mode(u_mode, data.frame_shape)

    def score(grid: QuantizationGrid) -> Refinement:
        quantized, E = quantize_decomposition(data, A, grid, rank_tol, mode, v_mode, svd=svd)
        allocation = total_codelength(data, quantized, E, grid, mode, v_mode)
        return Refinement(grid=grid, allocation=allocation, halvings=0, quantized=quantized, E=E)

    best = score(start_grid)
    if svd is None:
        return best
    halvings = 0
    while halvings < max_halvings:
        candidate = score(best.grid.halved())
        _logger.debug("halving #%d: delta_u=%.3g delta_v=%.3g -> %.6g bits (best %.6g)",
                      halvings + 1, candidate.grid.delta_u, candidate.grid.delta_v,
                      candidate.allocation.total.bits, best.allocation.total.bits)
        if not candidate.allocation.total.bits < best.allocation.total.bits:
            break
        halvings += 1
        best = candidate
    return best.model_copy(update={"halvings": halvings})
