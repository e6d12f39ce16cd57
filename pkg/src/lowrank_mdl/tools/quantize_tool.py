"""Lossless quantization of a candidate low-rank part.

U, diag(Sigma) and V are rounded to their grids (a cap-coded factor is
replaced by the columns its code decodes to); the error part is then
taken on the delta_e grid as E_i = round(X / delta_e) - round(A_hat / delta_e),
so that round(A_hat / delta_e) + E_i reproduces the quantized data exactly,
in integers. Integer-valued data with delta_e = 1 is reproduced bit for bit.
"""

from __future__ import annotations

import logging
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from lowrank_mdl.errors import EmptyRankError, InvalidInputError
from lowrank_mdl.tools.bits_tool import CoderMode, QuantizationGrid
from lowrank_mdl.tools.numerics_tool import (
    DEFAULT_RANK_TOL,
    DataMatrix,
    ReducedSVD,
    as_finite_matrix,
    frozen_array,
    reduced_svd,
)
from lowrank_mdl.tools.sphere_code_tool import encode_spherical_matrix

_logger = logging.getLogger(__name__)

_RELATIVE_DELTA_E = 1e-6


# ---- Types ----

class QuantizedSVD(BaseModel):
    """Grid-rounded factors of a low-rank part; rank 0 has empty factors and no ``exact``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    U: np.ndarray = Field(..., description="m x k, multiples de delta_u, ou colonnes décodées du code de calottes")
    sigma: np.ndarray = Field(..., description="k valeurs, multiples de delta_sigma")
    V: np.ndarray = Field(..., description="n x k, multiples de delta_v, ou colonnes décodées du code de calottes")
    exact: Optional[ReducedSVD] = Field(None, description="la SVD non arrondie dont viennent les facteurs")

    @property
    def k(self) -> int:
        return int(self.sigma.size)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T

    @classmethod
    def empty(cls, m: int, n: int) -> "QuantizedSVD":
        return cls(U=frozen_array(np.zeros((m, 0))), sigma=frozen_array(np.zeros(0)),
                   V=frozen_array(np.zeros((n, 0))))


# ---- Opérations ----

def default_delta_e(X: Union[DataMatrix, np.ndarray]) -> float:
    """1 for integer-valued data, 1e-6 of the dynamic range otherwise (1 for constant data)."""
    data = X if isinstance(X, DataMatrix) else DataMatrix(entries=X)
    if data.is_integer_valued():
        return 1.0
    spread = float(data.entries.max() - data.entries.min())
    return _RELATIVE_DELTA_E * spread if spread > 0 else 1.0


def grid_indices(M, delta: float) -> np.ndarray:
    """round(M / delta), the integer grid coordinates of M."""
    return np.rint(np.asarray(M, dtype=np.float64) / delta)


def _quantize_factor(F: np.ndarray, delta: float, mode: CoderMode) -> np.ndarray:
    # spherical : les colonnes décodées du code de calottes
    if mode == "spherical":
        return encode_spherical_matrix(F, delta)[1]
    return delta * grid_indices(F, delta)


def quantize_svd(svd: Optional[ReducedSVD], m: int, n: int, grid: QuantizationGrid,
                 u_mode: CoderMode = "predictive", v_mode: CoderMode = "predictive") -> QuantizedSVD:
    """Round an exact SVD to ``grid``; triplets whose sigma rounds to zero are dropped.

    Predictive factors are rounded entrywise to their grid; spherical factors
    are the columns the cap code decodes to, so E is taken against what a
    decoder actually rebuilds.
    """
    if svd is None:
        return QuantizedSVD.empty(m, n)
    sigma = grid.delta_sigma * grid_indices(svd.sigma, grid.delta_sigma)
    keep = sigma > 0
    if not np.all(keep):
        _logger.debug("dropping %d singular value(s) below delta_sigma", int((~keep).sum()))
        if not np.any(keep):
            return QuantizedSVD.empty(m, n)
        svd = ReducedSVD(U=svd.U[:, keep], sigma=svd.sigma[keep], V=svd.V[:, keep])
        sigma = sigma[keep]
    return QuantizedSVD(
        U=frozen_array(_quantize_factor(svd.U, grid.delta_u, u_mode)),
        sigma=frozen_array(sigma),
        V=frozen_array(_quantize_factor(svd.V, grid.delta_v, v_mode)),
        exact=svd,
    )


def error_on_grid(X: np.ndarray, quantized: QuantizedSVD, delta_e: float) -> np.ndarray:
    """E = delta_e * (round(X / delta_e) - round(A_hat / delta_e))."""
    if quantized.k == 0:
        return delta_e * grid_indices(X, delta_e)
    return delta_e * (grid_indices(X, delta_e) - grid_indices(quantized.reconstruct(), delta_e))


def exact_svd(A, rank_tol: float = DEFAULT_RANK_TOL) -> Optional[ReducedSVD]:
    """``reduced_svd`` with the empty-rank case mapped to None (the rank-0 model)."""
    try:
        return reduced_svd(A, rank_tol)
    except EmptyRankError:
        return None


def quantize_decomposition(X: Union[DataMatrix, np.ndarray], A, grid: QuantizationGrid,
                           rank_tol: float = DEFAULT_RANK_TOL,
                           u_mode: CoderMode = "predictive", v_mode: CoderMode = "predictive",
                           svd: Optional[ReducedSVD] = None) -> Tuple[QuantizedSVD, np.ndarray]:
    """Quantize the SVD of ``A`` on ``grid`` and absorb every rounding error into E.

    ``svd`` skips the decomposition of ``A`` when the caller already has it.
    """
    X = X.entries if isinstance(X, DataMatrix) else as_finite_matrix(X, "X")
    A = as_finite_matrix(A, "A")
    if A.shape != X.shape:
        raise InvalidInputError(f"A {A.shape} does not match X {X.shape}")
    m, n = X.shape
    if svd is None:
        svd = exact_svd(A, rank_tol)
    quantized = quantize_svd(svd, m, n, grid, u_mode, v_mode)
    return quantized, error_on_grid(X, quantized, grid.delta_e)
