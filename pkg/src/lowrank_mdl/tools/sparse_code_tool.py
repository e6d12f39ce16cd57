"""Enumerative support coding and the row-wise coder of the sparse error E."""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from lowrank_mdl.errors import DomainError, InvalidInputError
from lowrank_mdl.tools.bits_tool import CodeLength
from lowrank_mdl.tools.predictive_code_tool import laplacian_bin_bits
from lowrank_mdl.tools.special_tool import log2_binomial


class ErrorRowsBreakdown(BaseModel):
    """Per-row split of L(E)."""

    model_config = ConfigDict(frozen=True)

    support_bits: tuple = Field(..., description="code énumératif du motif des non-nuls de chaque ligne")
    value_bits: tuple = Field(..., description="code laplacien en deux parties des valeurs non nulles de chaque ligne")

    @property
    def total(self) -> float:
        return float(sum(self.support_bits) + sum(self.value_bits))


def enumerative_codelength(n: int, k: int) -> CodeLength:
    """log2(n + 1) for the weight k, then log2 C(n, k) for the support itself."""
    if n < 0 or k < 0 or k > n:
        raise DomainError(f"enumerative code needs 0 <= k <= n, got n={n}, k={k}")
    return CodeLength(bits=float(np.log2(n + 1.0) + log2_binomial(n, k)))


def error_rows_breakdown(E, delta_e: float) -> ErrorRowsBreakdown:
    """Quantize E on the delta_e grid and code every row on its own.

    A row pays its support (enumerative code over n positions) and, when it
    has nonzeros, a Laplacian two-part code of those values with its own
    scale estimate.
    """
    if delta_e <= 0:
        raise DomainError(f"delta_e must be positive, got {delta_e}")
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or not np.all(np.isfinite(E)):
        raise InvalidInputError("E must be a finite 2-D matrix")
    m, n = E.shape
    q = np.rint(E / delta_e)
    support = q != 0
    k = support.sum(axis=1)
    support_bits = np.log2(n + 1.0) + np.asarray(log2_binomial(np.full(m, float(n)), k.astype(np.float64)))

    value_bits = np.zeros(m)
    live = k > 0
    if np.any(live):
        q_abs = np.abs(q[live])
        k_live = k[live].astype(np.float64)
        theta = q_abs.sum(axis=1) * delta_e / k_live
        bits = np.where(support[live], laplacian_bin_bits(q_abs, theta[:, None], delta_e), 0.0)
        value_bits[live] = bits.sum(axis=1) + 0.5 * np.log2(k_live)
    return ErrorRowsBreakdown(support_bits=tuple(float(b) for b in support_bits),
                              value_bits=tuple(float(b) for b in value_bits))


def sparse_error_codelength(E, delta_e: float) -> CodeLength:
    """L(E): sum over rows of the support code plus the nonzero-value code."""
    return CodeLength(bits=max(error_rows_breakdown(E, delta_e).total, 0.0))
