"""Universal prior for integers (log*) and the Sigma coder built on it."""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from lowrank_mdl.errors import DomainError, UnderflowError
from lowrank_mdl.tools.bits_tool import CodeLength

KRAFT_CONSTANT = 2.865
_LOG2_KRAFT = float(np.log2(KRAFT_CONSTANT))
SIGMA_PRECISION = 1e-16


def universal_int_codelengths(j: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """log* codelengths of an array of positive integers.

    log2 j + log2 log2 j + ... summed while the terms stay positive, plus
    log2 2.865.
    """
    arr = np.asarray(j, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 1):
        raise DomainError("the universal integer code needs j >= 1")
    total = np.full(arr.shape, _LOG2_KRAFT)
    term = np.log2(arr)
    positive = term > 0
    while np.any(positive):
        total = total + np.where(positive, term, 0.0)
        term = np.log2(np.where(positive, term, 1.0))
        positive &= term > 0
    return total


def universal_int_codelength(j: int) -> CodeLength:
    """Codelength of a positive integer under Rissanen's universal prior."""
    return CodeLength(bits=float(universal_int_codelengths(np.asarray(j, dtype=np.float64))))


def quantize_sigma(sigma, delta_sigma: float = SIGMA_PRECISION) -> np.ndarray:
    """Integer indices round(sigma / delta_sigma), as floats (they exceed int64 range)."""
    indices = np.rint(np.asarray(sigma, dtype=np.float64).reshape(-1) / delta_sigma)
    if np.any(indices < 1):
        raise UnderflowError(f"singular value below the representable precision {delta_sigma:g}")
    return indices


def sigma_codelength(sigma, delta_sigma: float = SIGMA_PRECISION) -> CodeLength:
    """Sum of log* codelengths of the quantized singular values."""
    sigma = np.asarray(sigma, dtype=np.float64).reshape(-1)
    if sigma.size == 0:
        return CodeLength(bits=0.0)
    if np.any(sigma <= 0):
        raise DomainError("singular values must be positive")
    return CodeLength(bits=float(universal_int_codelengths(quantize_sigma(sigma, delta_sigma)).sum()))
