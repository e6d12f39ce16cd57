"""Predictive two-part codes for the columns of U (as images) and of V (as time series).

Columns are first mapped to integer indices on their quantization grid, then
decorrelated by a causal predictor whose residuals are coded with a
discretized Laplacian whose scale is estimated by maximum likelihood. Working
on the index grid keeps every transform exactly invertible.
"""

from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np

from lowrank_mdl.errors import DomainError, InvalidInputError
from lowrank_mdl.tools.bits_tool import CodeLength, CoderMode, LaplacianTwoPartModel, QuantizationGrid
from lowrank_mdl.tools.quantize_tool import grid_indices
from lowrank_mdl.tools.sphere_code_tool import matrix_spherical_codelength

_logger = logging.getLogger(__name__)

_LN2 = float(np.log(2.0))


# ---- Prédicteurs ----

def bilinear_residuals(B) -> np.ndarray:
    """B - B_hat with the causal predictor b[j, l-1] + b[j-1, l] - b[j-1, l-1].

    Pixels outside the image count as 0. A stack of images (..., height,
    width) is handled image by image.
    """
    B = np.asarray(B, dtype=np.float64)
    if B.ndim < 2:
        raise InvalidInputError(f"bilinear predictor needs images, got shape {B.shape}")
    pad = [(0, 0)] * (B.ndim - 2) + [(1, 0), (1, 0)]
    padded = np.pad(B, pad)
    return B - padded[..., 1:, :-1] - padded[..., :-1, 1:] + padded[..., :-1, :-1]


def bilinear_reconstruct(R) -> np.ndarray:
    """Inverse of ``bilinear_residuals`` (two-dimensional prefix sums)."""
    R = np.asarray(R, dtype=np.float64)
    if R.ndim < 2:
        raise InvalidInputError(f"bilinear predictor needs images, got shape {R.shape}")
    return np.cumsum(np.cumsum(R, axis=-2), axis=-1)


def first_diff_residuals(v) -> np.ndarray:
    """(v_1, v_2 - v_1, ..., v_n - v_{n-1}); a matrix is differenced down its columns."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim not in (1, 2) or v.shape[0] < 1:
        raise InvalidInputError("first differences need a non-empty sequence or matrix")
    return np.diff(v, axis=0, prepend=np.zeros((1,) + v.shape[1:]))


def first_diff_reconstruct(r) -> np.ndarray:
    """Inverse of ``first_diff_residuals`` (prefix sums)."""
    return np.cumsum(np.asarray(r, dtype=np.float64), axis=0)


# ---- Code laplacien en deux parties ----

def laplacian_bin_bits(q_abs: np.ndarray, theta: np.ndarray, delta: float) -> np.ndarray:
    """-log2 of the Laplacian(theta) mass of the width-delta bin |q|, elementwise.

    Bin 0 holds 1 - exp(-delta / 2 theta); bin q != 0 holds
    1/2 exp(-(|q| - 1/2) delta / theta) (1 - exp(-delta / theta)).
    """
    ratio = delta / theta
    zero_bits = -np.log2(-np.expm1(-ratio / 2.0))
    tail_bits = (q_abs - 0.5) * ratio / _LN2 + 1.0 - np.log2(-np.expm1(-ratio))
    return np.where(q_abs == 0, zero_bits, tail_bits)


def laplacian_columns_bits(R: np.ndarray, delta: float) -> np.ndarray:
    """Two-part codelength of every column of a residual matrix, one theta per column.

    Columns that are identically zero only pay their parameter.
    """
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    R = np.asarray(R, dtype=np.float64)
    samples = R.shape[0]
    param = 0.5 * np.log2(samples) if samples else 0.0
    theta = np.abs(R).mean(axis=0)
    live = theta > 0
    bits = np.full(R.shape[1], param)
    if np.any(live):
        q_abs = np.abs(np.rint(R[:, live] / delta))
        bits[live] += laplacian_bin_bits(q_abs, theta[live], delta).sum(axis=0)
    return bits


def laplacian_two_part_codelength(residuals, delta: float) -> Tuple[CodeLength, LaplacianTwoPartModel]:
    """ML Laplacian fit, then the data coded on width-delta bins.

    theta_hat = mean |r|; the parameter costs 1/2 log2 N bits. An all-zero
    sequence is a point mass on the zero bin and costs the parameter alone.
    """
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if r.size == 0:
        raise InvalidInputError("laplacian code needs at least one residual")
    if not np.all(np.isfinite(r)):
        raise InvalidInputError("residuals must be finite")
    bits = float(laplacian_columns_bits(r[:, None], delta)[0])
    model = LaplacianTwoPartModel(theta_hat=float(np.abs(r).mean()), param_bits=0.5 * np.log2(r.size),
                                  samples=int(r.size))
    return CodeLength(bits=max(bits, 0.0)), model


# ---- Codeurs matriciels ----

def _columns_codelength(R: np.ndarray, delta: float) -> CodeLength:
    bits = sum(laplacian_two_part_codelength(R[:, i], delta)[0].bits for i in range(R.shape[1]))
    return CodeLength(bits=float(bits))


def matrix_U_codelength(U, frame_shape: Optional[Tuple[int, int]], grid: QuantizationGrid,
                        mode: CoderMode = "predictive") -> CodeLength:
    """Bits for the left factor.

    predictive: every column is quantized with delta_u, reshaped to the frame
    and coded through its bilinear prediction residuals. spherical: every
    column is cap-coded in the complement of the decoded columns before it.
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2:
        raise InvalidInputError(f"U must be 2-D, got shape {U.shape}")
    m, k = U.shape
    if k == 0:
        return CodeLength(bits=0.0)
    if mode == "spherical":
        return matrix_spherical_codelength(U, grid.delta_u)
    if mode != "predictive":
        raise InvalidInputError(f"unknown coder mode {mode!r}")
    if frame_shape is None:
        raise InvalidInputError("predictive U coding needs the frame shape")
    height, width = frame_shape
    if height * width != m:
        raise InvalidInputError(f"frame shape {frame_shape} does not match {m} rows of U")
    images = grid_indices(U, grid.delta_u).T.reshape(k, height, width)
    R = bilinear_residuals(images).reshape(k, m).T * grid.delta_u
    return _columns_codelength(R, grid.delta_u)


def matrix_V_codelength(V, grid: QuantizationGrid, mode: CoderMode = "predictive") -> CodeLength:
    """Bits for the right factor: first differences of every quantized column, or the cap code."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2:
        raise InvalidInputError(f"V must be 2-D, got shape {V.shape}")
    if V.shape[1] == 0:
        return CodeLength(bits=0.0)
    if mode == "spherical":
        return matrix_spherical_codelength(V, grid.delta_v)
    if mode != "predictive":
        raise InvalidInputError(f"unknown coder mode {mode!r}")
    R = first_diff_residuals(grid_indices(V, grid.delta_v)) * grid.delta_v
    return _columns_codelength(R, grid.delta_v)
