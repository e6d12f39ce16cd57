"""Dense linear-algebra primitives shared by the solver and the coders.

The data types defined here (``DataMatrix``, ``ReducedSVD``,
``Decomposition``) carry numpy arrays; they are frozen pydantic models whose
arrays are made read-only at validation time.
"""

from __future__ import annotations

import logging
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationInfo, field_validator, model_validator

from lowrank_mdl.errors import ConsistencyError, DomainError, EmptyRankError, InvalidInputError

_logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-12
_ORTHO_TOL = 1e-8
_NORM_TOL = 1e-10


def as_finite_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a 2-D float64 array, rejecting NaN and infinities."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def frozen_array(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


# ---- Types ----

class DataMatrix(BaseModel):
    """Observed matrix X; columns are vectorized frames or samples."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray = Field(..., description="matrice réelle m x n, dans les unités des données d'entrée")
    frame_shape: Optional[Tuple[int, int]] = Field(None, description="(hauteur, largeur) quand les colonnes sont des images")

    @field_validator("entries", mode="before")
    @classmethod
    def _check_entries(cls, value):
        arr = as_finite_matrix(value, "X")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError(f"X must have at least one row and one column, got {arr.shape}")
        return frozen_array(arr)

    @model_validator(mode="after")
    def _check_frame_shape(self) -> "DataMatrix":
        if self.frame_shape is not None:
            height, width = self.frame_shape
            if height < 1 or width < 1 or height * width != self.rows:
                raise InvalidInputError(
                    f"frame shape {self.frame_shape} does not match {self.rows} rows"
                )
        return self

    @property
    def rows(self) -> int:
        return int(self.entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self.entries.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    def is_integer_valued(self) -> bool:
        return bool(np.all(self.entries == np.rint(self.entries)))


class ReducedSVD(BaseModel):
    """(U, diag(sigma), V) with exactly k retained singular triplets."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    U: np.ndarray = Field(..., description="m x k, colonnes orthonormées")
    sigma: np.ndarray = Field(..., description="k valeurs singulières positives, décroissantes")
    V: np.ndarray = Field(..., description="n x k, colonnes orthonormées")

    @field_validator("U", "V", mode="before")
    @classmethod
    def _check_factor(cls, value, info: ValidationInfo):
        arr = as_finite_matrix(value, info.field_name)
        k = arr.shape[1]
        if k and np.max(np.abs(np.linalg.norm(arr, axis=0) - 1.0)) > _NORM_TOL:
            raise InvalidInputError(f"columns of {info.field_name} are not unit norm")
        if k and np.max(np.abs(arr.T @ arr - np.eye(k))) > _ORTHO_TOL:
            raise InvalidInputError(f"{info.field_name} is not orthonormal")
        return frozen_array(arr)

    @field_validator("sigma", mode="before")
    @classmethod
    def _check_sigma(cls, value):
        arr = np.asarray(value, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise InvalidInputError("singular values must be finite and strictly positive")
        if np.any(np.diff(arr) > 0):
            raise InvalidInputError("singular values must be non-increasing")
        return frozen_array(arr)

    @model_validator(mode="after")
    def _check_rank(self) -> "ReducedSVD":
        k = self.sigma.size
        if self.U.shape[1] != k or self.V.shape[1] != k:
            raise InvalidInputError(
                f"inconsistent ranks: U {self.U.shape}, sigma {k}, V {self.V.shape}"
            )
        if k < 1 or k > min(self.U.shape[0], self.V.shape[0]):
            raise InvalidInputError(f"rank {k} outside [1, min(m, n)]")
        return self

    @property
    def k(self) -> int:
        return int(self.sigma.size)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


class Decomposition(BaseModel):
    """A pair (A, E) with X = A + E, produced by one regularization weight.

    Validate with ``context={"X": X, "tol": tol}`` to check that the pair
    reproduces the data (see ``Decomposition.checked``).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A: np.ndarray = Field(..., description="partie bas rang")
    E: np.ndarray = Field(..., description="partie erreur")
    lambda_nuclear: Optional[PositiveFloat] = Field(
        None, description="poids de la norme nucléaire dans ||X - W||_1 + lambda ||W||_*"
    )
    multiplier: Optional[np.ndarray] = Field(None, description="variable duale de l'ALM, gardée pour les redémarrages à chaud")
    iterations: int = Field(0, ge=0, description="itérations ALM effectuées")
    residual: float = Field(0.0, ge=0.0, description="||X - A - E||_F / ||X||_F final")
    mu: Optional[float] = Field(None, description="pénalité atteinte à la dernière itération")

    @field_validator("A", "E", mode="before")
    @classmethod
    def _check_part(cls, value, info: ValidationInfo):
        return frozen_array(as_finite_matrix(value, info.field_name))

    @model_validator(mode="after")
    def _check_against_data(self, info: ValidationInfo) -> "Decomposition":
        if self.A.shape != self.E.shape:
            raise InvalidInputError(f"A {self.A.shape} and E {self.E.shape} differ in shape")
        context = info.context or {}
        if "X" in context:
            X = np.asarray(context["X"], dtype=np.float64)
            if X.shape != self.A.shape:
                raise InvalidInputError(f"decomposition shape {self.A.shape} does not match X {X.shape}")
            scale = max(float(np.linalg.norm(X)), 1.0)
            gap = float(np.linalg.norm(X - self.A - self.E))
            if gap > context.get("tol", 1e-6) * scale:
                raise ConsistencyError(f"A + E misses X by {gap:.3g} (Frobenius)")
        return self

    @classmethod
    def checked(cls, X, A, E, tol: float = 1e-6, **fields) -> "Decomposition":
        """Build a decomposition and verify ``||X - A - E||_F <= tol * max(||X||_F, 1)``."""
        return cls.model_validate(dict(A=A, E=E, **fields), context={"X": X, "tol": tol})

    @property
    def lambda_sparse(self) -> Optional[float]:
        """The l1 weight of the canonical form, 1 / lambda_nuclear."""
        return None if self.lambda_nuclear is None else 1.0 / self.lambda_nuclear

    def rank(self, rank_tol: float = DEFAULT_RANK_TOL) -> int:
        return matrix_rank(self.A, rank_tol)


# ---- Opérations ----

def _svd(M: np.ndarray):
    try:
        return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        _logger.debug("gesdd did not converge, retrying with gesvd")
        return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")


def _fix_signs(U: np.ndarray, V: np.ndarray):
    # l'entrée de plus grand module de chaque colonne de U est rendue positive
    if U.shape[1] == 0:
        return U, V
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def reduced_svd(M, rank_tol: float = DEFAULT_RANK_TOL) -> ReducedSVD:
    """Reduced SVD of ``M`` keeping singular values above ``rank_tol * sigma_max``.

    Raises ``EmptyRankError`` when nothing survives (e.g. M = 0); callers
    treat that case as the rank-0 model.
    """
    if rank_tol < 0:
        raise DomainError(f"rank_tol must be >= 0, got {rank_tol}")
    M = as_finite_matrix(M, "M")
    if M.size == 0:
        raise EmptyRankError("empty matrix")
    U, s, Vt = _svd(M)
    if s.size == 0 or s[0] <= 0.0:
        raise EmptyRankError("matrix is identically zero")
    k = int(np.count_nonzero(s > rank_tol * s[0]))
    U, V = _fix_signs(U[:, :k], Vt[:k].T)
    return ReducedSVD(U=U, sigma=s[:k], V=V)


def matrix_rank(M, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    s = scipy.linalg.svdvals(as_finite_matrix(M))
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol * s[0]))


def soft_threshold(x: Union[float, np.ndarray], tau: float) -> Union[float, np.ndarray]:
    """sign(x) * max(|x| - tau, 0), elementwise."""
    if tau < 0:
        raise DomainError(f"threshold must be >= 0, got {tau}")
    arr = np.asarray(x, dtype=np.float64)
    out = np.sign(arr) * np.maximum(np.abs(arr) - tau, 0.0)
    return float(out) if out.ndim == 0 else out


def singular_value_threshold(M, tau: float, return_rank: bool = False):
    """Proximal operator of ``tau * ||.||_*``: shrink every singular value by tau.

    With ``return_rank`` the rank of the result comes back alongside it.
    """
    if tau < 0:
        raise DomainError(f"threshold must be >= 0, got {tau}")
    M = as_finite_matrix(M, "M")
    U, s, Vt = _svd(M)
    shrunk = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(shrunk))
    out = np.zeros_like(M) if k == 0 else (U[:, :k] * shrunk[:k]) @ Vt[:k]
    return (out, k) if return_rank else out


def nuclear_norm(M) -> float:
    return float(np.sum(scipy.linalg.svdvals(as_finite_matrix(M))))
