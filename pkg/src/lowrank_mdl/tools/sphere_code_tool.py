"""Spherical-cap coding of unit vectors.

A vector uniform on the unit sphere of R^m has a first coordinate whose CDF is
the relative area of a spherical cap,

    F(u) = 1/2 I(1 - u^2; (m-1)/2, 1/2)   for u <= 0,   F(u) = 1 - F(-u) otherwise.

Once a coordinate is known the rest of the vector is uniform on a smaller
sphere of radius sqrt(r^2 - u^2), so a whole vector is coded coordinate by
coordinate, each rescaled by the running radius. Successive orthonormal
columns are coded in the orthogonal complement of the previously decoded ones.
"""

from __future__ import annotations

import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg

from lowrank_mdl.errors import DomainError, InvalidInputError
from lowrank_mdl.tools.bits_tool import CodeLength
from lowrank_mdl.tools.special_tool import log_beta, reg_inc_beta

_logger = logging.getLogger(__name__)

_UNIT_TOL = 1e-8
_ORTHO_TOL = 1e-6
_MIN_MASS = 1e-300
_TINY_PROJECTION = 1e-12


def spherical_cap_cdf(u, m):
    """P(x_1 <= u) for x uniform on the unit sphere of R^m (m >= 2)."""
    u_arr, m_arr = np.broadcast_arrays(np.asarray(u, dtype=np.float64), np.asarray(m, dtype=np.float64))
    if np.any(~np.isfinite(u_arr)) or np.any(np.abs(u_arr) > 1.0):
        raise DomainError("cap coordinate must lie in [-1, 1]")
    if np.any(m_arr < 2):
        raise DomainError("sphere dimension must be >= 2")
    neg = -np.abs(u_arr)
    lower = 0.5 * np.asarray(reg_inc_beta(np.clip(1.0 - neg * neg, 0.0, 1.0), (m_arr - 1.0) / 2.0, 0.5))
    out = np.where(u_arr <= 0.0, lower, 1.0 - lower)
    return float(out) if out.ndim == 0 else out


def cap_bin_mass(lo, hi, m):
    """P(lo <= x_1 <= hi) on the unit sphere of R^m, for -1 <= lo <= hi <= 1.

    Equal to F(hi) - F(lo), evaluated through the central mass
    T(t) = P(|x_1| <= t) = I(t^2; 1/2, (m-1)/2) or, deep in the tails, its
    complement Q(t) = I(1 - t^2; (m-1)/2, 1/2), which keeps relative precision
    on tiny masses.
    """
    lo, hi, m = np.broadcast_arrays(np.asarray(lo, dtype=np.float64),
                                    np.asarray(hi, dtype=np.float64),
                                    np.asarray(m, dtype=np.float64))
    alpha = (m - 1.0) / 2.0
    n = lo.size
    both = np.concatenate([np.abs(lo).ravel(), np.abs(hi).ravel()])
    alphas = np.concatenate([alpha.ravel(), alpha.ravel()])
    central = np.asarray(reg_inc_beta(both * both, 0.5, alphas))
    t_lo, t_hi = central[:n].reshape(lo.shape), central[n:].reshape(lo.shape)

    straddle = (lo < 0.0) & (hi > 0.0)
    lo_is_near = np.abs(lo) <= np.abs(hi)
    t_near = np.where(lo_is_near, t_lo, t_hi)
    t_far = np.where(lo_is_near, t_hi, t_lo)
    mass = np.where(straddle, 0.5 * (t_lo + t_hi), 0.5 * (t_far - t_near))

    tail = ~straddle & (t_near > 0.5)
    if np.any(tail):
        near = np.where(lo_is_near, np.abs(lo), np.abs(hi))[tail]
        far = np.where(lo_is_near, np.abs(hi), np.abs(lo))[tail]
        a_tail = alpha[tail]
        q = np.asarray(reg_inc_beta(np.clip(1.0 - np.concatenate([near * near, far * far]), 0.0, 1.0),
                                    np.concatenate([a_tail, a_tail]), 0.5))
        k = near.size
        mass = np.array(mass, copy=True)
        mass[tail] = 0.5 * (q[:k] - q[k:])
    return np.maximum(mass, 0.0)


def sphere_density_codelength(u1: float, m: int) -> float:
    """Continuous codelength -log2 p(u1) of a first coordinate (m >= 2).

    -(m-3)/2 log2(1 - u^2) + log2 B((m-1)/2, 1/2); the bin codelength
    approaches this minus log2(delta) as delta shrinks.
    """
    if abs(u1) >= 1.0 or m < 2:
        raise DomainError("density codelength needs |u1| < 1 and m >= 2")
    a = (m - 1.0) / 2.0
    return float(-(m - 3.0) / 2.0 * np.log2(1.0 - u1 * u1) + float(log_beta(a, 0.5)) / np.log(2.0))


def _check_unit(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.size < 1 or not np.all(np.isfinite(u)) or abs(float(np.linalg.norm(u)) - 1.0) > _UNIT_TOL:
        raise InvalidInputError("sphere coder needs a finite unit vector")
    return u


class CapCode(NamedTuple):
    """Quantized coordinates of one unit vector, as the decoder sees them."""

    lo: np.ndarray       # intervalles des coordonnées codées, divisés par le rayon
    hi: np.ndarray
    dims: np.ndarray     # dimension de la calotte de chaque coordonnée codée
    radius: np.ndarray   # rayon restant avant chaque coordonnée codée
    decoded: np.ndarray  # vecteur unitaire reconstruit


def quantize_coordinates(u: np.ndarray, delta: float) -> CapCode:
    """Quantize a unit d-vector coordinate by coordinate on a delta grid.

    Coordinate t is rounded to q delta and read in the bin
    [q delta - delta/2, q delta + delta/2] intersected with [-r, r], under the
    cap CDF of dimension d - t, r being the radius left by the decoded
    coordinates before it. The bins of one coordinate partition [-r, r]. A
    coordinate landing in the outermost bin (the one holding +-r) decodes to
    +-r and exhausts the radius; once r < delta/2 a single bin is left and
    nothing more is coded. The last coordinate is recovered from the norm and
    its sign.
    """
    d = u.size
    decoded = np.zeros(d)
    empty = np.zeros(0)
    if d == 1:
        decoded[0] = -1.0 if u[0] < 0 else 1.0
        return CapCode(empty, empty, empty, empty, decoded)

    q = np.rint(u[:-1] / delta)
    used = np.concatenate([[0.0], np.cumsum((q * delta) ** 2)[:-1]])
    radius = np.sqrt(np.maximum(1.0 - used, 0.0))
    top = np.floor(radius / delta + 0.5)
    edge = (top >= 1) & (np.abs(q) >= top)
    single = top == 0
    # valeurs exactes jusqu'au premier arrêt
    stops = np.flatnonzero(edge | single)
    coded = d - 1
    if stops.size:
        t = int(stops[0])
        if edge[t]:
            q[t] = np.sign(q[t]) * top[t]
            coded = t + 1
        else:
            coded = t
    q, radius = q[:coded], radius[:coded]
    decoded[:coded] = q * delta
    if coded and edge[coded - 1]:
        decoded[coded - 1] = np.sign(q[-1]) * radius[-1]

    lo = np.clip((q * delta - delta / 2.0) / radius, -1.0, 1.0)
    hi = np.clip((q * delta + delta / 2.0) / radius, -1.0, 1.0)
    dims = (d - np.arange(coded)).astype(np.float64)
    rest = 1.0 - float(np.sum(decoded[:-1] ** 2))
    decoded[-1] = (-1.0 if u[-1] < 0 else 1.0) * np.sqrt(max(rest, 0.0))
    return CapCode(lo, hi, dims, radius, decoded)


def _bins_to_bits(lo: np.ndarray, hi: np.ndarray, dims: np.ndarray) -> float:
    if lo.size == 0:
        return 0.0
    mass = np.maximum(cap_bin_mass(lo, hi, dims), _MIN_MASS)
    return float(-np.log2(mass).sum())


def sphere_vector_codelength(u, delta: float) -> CodeLength:
    """Bits to describe a unit vector coordinate by coordinate on a delta grid.

    Every coded coordinate is charged -log2 of the cap mass of its
    quantization bin (see ``quantize_coordinates``); the last one only costs
    its sign.
    """
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    code = quantize_coordinates(_check_unit(u), delta)
    return CodeLength(bits=max(_bins_to_bits(code.lo, code.hi, code.dims) + 1.0, 0.0))


def complement_basis(prev_cols) -> np.ndarray:
    """Deterministic orthonormal basis of the orthogonal complement of ``prev_cols``.

    Householder QR of the previous columns; every basis vector is signed so
    its largest-magnitude entry (lowest index on ties) is positive.
    """
    prev = np.asarray(prev_cols, dtype=np.float64)
    m, i = prev.shape
    if i == 0:
        return np.eye(m)
    Q, _ = scipy.linalg.qr(prev, mode="full")
    basis = Q[:, i:]
    if basis.shape[1]:
        idx = np.argmax(np.abs(basis), axis=0)
        signs = np.sign(basis[idx, np.arange(basis.shape[1])])
        signs[signs == 0] = 1.0
        basis = basis * signs
    return basis


def orthocomplement_coordinates(prev_cols, u, project: bool = False,
                                basis: Optional[np.ndarray] = None) -> np.ndarray:
    """Coordinates of ``u`` in the complement of the span of ``prev_cols``.

    With ``project`` the vector need not be orthogonal to ``prev_cols``: its
    projection on the complement is taken and rescaled to unit norm.
    ``basis`` reuses a ``complement_basis(prev_cols)`` already at hand.
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    prev = np.asarray(prev_cols, dtype=np.float64).reshape(u.size, -1)
    if prev.shape[1] == 0 and not project:
        return u.copy()
    if prev.shape[1] >= u.size:
        raise InvalidInputError("no orthogonal complement left")
    if np.max(np.abs(prev.T @ prev - np.eye(prev.shape[1])), initial=0.0) > _ORTHO_TOL:
        raise InvalidInputError("previous columns are not orthonormal")
    if not project and np.max(np.abs(prev.T @ u)) > _ORTHO_TOL:
        raise InvalidInputError("vector is not orthogonal to the previous columns")
    if basis is None:
        basis = complement_basis(prev)
    c = basis.T @ u
    if not project:
        return c
    norm = float(np.linalg.norm(c))
    if norm < _TINY_PROJECTION:
        # u déjà dans l'espace des colonnes précédentes
        c = np.zeros_like(c)
        c[0] = 1.0
        return c
    return c / norm


def encode_spherical_matrix(M, delta: float) -> Tuple[CodeLength, np.ndarray]:
    """Cap code of every column of M in the complement of the decoded columns before it.

    Returns the codelength and the decoded matrix, whose columns are
    orthonormal and are exactly what a decoder rebuilds from the bits.
    """
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    M = np.asarray(M, dtype=np.float64)
    m, k = M.shape
    decoded = np.zeros((m, k))
    codes: List[CapCode] = []
    for i in range(k):
        prev = decoded[:, :i]
        basis = complement_basis(prev)
        c = orthocomplement_coordinates(prev, M[:, i], project=True, basis=basis)
        code = quantize_coordinates(c, delta)
        codes.append(code)
        decoded[:, i] = basis @ code.decoded
    if not codes:
        return CodeLength(bits=0.0), decoded
    lo = np.concatenate([c.lo for c in codes])
    hi = np.concatenate([c.hi for c in codes])
    dims = np.concatenate([c.dims for c in codes])
    bits = _bins_to_bits(lo, hi, dims) + float(k)
    return CodeLength(bits=max(bits, 0.0)), decoded


def matrix_spherical_codelength(M, delta: float) -> CodeLength:
    """Bits of ``encode_spherical_matrix``."""
    return encode_spherical_matrix(M, delta)[0]
