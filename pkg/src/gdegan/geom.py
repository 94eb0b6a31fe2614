"""Geometric primitives: real spherical harmonics, rotation blocks, radial bases.

Harmonic convention used throughout the repository
---------------------------------------------------
Real spherical harmonics with the degree-1 components ordered ``(x, y, z)``,
i.e. ``Y1(dir) = dir``.  The degree-2 components are, in order,

    (sqrt(3)*x*z,  sqrt(3)*x*y,  y^2 - (x^2 + z^2)/2,  sqrt(3)*y*z,
     sqrt(3)/2 * (z^2 - x^2))

With this scaling every degree satisfies ``norm(Yl(dir)) == 1`` pointwise on
the unit sphere, so components of different degrees have comparable
magnitude.  All rotation blocks produced by :func:`wigner_block` act on
vectors in this exact component ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NormalizationError, UnsupportedDegree

L_MAX_SUPPORTED = 2

_UNIT_TOL = 1e-6


@dataclass(frozen=True)
class SphHarm:
    """Coefficients of one harmonic degree: ``len(coeffs) == 2*degree + 1``."""

    degree: int
    coeffs: np.ndarray


@dataclass(frozen=True)
class Rotation:
    """A proper rotation, validated to be orthogonal with determinant +1."""

    matrix: np.ndarray = field()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise NormalizationError(f"rotation matrix must be 3x3, got {m.shape}")
        if np.max(np.abs(m.T @ m - np.eye(3))) > 1e-9:
            raise NormalizationError("matrix is not orthogonal within 1e-9")
        if abs(np.linalg.det(m) - 1.0) > 1e-9:
            raise NormalizationError("matrix determinant is not +1 within 1e-9")
        object.__setattr__(self, "matrix", m)

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.eye(3))

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "Rotation":
        """Rodrigues rotation about ``axis`` (normalized internally)."""
        a = np.asarray(axis, dtype=np.float64)
        n = np.linalg.norm(a)
        if n == 0:
            raise DomainError("rotation axis must be nonzero")
        a = a / n
        k = np.array(
            [[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]]
        )
        m = np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)
        return Rotation(m)

    @staticmethod
    def random(rng: np.random.Generator) -> "Rotation":
        """Uniformly random rotation from a QR decomposition of a Gaussian."""
        a = rng.standard_normal((3, 3))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return Rotation(q)


@dataclass(frozen=True)
class WignerBlock:
    """Orthogonal matrix rotating degree-``degree`` harmonic coefficients."""

    degree: int
    matrix: np.ndarray


# Quadratic forms Q_m with Y2_m(dir) = dir^T Q_m dir.  Each is symmetric
# traceless with Frobenius norm^2 = 3/2, so conjugation by a rotation is an
# orthogonal map in this basis.
_S3 = math.sqrt(3.0)
_Q2 = np.array(
    [
        [[0.0, 0.0, _S3 / 2], [0.0, 0.0, 0.0], [_S3 / 2, 0.0, 0.0]],
        [[0.0, _S3 / 2, 0.0], [_S3 / 2, 0.0, 0.0], [0.0, 0.0, 0.0]],
        [[-0.5, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -0.5]],
        [[0.0, 0.0, 0.0], [0.0, 0.0, _S3 / 2], [0.0, _S3 / 2, 0.0]],
        [[-_S3 / 2, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, _S3 / 2]],
    ]
)


def _check_degree(l: int) -> None:
    if not 0 <= l <= L_MAX_SUPPORTED:
        raise UnsupportedDegree(f"degree {l} unsupported (max {L_MAX_SUPPORTED})")


def harmonics_stack(directions: np.ndarray, l: int) -> np.ndarray:
    """Degree-``l`` harmonics for a batch of unit vectors, shape (m, 2l+1).

    Vectorized core used by the message-passing pipeline; no unit-norm
    validation is performed here (callers pass exact unit edge vectors).
    """
    _check_degree(l)
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    if l == 0:
        return np.ones((d.shape[0], 1))
    if l == 1:
        return d.copy()
    return np.stack(
        [
            _S3 * x * z,
            _S3 * x * y,
            y * y - 0.5 * (x * x + z * z),
            _S3 * y * z,
            (_S3 / 2) * (z * z - x * x),
        ],
        axis=1,
    )


def spherical_harmonics(direction, l_max: int) -> list[SphHarm]:
    """Real harmonics of ``direction`` for every degree 0..l_max.

    Raises NormalizationError when the direction deviates from unit norm by
    more than 1e-6, and UnsupportedDegree for l_max > 2.
    """
    _check_degree(l_max)
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(d) - 1.0) > _UNIT_TOL:
        raise NormalizationError(f"direction norm {np.linalg.norm(d):.8f} != 1")
    return [SphHarm(l, harmonics_stack(d[None, :], l)[0]) for l in range(l_max + 1)]


def wigner_block(rot, l: int) -> WignerBlock:
    """Matrix representing ``rot`` on degree-``l`` harmonic coefficients.

    Degree 0 is the identity scalar, degree 1 is the rotation matrix itself
    (the degree-1 ordering is Cartesian), and degree 2 is obtained exactly by
    expanding the conjugated quadratic forms in the fixed Q basis.
    """
    _check_degree(l)
    r = rot.matrix if isinstance(rot, Rotation) else Rotation(np.asarray(rot)).matrix
    if l == 0:
        return WignerBlock(0, np.ones((1, 1)))
    if l == 1:
        return WignerBlock(1, r.copy())
    # D[m, n] = (2/3) tr(R^T Q_m R Q_n), i.e. the expansion of the rotated
    # quadratic form Y2_m(R dir) = dir^T (R^T Q_m R) dir in the Q basis.
    conj = np.einsum("ia,mij,jb->mab", r, _Q2, r)
    d = (2.0 / 3.0) * np.einsum("mab,nab->mn", conj, _Q2)
    return WignerBlock(2, d)


def rbf_expand(distance, k: int, r_cut: float) -> np.ndarray:
    """Gaussian radial basis expansion of a distance (or batch of distances).

    Centers are linearly spaced on [0, r_cut]; all k basis functions share
    the width parameter gamma = (k / r_cut)^2, so component m evaluates to
    exp(-gamma * (distance - c_m)^2).  Output values lie in (0, 1].
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if r_cut <= 0:
        raise DomainError(f"r_cut must be positive, got {r_cut}")
    d = np.asarray(distance, dtype=np.float64)
    if np.any(d < 0):
        raise DomainError("distance must be non-negative")
    centers = np.linspace(0.0, r_cut, k) if k > 1 else np.array([0.0])
    gamma = (k / r_cut) ** 2
    return np.exp(-gamma * (d[..., None] - centers) ** 2)


def cosine_cutoff(distance, r_cut: float):
    """Smooth cutoff 0.5*(cos(pi*d/r_cut) + 1) for d < r_cut, else 0."""
    if r_cut <= 0:
        raise DomainError(f"r_cut must be positive, got {r_cut}")
    d = np.asarray(distance, dtype=np.float64)
    out = 0.5 * (np.cos(np.pi * d / r_cut) + 1.0) * (d < r_cut)
    return float(out) if np.isscalar(distance) else out
