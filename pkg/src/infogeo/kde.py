"""Gaussian kernel density estimates with a diagonal bandwidth.

The estimate built on centers ``x_j`` is

    f(x) = 1/n sum_j |2 pi H|^(-1/2) exp(-1/2 (x - x_j)^T H^(-1) (x - x_j))

with ``H = diag(h**2)``: the per-dimension bandwidth ``h`` is kept in
standard-deviation units and squared to form the kernel covariance.

Under a projection ``A`` (``m x d``) both the evaluation points and the
centers are mapped through ``A`` and the bandwidth is recomputed from the
projected centers unless one is supplied explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .data import DataSet
from .errors import ValidationError

__all__ = [
    "OVERSMOOTH_CONSTANT",
    "DensityEstimate",
    "max_smoothing_bandwidth",
    "kernel_exponents",
    "log_density_eval",
    "density_eval",
]

OVERSMOOTH_CONSTANT = 1.144


def _as_matrix(samples) -> np.ndarray:
    if isinstance(samples, DataSet):
        return samples.samples
    x = np.asarray(samples, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def max_smoothing_bandwidth(data) -> np.ndarray:
    """Per-dimension oversmoothed bandwidth ``1.144 * sd * n**(-1/5)``.

    Each entry is floored at ``1e-8 * (1 + |column mean|)`` so constant
    columns still give a proper kernel.
    """
    x = _as_matrix(data)
    n = x.shape[0]
    if n < 2:
        raise ValidationError(f"bandwidth needs at least 2 samples, got {n}")
    sd = np.std(x, axis=0, ddof=1)
    h = OVERSMOOTH_CONSTANT * sd * n ** (-0.2)
    floor = 1e-8 * (1.0 + np.abs(np.mean(x, axis=0)))
    return np.maximum(h, floor)


@dataclass(frozen=True)
class DensityEstimate:
    """Kernel locations ``centers`` (``n x d``) and bandwidth ``h`` (length ``d``)."""

    centers: np.ndarray
    bandwidth: np.ndarray

    def __post_init__(self):
        c = _as_matrix(self.centers)
        h = np.atleast_1d(np.asarray(self.bandwidth, dtype=float))
        if c.shape[0] < 2:
            raise ValidationError("a density estimate needs at least 2 centers")
        if h.shape != (c.shape[1],):
            raise ValidationError(
                f"bandwidth has shape {h.shape}, expected ({c.shape[1]},)"
            )
        if not np.all(h > 0) or not np.all(np.isfinite(h)):
            raise ValidationError("every bandwidth entry must be positive and finite")
        c = np.array(c, dtype=float)
        h = np.array(h, dtype=float)
        c.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "bandwidth", h)

    @classmethod
    def from_data(cls, data, bandwidth=None) -> "DensityEstimate":
        c = _as_matrix(data)
        if bandwidth is None:
            bandwidth = max_smoothing_bandwidth(c)
        return cls(c, bandwidth)

    @property
    def n(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def variances(self) -> np.ndarray:
        """Diagonal of ``H``."""
        return self.bandwidth**2

    @property
    def log_norm(self) -> float:
        """``log |2 pi H|^(-1/2)``."""
        return -0.5 * float(np.sum(np.log(2.0 * np.pi * self.variances)))

    def project(self, projection, bandwidth=None) -> "DensityEstimate":
        """Estimate on the projected centers ``X A^T``."""
        A = check_projection(projection, self.dim)
        centers = self.centers @ A.T
        return DensityEstimate.from_data(centers, bandwidth)


def check_projection(projection, d: int) -> np.ndarray:
    A = np.atleast_2d(np.asarray(projection, dtype=float))
    if A.ndim != 2 or A.shape[1] != d:
        raise ValidationError(f"projection has shape {A.shape}, expected (m, {d})")
    if A.shape[0] < 1 or A.shape[0] > d:
        raise ValidationError(f"projection must have 1 <= m <= {d} rows, got {A.shape[0]}")
    return A


def kernel_exponents(points: np.ndarray, centers: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """``-1/2`` times the Mahalanobis distances, shape ``(q, n)``."""
    scale = 1.0 / np.sqrt(variances)
    p = points * scale
    c = centers * scale
    # direct differences: the expanded quadratic form loses precision for close pairs
    diff = p[:, None, :] - c[None, :, :]
    return -0.5 * np.einsum("qnk,qnk->qn", diff, diff)


def log_kernel_sums(expo: np.ndarray) -> np.ndarray:
    # always in log space: far-apart sets underflow a plain exp-sum
    return logsumexp(expo, axis=1)


def log_density_eval(est: DensityEstimate, points, projection=None, bandwidth=None) -> np.ndarray:
    """Log of :func:`density_eval`; stays finite where the density underflows."""
    pts = _as_matrix(points)
    if pts.shape[1] != est.dim:
        raise ValidationError(
            f"dimension mismatch: points have {pts.shape[1]} columns, estimate has {est.dim}"
        )
    if projection is not None:
        A = check_projection(projection, est.dim)
        est = est.project(A, bandwidth)
        pts = pts @ A.T
    elif bandwidth is not None:
        est = DensityEstimate(est.centers, bandwidth)
    expo = kernel_exponents(pts, est.centers, est.variances)
    return log_kernel_sums(expo) - np.log(est.n) + est.log_norm


def density_eval(est: DensityEstimate, points, projection=None, bandwidth=None) -> np.ndarray:
    """Evaluate the KDE at ``points`` (``q x d``), optionally after projecting by ``A``.

    Parameters
    ----------
    est : DensityEstimate
    points : (q, d) array
    projection : (m, d) array, optional
        Evaluate the estimate of ``A X`` at ``A x``. The bandwidth is
        recomputed from the projected centers.
    bandwidth : (m,) or (d,) array, optional
        Override the bandwidth in the evaluation space (used to hold it fixed
        while ``A`` varies).
    """
    return np.exp(log_density_eval(est, points, projection, bandwidth))
