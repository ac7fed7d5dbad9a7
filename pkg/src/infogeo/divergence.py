"""Nonparametric divergence estimates built on the ratio ``T = f / (f + g)``.

Every estimator has the form

    D = mean_{x in X_f} G(T(x)) + mean_{x in X_g} G(T(x))

where ``T`` is computed from the two kernel density estimates and ``G``
depends on the metric:

===============  =====================================
hellinger        ``(sqrt(T) - sqrt(1 - T))**2``  (squared Hellinger)
kl               ``T log(T / (1 - T))``
skl              ``(2T - 1) log(T / (1 - T))``  (symmetric KL)
bhattacharya     ``-log(mean_f sqrt(T(1-T)) + mean_g sqrt(T(1-T)))``
===============  =====================================

``T`` is obtained from the log-density difference ``u = log f - log g`` and
clamped to ``[1e-12, 1 - 1e-12]``. The construction makes ``1 - T`` exact in
floating point, so swapping ``f`` and ``g`` maps every ``T`` to exactly
``1 - T`` and the symmetric metrics are symmetric to the last bit. The logit
``log(T / (1 - T))`` is taken as ``u`` itself (clamped to match), since
rebuilding it from a rounded ``T`` near 1 loses most of its digits.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import DataSet
from .errors import ValidationError
from .kde import (
    DensityEstimate,
    log_kernel_sums as _lse,
    check_projection,
    kernel_exponents,
    max_smoothing_bandwidth,
)

__all__ = [
    "T_CLAMP",
    "Metric",
    "TValues",
    "t_values",
    "estimate_divergence",
    "divergence_from_t",
    "pointwise_g",
    "logit",
    "fisher_approximation",
    "gaussian_divergence_oracle",
]

T_CLAMP = 1e-12
LOGIT_CLAMP = float(np.log1p(-T_CLAMP) - np.log(T_CLAMP))


class Metric(str, enum.Enum):
    HELLINGER_SQ = "hellinger"
    KL = "kl"
    SYMMETRIC_KL = "skl"
    BHATTACHARYA = "bhattacharya"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValidationError(f"unknown metric {value!r} (choose from {names})") from None

    @property
    def symmetric(self) -> bool:
        return self is not Metric.KL


@dataclass(frozen=True)
class TValues:
    """``T`` evaluated at the samples of ``f`` (``on_f``) and of ``g`` (``on_g``).

    ``logit_f``/``logit_g`` optionally carry ``log(T / (1 - T))`` computed
    without cancellation; when absent it is recomputed from ``T``.
    """

    on_f: np.ndarray
    on_g: np.ndarray
    logit_f: Optional[np.ndarray] = None
    logit_g: Optional[np.ndarray] = None


def _ratio_from_logs(log_f: np.ndarray, log_g: np.ndarray):
    """Return ``(T, logit T)`` from the two log densities."""
    # sigmoid of |u| lies in [1/2, 1], where 1 - p is exact (Sterbenz)
    u = log_f - log_g
    p = 1.0 / (1.0 + np.exp(-np.abs(u)))
    p = np.minimum(p, 1.0 - T_CLAMP)
    return np.where(u >= 0, p, 1.0 - p), np.clip(u, -LOGIT_CLAMP, LOGIT_CLAMP)


def logit(t, logit_values=None) -> np.ndarray:
    """``log(t / (1 - t))``, or ``logit_values`` when supplied."""
    if logit_values is not None:
        return np.asarray(logit_values, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.log(t) - np.log(1.0 - t)


def _matrix(x) -> np.ndarray:
    if isinstance(x, DataSet):
        return x.samples
    if isinstance(x, DensityEstimate):
        return x.centers
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


@dataclass
class _PairKernels:
    """Kernel exponents for one pair in evaluation coordinates.

    ``E[a][b]`` holds ``-1/2`` Mahalanobis distances from the points of set
    ``a`` to the centers of set ``b`` under ``b``'s bandwidth.
    """

    y_f: np.ndarray
    y_g: np.ndarray
    h_f: np.ndarray
    h_g: np.ndarray
    E: dict

    @classmethod
    def build(cls, f, g, projection=None, bandwidths=None) -> "_PairKernels":
        xf, xg = _matrix(f), _matrix(g)
        if xf.shape[1] != xg.shape[1]:
            raise ValidationError(
                f"dimension mismatch: {xf.shape[1]} vs {xg.shape[1]} columns"
            )
        if xf.shape[0] < 2 or xg.shape[0] < 2:
            raise ValidationError("each dataset needs at least 2 samples")
        if projection is not None:
            A = check_projection(projection, xf.shape[1])
            yf, yg = xf @ A.T, xg @ A.T
        else:
            yf, yg = xf, xg
        if bandwidths is None:
            hf, hg = max_smoothing_bandwidth(yf), max_smoothing_bandwidth(yg)
        else:
            hf, hg = (np.atleast_1d(np.asarray(b, dtype=float)) for b in bandwidths)
            for h in (hf, hg):
                if h.shape != (yf.shape[1],) or not np.all(h > 0):
                    raise ValidationError("frozen bandwidths must be positive, one per evaluation dimension")
        vf, vg = hf**2, hg**2
        E = {
            "f": {"f": kernel_exponents(yf, yf, vf), "g": kernel_exponents(yf, yg, vg)},
            "g": {"f": kernel_exponents(yg, yf, vf), "g": kernel_exponents(yg, yg, vg)},
        }
        return cls(yf, yg, hf, hg, E)

    def log_norm(self, which: str) -> float:
        h = self.h_f if which == "f" else self.h_g
        n = self.y_f.shape[0] if which == "f" else self.y_g.shape[0]
        return -np.log(n) - 0.5 * float(np.sum(np.log(2.0 * np.pi * h**2)))

    def t_values(self) -> TValues:
        nf, ng = self.log_norm("f"), self.log_norm("g")
        out = {}
        for at in ("f", "g"):
            log_f = _lse(self.E[at]["f"]) + nf
            log_g = _lse(self.E[at]["g"]) + ng
            out[at] = _ratio_from_logs(log_f, log_g)
        return TValues(on_f=out["f"][0], on_g=out["g"][0], logit_f=out["f"][1], logit_g=out["g"][1])


def _estimate(e) -> DensityEstimate:
    if isinstance(e, DensityEstimate):
        return e
    return DensityEstimate.from_data(_matrix(e))


def t_values(f_est, g_est, projection=None) -> TValues:
    """``T = f / (f + g)`` at the samples of both sets.

    Without a projection the estimates' own bandwidths are used; with one the
    bandwidths are recomputed from the projected centers.
    """
    f_est, g_est = _estimate(f_est), _estimate(g_est)
    bw = None if projection is not None else (f_est.bandwidth, g_est.bandwidth)
    return _PairKernels.build(f_est.centers, g_est.centers, projection, bw).t_values()


def pointwise_g(metric: Metric, t: np.ndarray, logit_values=None) -> np.ndarray:
    """``G(T)`` for the additive metrics (everything but Bhattacharya)."""
    metric = Metric.parse(metric)
    t = np.asarray(t, dtype=float)
    s = 1.0 - t
    if metric is Metric.HELLINGER_SQ:
        return (np.sqrt(t) - np.sqrt(s)) ** 2
    lt = logit(t, logit_values)
    if metric is Metric.KL:
        return t * lt
    if metric is Metric.SYMMETRIC_KL:
        return (t - s) * lt
    raise ValidationError("Bhattacharya has no pointwise G; use divergence_from_t")


def divergence_from_t(metric: Metric, tv: TValues) -> float:
    metric = Metric.parse(metric)
    if metric is Metric.BHATTACHARYA:
        coeff = np.mean(np.sqrt(tv.on_f * (1.0 - tv.on_f))) + np.mean(
            np.sqrt(tv.on_g * (1.0 - tv.on_g))
        )
        return float(-np.log(coeff))
    return float(
        np.mean(pointwise_g(metric, tv.on_f, tv.logit_f)) + np.mean(pointwise_g(metric, tv.on_g, tv.logit_g))
    )


def estimate_divergence(metric, f, g, projection=None, bandwidths=None) -> float:
    """Estimate the divergence between the densities behind two sample sets.

    Parameters
    ----------
    metric : Metric or str
    f, g : DataSet or (n, d) array
    projection : (m, d) array, optional
        Compare ``A X_f`` with ``A X_g`` instead.
    bandwidths : pair of arrays, optional
        ``(h_f, h_g)`` in the evaluation space; by default both are derived
        with :func:`~infogeo.kde.max_smoothing_bandwidth`.
    """
    metric = Metric.parse(metric)
    tv = _PairKernels.build(f, g, projection, bandwidths).t_values()
    return divergence_from_t(metric, tv)


def fisher_approximation(metric, divergence_value: float) -> float:
    """Map a divergence to its Fisher-information-distance approximation.

    Symmetric KL maps to ``sqrt(D)``; squared Hellinger to ``2 sqrt(D)``.
    """
    metric = Metric.parse(metric)
    if divergence_value < 0 or not np.isfinite(divergence_value):
        raise ValidationError(f"divergence must be finite and >= 0, got {divergence_value}")
    if metric is Metric.SYMMETRIC_KL:
        return float(np.sqrt(divergence_value))
    if metric is Metric.HELLINGER_SQ:
        return float(2.0 * np.sqrt(divergence_value))
    raise ValidationError(f"unsupported metric for Fisher scaling: {metric.value}")


def _gauss_params(mu, cov):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (mu.size, mu.size):
        raise ValidationError(f"covariance shape {cov.shape} does not match mean size {mu.size}")
    if not np.allclose(cov, cov.T):
        raise ValidationError("covariance not symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValidationError("covariance not positive definite") from None
    return mu, cov, 2.0 * np.sum(np.log(np.diag(chol)))


def _gauss_kl(mu1, cov1, ld1, mu2, cov2, ld2) -> float:
    d = mu1.size
    dm = mu2 - mu1
    tr = np.trace(np.linalg.solve(cov2, cov1))
    quad = dm @ np.linalg.solve(cov2, dm)
    return 0.5 * (tr + quad - d + ld2 - ld1)


def _gauss_bhattacharya(mu1, cov1, ld1, mu2, cov2, ld2) -> float:
    cov = 0.5 * (cov1 + cov2)
    _, ld = np.linalg.slogdet(cov)
    dm = mu2 - mu1
    return 0.125 * dm @ np.linalg.solve(cov, dm) + 0.5 * (ld - 0.5 * (ld1 + ld2))


def gaussian_divergence_oracle(metric, mu1, cov1, mu2, cov2) -> float:
    """Closed-form divergence between ``N(mu1, cov1)`` and ``N(mu2, cov2)``.

    Squared Hellinger follows the unnormalized convention used by the
    estimators, ``int (sqrt f - sqrt g)^2 = 2 - 2 exp(-D_B)``.
    """
    metric = Metric.parse(metric)
    p1 = _gauss_params(mu1, cov1)
    p2 = _gauss_params(mu2, cov2)
    if p1[0].size != p2[0].size:
        raise ValidationError("dimension mismatch between the two Gaussians")
    if metric is Metric.KL:
        val = _gauss_kl(*p1, *p2)
    elif metric is Metric.SYMMETRIC_KL:
        val = _gauss_kl(*p1, *p2) + _gauss_kl(*p2, *p1)
    elif metric is Metric.BHATTACHARYA:
        val = _gauss_bhattacharya(*p1, *p2)
    else:
        val = 2.0 - 2.0 * np.exp(-_gauss_bhattacharya(*p1, *p2))
    # closed forms can land a few ulps below zero for identical inputs
    return float(max(val, 0.0))
