"""Information preserving component analysis.

Learns a row-orthonormal ``m x d`` projection ``A`` so that the pairwise
divergences of the projected collection, ``D(X; A)``, track those of the
full-dimensional collection, ``D(X)``. Four costs are available:

* ``j1``: ``||D(X) - D(X; A)||_F^2``
* ``j2``: ``||exp(-D(X)/c) - exp(-D(X; A)/c)||_F^2``
* ``j3``: ``-||D(X; A)||_F^2``
* ``j4``: ``||exp(-D(X; A)/c)||_F^2``

The gradient of every pairwise estimate with respect to ``A`` is analytic,
with each set's kernel bandwidth held fixed at its value for the current
``A``. Steps are projected onto the tangent space of ``A A^T = I`` and
followed by a polar retraction.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Union

import numpy as np

from .data import Collection, format_float, read_matrix_csv
from .divergence import Metric, _matrix, _PairKernels, logit
from .errors import NumericalError, ValidationError
from .geodesic import DistanceMatrix, _map_pairs, pairwise_distances
from .kde import check_projection, max_smoothing_bandwidth

__all__ = [
    "Cost",
    "IpcaConfig",
    "IpcaResult",
    "ProjectionMatrix",
    "GradientWorkspace",
    "dG_dT_weighted",
    "gradient_workspace",
    "divergence_gradient",
    "projected_bandwidths",
    "projected_distances",
    "cost_value",
    "cost_weights",
    "cost_gradient",
    "constrain_gradient",
    "polar_retraction",
    "orthonormality_residual",
    "initial_projection",
    "ipca_fit",
    "variable_ranking",
    "write_projection_csv",
    "read_projection_csv",
    "write_cost_trace_csv",
    "write_ranking_json",
]

ORTHONORMAL_TOL = 1e-8


class Cost(str, enum.Enum):
    J1 = "j1"
    J2 = "j2"
    J3 = "j3"
    J4 = "j4"

    @classmethod
    def parse(cls, value) -> "Cost":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown cost {value!r} (choose from j1, j2, j3, j4)") from None


def orthonormality_residual(A) -> float:
    """``||A A^T - I||_F``."""
    A = np.asarray(A, dtype=float)
    return float(np.linalg.norm(A @ A.T - np.eye(A.shape[0])))


@dataclass(frozen=True)
class ProjectionMatrix:
    values: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.values, dtype=float))
        m, d = A.shape
        if not 1 <= m <= d:
            raise ValidationError(f"projection must satisfy 1 <= m <= d, got shape {A.shape}")
        res = orthonormality_residual(A)
        if res > ORTHONORMAL_TOL:
            raise ValidationError(f"projection rows are not orthonormal (||AA^T - I||_F = {res:.3g})")
        A.setflags(write=False)
        object.__setattr__(self, "values", A)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class IpcaConfig:
    cost: Cost = Cost.J1
    metric: Metric = Metric.SYMMETRIC_KL
    mu: float = 0.05
    eps: float = 1e-6
    c: Union[float, str] = "auto"
    max_iterations: int = 500
    reorthonormalize_every: int = 1
    seed: int = 0
    backtracking: bool = True
    max_halvings: int = 10
    init: str = "random"
    threads: Optional[int] = 1

    def __post_init__(self):
        object.__setattr__(self, "cost", Cost.parse(self.cost))
        metric = Metric.parse(self.metric)
        if metric not in (Metric.SYMMETRIC_KL, Metric.HELLINGER_SQ):
            raise ValidationError("IPCA supports the skl and hellinger metrics only")
        object.__setattr__(self, "metric", metric)
        if not self.mu > 0:
            raise ValidationError(f"step size mu must be > 0, got {self.mu}")
        if not self.eps > 0:
            raise ValidationError(f"threshold eps must be > 0, got {self.eps}")
        if self.c != "auto" and not (isinstance(self.c, (int, float)) and self.c > 0):
            raise ValidationError(f'kernel constant c must be "auto" or > 0, got {self.c!r}')
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.reorthonormalize_every < 1:
            raise ValidationError("reorthonormalize_every must be >= 1")
        if self.max_halvings < 0:
            raise ValidationError("max_halvings must be >= 0")
        if self.init not in ("random", "identity"):
            raise ValidationError(f'init must be "random" or "identity", got {self.init!r}')


@dataclass
class GradientWorkspace:
    """Intermediate matrices of one pairwise gradient.

    Keys of the dicts are ``(a, b)`` with ``a, b in {"f", "g"}``: rows index
    the samples of ``a``, columns the kernel centers of ``b``.
    """

    W: dict
    W_bar: dict
    S: dict
    Z: dict
    t_values: tuple = ()

    @property
    def gradient(self) -> np.ndarray:
        return self.Z["f", "g"] - self.Z["f", "f"] + self.Z["g", "g"] - self.Z["g", "f"]


def dG_dT_weighted(metric, t, logit_values=None):
    """``T (1 - T) dG/dT`` for the additive metrics; vectorized over ``t``.

    ``logit_values`` optionally supplies ``log(T / (1 - T))`` precomputed.
    """
    metric = Metric.parse(metric)
    t = np.asarray(t, dtype=float)
    s = 1.0 - t
    if metric is Metric.HELLINGER_SQ:
        out = np.sqrt(t * s) * (2.0 * t - 1.0)
    elif metric is Metric.KL:
        out = t * s * logit(t, logit_values) + t
    elif metric is Metric.SYMMETRIC_KL:
        out = 2.0 * t * s * logit(t, logit_values) + (t - s)
    else:
        raise ValidationError("no gradient is available for the Bhattacharya distance")
    return float(out) if out.ndim == 0 else out


def _softmax_rows(E: np.ndarray) -> np.ndarray:
    W = np.exp(E - E.max(axis=1, keepdims=True))
    return W / W.sum(axis=1, keepdims=True)


def gradient_workspace(f, g, A, metric, bandwidths=None) -> GradientWorkspace:
    """Assemble the kernel, weighting and accumulator matrices for ``dD/dA``."""
    metric = Metric.parse(metric)
    xf, xg = _matrix(f), _matrix(g)
    A = check_projection(A, xf.shape[1])
    pk = _PairKernels.build(xf, xg, A, bandwidths)
    tv = pk.t_values()
    weight = {"f": dG_dT_weighted(metric, tv.on_f, tv.logit_f), "g": dG_dT_weighted(metric, tv.on_g, tv.logit_g)}

    # shift to the pooled mean: the products below only see differences
    shift = np.vstack([xf, xg]).mean(axis=0)
    X = {"f": xf - shift, "g": xg - shift}
    Y = {k: v @ A.T for k, v in X.items()}
    inv_var = {"f": 1.0 / pk.h_f**2, "g": 1.0 / pk.h_g**2}

    W, W_bar, S, Z = {}, {}, {}, {}
    for a in ("f", "g"):
        for b in ("f", "g"):
            E = pk.E[a][b]
            W[a, b] = np.exp(E)
            Wb = _softmax_rows(E)
            W_bar[a, b] = Wb
            Sab = weight[a][:, None] * Wb
            S[a, b] = Sab
            r, c = Sab.sum(axis=1), Sab.sum(axis=0)
            M = (
                (Y[a].T * r) @ X[a]
                - Y[a].T @ Sab @ X[b]
                - Y[b].T @ Sab.T @ X[a]
                + (Y[b].T * c) @ X[b]
            )
            Z[a, b] = inv_var[b][:, None] * M / X[a].shape[0]
    return GradientWorkspace(W=W, W_bar=W_bar, S=S, Z=Z, t_values=(tv.on_f, tv.on_g))


def divergence_gradient(f, g, A, metric, bandwidths=None) -> np.ndarray:
    """Derivative of ``estimate_divergence(metric, f, g, A)`` with respect to ``A``.

    ``bandwidths`` (``(h_f, h_g)`` in the projected space) defaults to the
    oversmoothed bandwidths of ``f A^T`` and ``g A^T``; either way they are
    treated as constants.
    """
    return gradient_workspace(f, g, A, metric, bandwidths).gradient


def projected_bandwidths(collection: Collection, A) -> list:
    A = check_projection(A, collection.ambient_dim)
    return [max_smoothing_bandwidth(ds.samples @ A.T) for ds in collection]


def projected_distances(collection: Collection, A, metric, bandwidths=None, threads=1) -> DistanceMatrix:
    """``D(X; A)`` with raw (unscaled) divergences."""
    return pairwise_distances(collection, metric, A, fisher_scale=False, threads=threads, bandwidths=bandwidths)


def _values(D) -> np.ndarray:
    return D.values if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)


def cost_value(variant, D_full, D_proj, c: float = 1.0) -> float:
    variant = Cost.parse(variant)
    Df, Dp = _values(D_full), _values(D_proj)
    if Df.shape != Dp.shape:
        raise ValidationError(f"shape mismatch: {Df.shape} vs {Dp.shape}")
    if variant in (Cost.J2, Cost.J4) and not c > 0:
        raise ValidationError(f"kernel constant c must be > 0, got {c}")
    if variant is Cost.J1:
        return float(np.sum((Df - Dp) ** 2))
    if variant is Cost.J2:
        return float(np.sum((np.exp(-Df / c) - np.exp(-Dp / c)) ** 2))
    if variant is Cost.J3:
        return float(-np.sum(Dp**2))
    return float(np.sum(np.exp(-2.0 * Dp / c)))


def cost_weights(variant, D_full, D_proj, c: float = 1.0) -> np.ndarray:
    """``dJ/dD(X; A)_ij`` for every entry; the diagonal is zeroed."""
    variant = Cost.parse(variant)
    Df, Dp = _values(D_full), _values(D_proj)
    if variant is Cost.J1:
        w = 2.0 * (Dp - Df)
    elif variant is Cost.J2:
        w = (2.0 / c) * (np.exp(-Df / c) - np.exp(-Dp / c)) * np.exp(-Dp / c)
    elif variant is Cost.J3:
        w = -2.0 * Dp
    else:
        w = -(2.0 / c) * np.exp(-2.0 * Dp / c)
    w = np.array(w, dtype=float)
    np.fill_diagonal(w, 0.0)
    return w


def cost_gradient(
    variant,
    collection: Collection,
    A,
    metric,
    c: float,
    D_full,
    D_proj=None,
    bandwidths=None,
    threads=1,
) -> np.ndarray:
    """``dJ/dA = sum_{i != j} w_ij dD_ij(X; A)/dA`` (unconstrained)."""
    A = check_projection(A, collection.ambient_dim)
    if bandwidths is None:
        bandwidths = projected_bandwidths(collection, A)
    if D_proj is None:
        D_proj = projected_distances(collection, A, metric, bandwidths, threads)
    w = cost_weights(variant, D_full, D_proj, c)
    pairs = [(i, j) for i, j in combinations(range(len(collection)), 2) if w[i, j] != 0 or w[j, i] != 0]

    def one(pair):
        i, j = pair
        return divergence_gradient(collection[i], collection[j], A, metric, (bandwidths[i], bandwidths[j]))

    grads = _map_pairs(one, pairs, threads)
    total = np.zeros_like(A)
    for (i, j), gij in zip(pairs, grads):
        total += (w[i, j] + w[j, i]) * gij
    return total


def constrain_gradient(raw, A) -> np.ndarray:
    """Remove the component of ``raw`` that would break ``A A^T = I`` to first order."""
    raw = np.asarray(raw, dtype=float)
    A = np.asarray(A, dtype=float)
    if raw.shape != A.shape:
        raise ValidationError(f"shape mismatch: gradient {raw.shape} vs projection {A.shape}")
    return raw - 0.5 * (raw @ A.T + A @ raw.T) @ A


def polar_retraction(A) -> np.ndarray:
    """Nearest row-orthonormal matrix (polar factor ``U V^T``)."""
    U, _, Vt = np.linalg.svd(np.asarray(A, dtype=float), full_matrices=False)
    return U @ Vt


def initial_projection(m: int, d: int, seed: int = 0, method: str = "random") -> np.ndarray:
    if not 1 <= m <= d:
        raise ValidationError(f"need 1 <= m <= d, got m={m}, d={d}")
    if method == "identity":
        return np.eye(m, d)
    rng = np.random.Generator(np.random.PCG64(seed))
    Q, R = np.linalg.qr(rng.standard_normal((d, m)))
    return (Q * np.sign(np.diag(R))).T


@dataclass
class IpcaResult:
    projection: np.ndarray
    cost_trace: list
    c: float
    stop_reason: str
    step_sizes: list = field(default_factory=list)
    orthonormality: list = field(default_factory=list)

    @property
    def n_iterations(self) -> int:
        return len(self.cost_trace) - 1


def _auto_c(D_full: np.ndarray) -> float:
    n = D_full.shape[0]
    off = D_full[~np.eye(n, dtype=bool)]
    c = float(np.median(off))
    if not c > 0:
        raise ValidationError('c = "auto" needs a positive median off-diagonal divergence')
    return c


def ipca_fit(collection: Collection, m: int, config: Optional[IpcaConfig] = None, A0=None) -> IpcaResult:
    """Run the constrained gradient descent from a seeded or given start.

    The loop stops when successive costs differ by at most ``eps``, after
    ``max_iterations`` steps, or when backtracking cannot find a step that
    does not increase the cost (``stop_reason="stalled"``).
    """
    config = config or IpcaConfig()
    d = collection.ambient_dim
    if not 1 <= m <= d:
        raise ValidationError(f"projection dimension m must be in [1, {d}], got {m}")
    metric, cost = config.metric, config.cost

    D_full = pairwise_distances(collection, metric, threads=config.threads).values
    c = _auto_c(D_full) if config.c == "auto" else float(config.c)

    if A0 is None:
        A = initial_projection(m, d, config.seed, config.init)
    else:
        A = polar_retraction(check_projection(A0, d))
        if A.shape[0] != m:
            raise ValidationError(f"initial projection has {A.shape[0]} rows, expected {m}")

    def evaluate(A):
        bws = projected_bandwidths(collection, A)
        Dp = projected_distances(collection, A, metric, bws, config.threads)
        J = cost_value(cost, D_full, Dp, c)
        if not np.isfinite(J):
            raise NumericalError("cost became non-finite")
        return J, Dp, bws

    J, Dp, bws = evaluate(A)
    result = IpcaResult(projection=A, cost_trace=[J], c=c, stop_reason="max_iterations")
    result.orthonormality.append(orthonormality_residual(A))

    for it in range(1, config.max_iterations + 1):
        raw = cost_gradient(cost, collection, A, metric, c, D_full, Dp, bws, config.threads)
        step = constrain_gradient(raw, A)
        retract = it % config.reorthonormalize_every == 0
        mu = config.mu
        accepted = False
        for _ in range(config.max_halvings + 1):
            A_new = A - mu * step
            if retract:
                A_new = polar_retraction(A_new)
            J_new, Dp_new, bws_new = evaluate(A_new)
            if not config.backtracking or J_new <= J:
                accepted = True
                break
            mu *= 0.5
        if not accepted:
            result.stop_reason = "stalled"
            break
        delta = abs(J_new - J)
        A, J, Dp, bws = A_new, J_new, Dp_new, bws_new
        result.cost_trace.append(J)
        result.step_sizes.append(mu)
        result.orthonormality.append(orthonormality_residual(A))
        if delta <= config.eps:
            result.stop_reason = "converged"
            break

    if orthonormality_residual(A) > ORTHONORMAL_TOL:
        A = polar_retraction(A)
    result.projection = A
    return result


def variable_ranking(A) -> list:
    """``(variable index, column norm)`` pairs, heaviest first, ties by index.

    Indices are 0-based column positions of ``A``.
    """
    A = A.values if isinstance(A, ProjectionMatrix) else np.atleast_2d(np.asarray(A, dtype=float))
    weights = np.linalg.norm(A, axis=0)
    order = sorted(range(A.shape[1]), key=lambda k: (-weights[k], k))
    return [(k, float(weights[k])) for k in order]


def write_projection_csv(path, A) -> None:
    A = A.values if isinstance(A, ProjectionMatrix) else np.asarray(A)
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(A):
            fh.write(",".join(format_float(v) for v in row) + "\n")


def read_projection_csv(path) -> ProjectionMatrix:
    return ProjectionMatrix(read_matrix_csv(path, min_rows=1))


def write_cost_trace_csv(path, trace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,cost\n")
        for i, J in enumerate(trace):
            fh.write(f"{i},{format_float(J)}\n")


def write_ranking_json(path, ranking) -> None:
    doc = [{"variable": k, "weight": w} for k, w in ranking]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
