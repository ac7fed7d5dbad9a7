"""Classical MDS and the FINE pipeline (divergences -> geodesics -> MDS)."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Collection, format_float
from .divergence import Metric
from .errors import ValidationError
from .geodesic import DistanceMatrix, geodesic_distances, pairwise_distances

__all__ = ["Embedding", "classical_mds", "fine_embed", "write_embedding_csv"]


@dataclass(frozen=True)
class Embedding:
    """MDS coordinates (``N x k``) and the retained eigenvalues, descending.

    ``clamped_mass`` is the sum of the magnitudes of the negative eigenvalues
    of the double-centered matrix; it is zero for Euclidean-realizable input
    and measures how far a divergence matrix is from being Euclidean.
    """

    coords: np.ndarray
    eigenvalues: np.ndarray
    clamped_mass: float = 0.0
    all_eigenvalues: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return self.coords.shape[1]


def classical_mds(distances, k: int) -> Embedding:
    """Torgerson scaling of a distance matrix into ``k`` dimensions.

    Each eigenvector's sign is fixed so that its largest-magnitude entry is
    positive, which makes the output deterministic. Negative eigenvalues are
    clamped to zero.
    """
    D = distances.values if isinstance(distances, DistanceMatrix) else np.asarray(distances, dtype=float)
    n = D.shape[0]
    if not 1 <= k <= n - 1:
        raise ValidationError(f"embedding dimension k must be in [1, {n - 1}], got {k}")

    J = np.eye(n) - np.full((n, n), 1.0 / n)
    B = -0.5 * J @ (D**2) @ J
    B = 0.5 * (B + B.T)
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]

    clamped = float(-evals[evals < 0].sum())
    lam = np.maximum(evals[:k], 0.0)
    vecs = evecs[:, :k]
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    coords = vecs * signs * np.sqrt(lam)
    return Embedding(coords=coords, eigenvalues=lam, clamped_mass=clamped, all_eigenvalues=evals)


def fine_embed(
    collection: Collection,
    k: int,
    metric=Metric.SYMMETRIC_KL,
    fisher_scale: bool = True,
    n_neighbors: Optional[int] = None,
    threads: Optional[int] = 1,
) -> Embedding:
    """Embed each dataset of ``collection`` as a point in ``R^k``."""
    direct = pairwise_distances(collection, metric, None, fisher_scale, threads=threads)
    return classical_mds(geodesic_distances(direct, n_neighbors), k)


def write_embedding_csv(path, emb: Embedding, labels=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [f"y{i + 1}" for i in range(emb.k)]
        if labels is not None:
            header = ["label"] + header
        w.writerow(header)
        for i, row in enumerate(emb.coords):
            cells = [format_float(v) for v in row]
            w.writerow([labels[i]] + cells if labels is not None else cells)
