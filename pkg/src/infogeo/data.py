"""Datasets, collections, CSV/JSON ingestion and seeded Gaussian fixtures.

A *dataset* is an ``n x d`` sample matrix (rows are samples). A *collection*
is an ordered list of datasets sharing the ambient dimension ``d``; its order
is the index order used for every distance matrix downstream.

Sample files are UTF-8 CSV with an optional single header row, detected by
the first row failing to parse as numbers. Manifests are JSON::

    {"sets": [{"path": "a.csv", "label": "a"}, {"path": "b.csv"}]}

Relative paths are resolved against the manifest's directory.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataFileError, ValidationError

__all__ = [
    "DataSet",
    "Collection",
    "read_samples_csv",
    "read_matrix_csv",
    "write_samples_csv",
    "load_collection",
    "save_collection",
    "synth_gaussian_collection",
    "format_float",
]


def format_float(x: float) -> str:
    """Format with 17 significant digits (round-trips every float64)."""
    return "%.17g" % x


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DataSet:
    """One realization of an unknown density: ``samples`` is ``n x d``."""

    samples: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValidationError(f"samples must be a 2-D array, got shape {x.shape}")
        if x.shape[0] < 2:
            raise ValidationError(f"a dataset needs at least 2 samples, got {x.shape[0]}")
        if x.shape[1] < 1:
            raise ValidationError("a dataset needs at least 1 column")
        bad = np.argwhere(~np.isfinite(x))
        if bad.size:
            r, c = bad[0]
            raise ValidationError(f"non-finite value at row {r}, col {c}")
        object.__setattr__(self, "samples", _frozen(x))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class Collection:
    """Ordered datasets ``X_1 .. X_N`` with a common column count."""

    sets: tuple
    ambient_dim: int = field(init=False)

    def __post_init__(self):
        sets = tuple(s if isinstance(s, DataSet) else DataSet(s) for s in self.sets)
        if len(sets) < 2:
            raise ValidationError(f"a collection needs at least 2 datasets, got {len(sets)}")
        dims = {s.dim for s in sets}
        if len(dims) != 1:
            raise ValidationError(
                f"inconsistent ambient dimension: column counts {sorted(dims)}"
            )
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "ambient_dim", dims.pop())

    def __len__(self) -> int:
        return len(self.sets)

    def __getitem__(self, i) -> DataSet:
        return self.sets[i]

    def __iter__(self):
        return iter(self.sets)

    @property
    def labels(self) -> list:
        return [s.label if s.label is not None else f"set{i}" for i, s in enumerate(self.sets)]


def _parse_row(row, lineno):
    values = []
    for c, cell in enumerate(row):
        try:
            v = float(cell)
        except ValueError:
            raise ValidationError(f"non-numeric cell {cell!r} at row {lineno}, col {c}") from None
        if not math.isfinite(v):
            raise ValidationError(f"non-finite value at row {lineno}, col {c}")
        values.append(v)
    return values


def read_samples_csv(path) -> np.ndarray:
    """Read a sample matrix from CSV. Row/col numbers in errors are 0-based data rows."""
    return read_matrix_csv(path, min_rows=2)


def read_matrix_csv(path, min_rows: int = 1) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataFileError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if rows:
        try:
            [float(cell) for cell in rows[0]]
        except ValueError:
            rows = rows[1:]  # header
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    width = len(rows[0])
    data = []
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ValidationError(f"{path}: row {r} has {len(row)} columns, expected {width}")
        data.append(_parse_row(row, r))
    if len(data) < min_rows:
        raise ValidationError(f"{path}: need at least {min_rows} rows, got {len(data)}")
    return np.array(data, dtype=float)


def write_samples_csv(path, samples: np.ndarray, header: Optional[Sequence[str]] = None) -> None:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in samples:
            w.writerow([format_float(v) for v in row])


def load_collection(manifest_path) -> Collection:
    """Load the datasets listed in a JSON manifest, in manifest order."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataFileError(f"manifest not found: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest is not valid JSON: {exc}") from None
    entries = doc.get("sets") if isinstance(doc, dict) else None
    if not isinstance(entries, list):
        raise ValidationError('manifest must be an object with a "sets" list')

    base = manifest_path.parent
    sets = []
    for k, entry in enumerate(entries):
        if isinstance(entry, str):
            entry = {"path": entry}
        if not isinstance(entry, dict) or "path" not in entry:
            raise ValidationError(f'manifest entry {k} lacks a "path"')
        p = Path(entry["path"])
        if not p.is_absolute():
            p = base / p
        sets.append(DataSet(read_samples_csv(p), label=entry.get("label")))
    return Collection(sets)


def save_collection(collection: Collection, directory, stem: str = "set") -> Path:
    """Write each dataset to ``<stem>_<i>.csv`` plus ``manifest.json``; return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, ds in enumerate(collection):
        name = f"{stem}_{i:03d}.csv"
        write_samples_csv(directory / name, ds.samples)
        entry = {"path": name}
        if ds.label is not None:
            entry["label"] = ds.label
        entries.append(entry)
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"sets": entries}, indent=2) + "\n", encoding="utf-8")
    return manifest


def synth_gaussian_collection(means, covariances, n_per_set: int, seed: int, labels=None) -> Collection:
    """Draw one dataset per ``(mean, covariance)`` pair.

    Samples are ``mean + z @ L.T`` with ``L`` the Cholesky factor and ``z``
    standard normals from numpy's PCG64 generator seeded with ``seed``. Sets
    are drawn in order from a single stream, so the output is a pure function
    of the arguments.
    """
    if len(means) != len(covariances):
        raise ValidationError(
            f"length mismatch: {len(means)} means vs {len(covariances)} covariances"
        )
    if len(means) < 2:
        raise ValidationError("need at least 2 (mean, covariance) pairs")
    if n_per_set < 2:
        raise ValidationError(f"n_per_set must be >= 2, got {n_per_set}")

    rng = np.random.Generator(np.random.PCG64(seed))
    sets = []
    for i, (mu, cov) in enumerate(zip(means, covariances)):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        d = mu.shape[0]
        if cov.shape != (d, d):
            raise ValidationError(f"covariance {i} has shape {cov.shape}, expected {(d, d)}")
        if not np.allclose(cov, cov.T):
            raise ValidationError(f"covariance {i} not symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValidationError(f"covariance {i} not positive definite") from None
        z = rng.standard_normal((n_per_set, d))
        label = labels[i] if labels is not None else None
        sets.append(DataSet(mu + z @ chol.T, label=label))
    return Collection(sets)
