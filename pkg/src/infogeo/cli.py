"""``infogeo`` command-line interface.

Commands::

    infogeo synth     --preset mean-grid --out DIR
    infogeo distances --manifest M --metric skl [--fisher-scale] --out DIR
    infogeo fine      --manifest M --k 2 --out DIR
    infogeo ipca      --manifest M --m 2 --cost j1 --mu 0.05 --out DIR
    infogeo rank      --projection DIR/projection.csv --out DIR

Settings are resolved as built-in defaults < ``--config`` JSON < flags.
Every run writes ``run.json`` next to its artifacts.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .data import Collection, DataSet, load_collection, save_collection, synth_gaussian_collection
from .divergence import Metric
from .embedding import classical_mds, write_embedding_csv
from .errors import DataFileError, InfoGeoError, NumericalError, ValidationError
from .geodesic import geodesic_distances, pairwise_distances, resolve_threads, write_distance_csv
from .ipca import (
    IpcaConfig,
    ipca_fit,
    read_projection_csv,
    variable_ranking,
    write_cost_trace_csv,
    write_projection_csv,
    write_ranking_json,
)

EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

DEFAULTS = {
    "manifest": None,
    "metric": "skl",
    "fisher_scale": False,
    "k": 2,
    "m": 2,
    "cost": "j1",
    "mu": 0.05,
    "eps": 1e-6,
    "c": "auto",
    "max_iter": 500,
    "reorth_every": 1,
    "backtracking": True,
    "init": "random",
    "neighbors": None,
    "seed": 0,
    "out": ".",
    "threads": None,
    "projection": None,
    "preset": "mean-grid",
    "n": None,
    "params": None,
}

PRESETS = ("mean-grid", "noise-dim", "identical-pair")


def _parse_c(value):
    if value == "auto":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError('must be "auto" or a number') from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of settings; flags override it")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker cap, 0 = all cores (env INFOGEO_THREADS)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--manifest", help="JSON manifest listing the sample CSV files")
    data.add_argument("--metric", choices=["skl", "hellinger", "bhattacharya"])

    parser = argparse.ArgumentParser(prog="infogeo", description="Information-geometric embeddings and projections of dataset collections.")
    parser.add_argument("--version", action="version", version=f"infogeo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distances", parents=[common, data], help="direct and geodesic distance matrices")
    p.add_argument("--fisher-scale", action="store_const", const=True, dest="fisher_scale")
    p.add_argument("--neighbors", type=int, help="k-nearest-neighbor graph instead of the complete graph")

    p = sub.add_parser("fine", parents=[common, data], help="FINE embedding of the collection")
    p.add_argument("--fisher-scale", action="store_const", const=True, dest="fisher_scale")
    p.add_argument("--neighbors", type=int)
    p.add_argument("--k", type=int, help="embedding dimension")

    p = sub.add_parser("ipca", parents=[common, data], help="learn an IPCA projection")
    p.add_argument("--m", type=int, help="projection dimension")
    p.add_argument("--cost", choices=["j1", "j2", "j3", "j4"])
    p.add_argument("--mu", type=float, help="initial step size")
    p.add_argument("--eps", type=float, help="stop when |J_i - J_(i-1)| <= eps")
    p.add_argument("--c", type=_parse_c, help='kernel constant for j2/j4, or "auto"')
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--reorth-every", type=int, dest="reorth_every")
    p.add_argument("--init", choices=["random", "identity"])
    p.add_argument("--no-backtracking", action="store_const", const=False, dest="backtracking")

    p = sub.add_parser("rank", parents=[common], help="variable ranking from a projection CSV")
    p.add_argument("--projection", help="projection matrix CSV (m rows x d columns)")

    p = sub.add_parser("synth", parents=[common], help="write a seeded Gaussian fixture")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--n", type=int, help="samples per set")
    p.add_argument("--params", help='JSON file {"means": [...], "covariances": [...]}')
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise DataFileError(f"config not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from None
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        settings.update(doc)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            settings[key] = value
    settings["command"] = args.command
    return settings


def _collection(settings) -> Collection:
    if not settings["manifest"]:
        raise DataFileError("manifest not found: no --manifest given")
    return load_collection(settings["manifest"])


def _versions() -> dict:
    return {
        "infogeo": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _write_run_manifest(out: Path, settings: dict, artifacts: list, extra=None) -> None:
    doc = {
        "command": settings["command"],
        "seed": settings["seed"],
        "config": {k: settings[k] for k in sorted(DEFAULTS)},
        "versions": _versions(),
        "artifacts": artifacts,
    }
    if extra:
        doc.update(extra)
    (out / "run.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_distances(settings, out: Path):
    col = _collection(settings)
    threads = resolve_threads(settings["threads"])
    direct = pairwise_distances(col, settings["metric"], None, settings["fisher_scale"], threads=threads)
    geo = geodesic_distances(direct, settings["neighbors"])
    write_distance_csv(out / "direct.csv", direct)
    write_distance_csv(out / "geodesic.csv", geo)
    return ["direct.csv", "geodesic.csv"], None


def cmd_fine(settings, out: Path):
    col = _collection(settings)
    threads = resolve_threads(settings["threads"])
    direct = pairwise_distances(col, settings["metric"], None, settings["fisher_scale"], threads=threads)
    emb = classical_mds(geodesic_distances(direct, settings["neighbors"]), settings["k"])
    write_embedding_csv(out / "embedding.csv", emb, col.labels)
    report = {
        "retained": [float(v) for v in emb.eigenvalues],
        "all": [float(v) for v in emb.all_eigenvalues],
        "clamped_negative_mass": emb.clamped_mass,
    }
    (out / "eigenvalues.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return ["embedding.csv", "eigenvalues.json"], None


def cmd_ipca(settings, out: Path):
    col = _collection(settings)
    config = IpcaConfig(
        cost=settings["cost"],
        metric=settings["metric"],
        mu=settings["mu"],
        eps=settings["eps"],
        c=settings["c"],
        max_iterations=settings["max_iter"],
        reorthonormalize_every=settings["reorth_every"],
        seed=settings["seed"],
        backtracking=settings["backtracking"],
        init=settings["init"],
        threads=resolve_threads(settings["threads"]),
    )
    result = ipca_fit(col, settings["m"], config)
    write_projection_csv(out / "projection.csv", result.projection)
    write_cost_trace_csv(out / "cost_trace.csv", result.cost_trace)
    write_ranking_json(out / "ranking.json", variable_ranking(result.projection))
    extra = {"stop_reason": result.stop_reason, "iterations": result.n_iterations, "c_used": result.c}
    return ["projection.csv", "cost_trace.csv", "ranking.json"], extra


def cmd_rank(settings, out: Path):
    if not settings["projection"]:
        raise DataFileError("projection not found: no --projection given")
    path = Path(settings["projection"])
    if not path.is_file():
        raise DataFileError(f"projection not found: {path}")
    write_ranking_json(out / "ranking.json", variable_ranking(read_projection_csv(path)))
    return ["ranking.json"], None


def _preset(name: str, n, seed: int) -> Collection:
    if name == "mean-grid":
        means = [[0.5 * i] for i in range(10)]
        return synth_gaussian_collection(
            means, [[[1.0]]] * 10, n or 1000, seed, labels=[f"mu={m[0]:g}" for m in means]
        )
    if name == "noise-dim":
        means = [[0, 0, 0], [1.5, 0, 0], [0, 1.5, 0], [1.5, 1.5, 0]]
        return synth_gaussian_collection(means, [np.eye(3)] * 4, n or 200, seed)
    if name == "identical-pair":
        base = synth_gaussian_collection([[0.0], [0.0]], [[[1.0]]] * 2, n or 200, seed)[0]
        return Collection([DataSet(base.samples, "a"), DataSet(base.samples, "b")])
    raise ValidationError(f"unknown preset {name!r}")


def cmd_synth(settings, out: Path):
    seed = settings["seed"]
    if settings["params"]:
        path = Path(settings["params"])
        if not path.is_file():
            raise DataFileError(f"params not found: {path}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        col = synth_gaussian_collection(doc["means"], doc["covariances"], settings["n"] or 500, seed,
                                        labels=doc.get("labels"))
    else:
        col = _preset(settings["preset"], settings["n"], seed)
    save_collection(col, out)
    files = ["manifest.json"] + [f"set_{i:03d}.csv" for i in range(len(col))]
    return files, None


COMMANDS = {
    "distances": cmd_distances,
    "fine": cmd_fine,
    "ipca": cmd_ipca,
    "rank": cmd_rank,
    "synth": cmd_synth,
}


def run(settings: dict) -> int:
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    artifacts, extra = COMMANDS[settings["command"]](settings, out)
    _write_run_manifest(out, settings, artifacts, extra)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(resolve_settings(args))
    except DataFileError as exc:
        code = EXIT_IO
        msg = str(exc)
    except (OSError,) as exc:
        code = EXIT_IO
        msg = f"I/O error: {exc}"
    except ValidationError as exc:
        code = EXIT_VALIDATION
        msg = str(exc)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        code = EXIT_NUMERICAL
        msg = f"numerical failure: {exc}"
    except InfoGeoError as exc:
        code = EXIT_VALIDATION
        msg = str(exc)
    print(f"infogeo: error: {msg}".replace("\n", " "), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
