"""Command-line front end: extract, search, classify, sweep, visualize, bench.

Every option can come from a flat ``key = value`` config file (``--config``);
explicit flags override file values, which override built-in defaults. The
resolved configuration and a content hash of the input corpus are embedded
in every output artifact. Exit codes: 0 success, 1 runtime failure, 2
usage/config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpusio import load_corpus, save_corpus, save_model, write_corpus_csv
from .dataset import ingest
from .elp import ElpParams, elp_code_image, length_of
from .errors import ElpFaceError
from .evaluate import (
    DISTANCE_MODES,
    LabeledCorpus,
    extract_corpus,
    knn_retrieval_eval,
    subimage_sweep,
)
from .imaging import GrayImage, SubImageGrid, cell_shapes, load_image, save_image, window_count
from .lbp import LbpParams
from .radon import ANCHOR_MODES, AngleSet
from .svm import DEFAULT_C_GRID, DEFAULT_GAMMA_GRID, SvcParams, grid_search, ovo_fit, ovo_predict

SMOKE_C_GRID = (1e-2, 1e1, 1e4)
SMOKE_GAMMA_GRID = (1e-4, 1e-2, 1e0)


class ConfigError(ValueError):
    """Bad or missing configuration; maps to exit code 2."""


_REQUIRED = object()


def _bool(text):
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class Opt:
    flag: str
    type: object = str
    default: object = None
    help: str = ""
    choices: tuple | None = None

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


COMMON_OPTS = [
    Opt("--config", str, None, "flat key = value config file; flags override it"),
    Opt("--threads", int, 1, "worker thread cap for parallel sections"),
]

ELP_OPTS = [
    Opt("--window", int, 10, "square window side in pixels"),
    Opt("--stride", int, 1, "window stride in pixels"),
    Opt("--overlap", int, None, "alternative stride control: stride = window - overlap"),
    Opt("--tau", float, 0.95, "homogeneity threshold; windows at or above it are skipped"),
    Opt("--mode", str, "detached", "histogram assembly", ("merged", "detached")),
    Opt("--anchor-mode", str, "max_amplitude", "anchor angle selection rule", ANCHOR_MODES),
    Opt("--offsets", str, "0,45,90,125", "adjunct projection offsets in degrees"),
]

LBP_OPTS = [
    Opt("--points", int, 8, "circle sample count"),
    Opt("--radius", int, 1, "circle radius in pixels"),
]

METHOD_OPTS = [Opt("--method", str, "elp", "descriptor family", ("elp", "lbp"))] + ELP_OPTS + LBP_OPTS

TREE_OPTS = [
    Opt("--root", str, _REQUIRED, "dataset root: one sub-directory per identity"),
    Opt("--min-count", int, 100, "keep identities with strictly more images than this"),
    Opt("--size", str, "112x84", "expected image size HEIGHTxWIDTH, or 'any'"),
    Opt("--resize", _bool, False, "bilinearly resize every image to --size"),
]


def _parse_size(text):
    if str(text).strip().lower() == "any":
        return None
    parts = str(text).lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"cannot parse size {text!r}, expected HEIGHTxWIDTH or 'any'")
    return int(parts[0]), int(parts[1])


def _parse_grid(text) -> SubImageGrid:
    try:
        return SubImageGrid.parse(str(text))
    except (ValueError, ElpFaceError) as exc:
        raise ConfigError(str(exc))


def _parse_grids(text) -> list[SubImageGrid]:
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo = int(lo.split("x")[0])
        hi = int(hi.split("x")[0])
        if hi < lo:
            raise ConfigError(f"empty grid range {text!r}")
        return [SubImageGrid(g, g) for g in range(lo, hi + 1)]
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError("empty grid list")
    return [_parse_grid(p) for p in parts]


def _parse_float_list(text, what):
    try:
        values = tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad {what} list {text!r}: {exc}")
    if not values:
        raise ConfigError(f"empty {what} list")
    return values


def _method_params(cfg):
    if cfg["method"] == "elp":
        stride = cfg["stride"]
        if cfg.get("overlap") is not None:
            stride = cfg["window"] - cfg["overlap"]
            if stride < 1:
                raise ConfigError(
                    f"overlap {cfg['overlap']} leaves no positive stride for window {cfg['window']}"
                )
        try:
            return ElpParams(
                window_side=cfg["window"],
                stride=stride,
                homogeneity_threshold=cfg["tau"],
                angle_set=AngleSet(adjunct_offsets=_parse_float_list(cfg["offsets"], "offset")),
                histogram_mode=cfg["mode"],
                anchor_mode=cfg["anchor_mode"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc))
    try:
        return LbpParams(points=cfg["points"], radius=cfg["radius"])
    except ValueError as exc:
        raise ConfigError(str(exc))


def _check_grid_fits(image_size, grid, method, params):
    min_side = params.window_side if method == "elp" else 2 * params.radius + 1
    for idx, (h, w) in enumerate(cell_shapes(image_size[0], image_size[1], grid)):
        if h < min_side or w < min_side:
            r, c = divmod(idx, grid.cols)
            raise ConfigError(
                f"grid {grid} cell ({r},{c}) is {h}x{w}, smaller than the method's "
                f"minimum region of {min_side} pixels"
            )


def _load_tree(cfg):
    root = cfg["root"]
    if root is None or not Path(root).is_dir():
        raise ConfigError(f"dataset root {root!r} does not exist")
    expected = _parse_size(cfg["size"])
    if cfg["resize"] and expected is None:
        raise ConfigError("--resize needs a concrete --size to resize to")
    return ingest(root, min_count=cfg["min_count"], expected_size=expected, resize=cfg["resize"])


def _sha256_paths(paths) -> str:
    digest = hashlib.sha256()
    for p in paths:
        digest.update(Path(p).read_bytes())
    return "sha256:" + digest.hexdigest()


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def _sha256_array(arr: np.ndarray) -> str:
    return "sha256:" + hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value


def _provenance(cfg, input_hash):
    return {"config": _jsonable(cfg), "input_hash": input_hash}


def _comments(provenance):
    return [
        "config = " + json.dumps(provenance["config"], sort_keys=True),
        "input_hash = " + provenance["input_hash"],
    ]


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_csv(path, columns, rows, comments=()) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_extract(cfg) -> int:
    tree, manifest = _load_tree(cfg)
    grid = _parse_grid(cfg["grid"])
    params = _method_params(cfg)
    _check_grid_fits(manifest.image_size, grid, cfg["method"], params)

    input_hash = _sha256_paths(tree.paths)
    provenance = _provenance(cfg, input_hash)
    started = time.perf_counter()
    corpus = extract_corpus(
        tree.images, tree.labels, tree.names, cfg["method"], params, grid,
        threads=cfg["threads"], paths=tree.paths,
    )
    elapsed = time.perf_counter() - started

    save_corpus(cfg["out"], corpus, provenance)
    manifest_path = cfg["manifest"] or str(cfg["out"]) + ".manifest.json"
    _write_json(manifest_path, {**manifest.to_dict(), **provenance})
    if cfg["csv"]:
        write_corpus_csv(cfg["csv"], corpus, comments=_comments(provenance))
    print(
        f"extracted {len(corpus)} x {corpus.dim} {cfg['method']} descriptors "
        f"-> {cfg['out']} [{elapsed:.1f}s]"
    )
    return 0


def cmd_search(cfg) -> int:
    if cfg["k"] < 1:
        raise ConfigError(f"k must be >= 1, got {cfg['k']}")
    if cfg["distance"] not in DISTANCE_MODES:
        raise ConfigError(f"distance must be one of {DISTANCE_MODES}")
    corpus_path = cfg["corpus"]
    if corpus_path is None or not Path(corpus_path).is_file():
        raise ConfigError(f"corpus file {corpus_path!r} does not exist")
    corpus = load_corpus(corpus_path)
    if cfg["k"] >= len(corpus):
        raise ConfigError(f"k={cfg['k']} must be smaller than the corpus size {len(corpus)}")

    provenance = _provenance(cfg, _sha256_file(corpus_path))
    report = knn_retrieval_eval(corpus, k=cfg["k"], distance_mode=cfg["distance"],
                                threads=cfg["threads"])

    per_class = {}
    for idx, name in enumerate(corpus.names):
        mask = corpus.labels == idx
        if mask.any():
            per_class[name] = float(report.correct[mask].mean())

    prefix = cfg["out_prefix"]
    _write_json(f"{prefix}_report.json", {
        **provenance, **report.to_dict(), "per_class_accuracy": per_class,
    })
    columns = ["query_index", "path", "label", "label_name", "predicted",
               "predicted_name", "correct"]
    for j in range(cfg["k"]):
        columns += [f"nn{j + 1}_index", f"nn{j + 1}_distance"]
    rows = []
    paths = corpus.paths or [""] * len(corpus)
    for i in range(len(corpus)):
        row = [i, paths[i], int(corpus.labels[i]), corpus.names[corpus.labels[i]],
               int(report.predicted[i]), corpus.names[report.predicted[i]],
               int(report.correct[i])]
        for j in range(cfg["k"]):
            row += [int(report.neighbor_indices[i, j]), repr(float(report.neighbor_distances[i, j]))]
        rows.append(row)
    _write_csv(f"{prefix}_queries.csv", columns, rows, _comments(provenance))
    print(f"retrieval accuracy {report.accuracy:.4f} "
          f"({int(report.correct.sum())}/{len(corpus)} queries, k={cfg['k']}, "
          f"{cfg['distance']} distance)")
    return 0


def cmd_classify(cfg) -> int:
    corpus_path = cfg["corpus"]
    if corpus_path is None or not Path(corpus_path).is_file():
        raise ConfigError(f"corpus file {corpus_path!r} does not exist")
    if not 0.0 < cfg["train_fraction"] < 1.0:
        raise ConfigError(f"train-fraction must be in (0, 1), got {cfg['train_fraction']}")
    corpus = load_corpus(corpus_path)
    provenance = _provenance(cfg, _sha256_file(corpus_path))

    if cfg["c_grid"]:
        c_grid = _parse_float_list(cfg["c_grid"], "C")
    else:
        c_grid = SMOKE_C_GRID if cfg["smoke"] else DEFAULT_C_GRID
    if cfg["gamma_grid"]:
        gamma_grid = _parse_float_list(cfg["gamma_grid"], "gamma")
    else:
        gamma_grid = SMOKE_GAMMA_GRID if cfg["smoke"] else DEFAULT_GAMMA_GRID

    result = grid_search(
        corpus, c_grid, gamma_grid, seed=cfg["seed"],
        train_fraction=cfg["train_fraction"], stratified=cfg["stratified"],
        tol=cfg["tol"], max_iter=cfg["max_iter"], threads=cfg["threads"],
    )

    train = LabeledCorpus(
        corpus.values[result.train_indices], corpus.labels[result.train_indices],
        corpus.names, corpus.method, corpus.params, corpus.grid,
    )
    params = SvcParams(result.best_C, result.best_gamma, cfg["tol"], cfg["max_iter"])
    model = ovo_fit(train, params, threads=cfg["threads"])
    test_pred = ovo_predict(model, corpus.values[result.test_indices])
    test_accuracy = float((test_pred == corpus.labels[result.test_indices]).mean())

    prefix = cfg["out_prefix"]
    model_path = f"{prefix}_model.elpm"
    save_model(model_path, model)
    _write_csv(
        f"{prefix}_grid.csv", ["C", "gamma", "accuracy", "converged"],
        [[repr(r["C"]), repr(r["gamma"]), repr(r["accuracy"]), int(r["converged"])]
         for r in result.table],
        _comments(provenance),
    )
    _write_json(f"{prefix}_report.json", {
        **provenance,
        "best_C": result.best_C,
        "best_gamma": result.best_gamma,
        "best_accuracy": result.best_accuracy,
        "model_test_accuracy": test_accuracy,
        "n_train": int(result.train_indices.size),
        "n_test": int(result.test_indices.size),
        "model_file": model_path,
        "grid_cells": len(result.table),
    })
    print(f"best test accuracy {result.best_accuracy:.4f} at C={result.best_C:g}, "
          f"gamma={result.best_gamma:g} ({len(result.table)} grid cells, "
          f"{result.train_indices.size}/{result.test_indices.size} train/test)")
    return 0


def cmd_sweep(cfg) -> int:
    if cfg["k"] < 1:
        raise ConfigError(f"k must be >= 1, got {cfg['k']}")
    grids = _parse_grids(cfg["grids"])
    tree, manifest = _load_tree(cfg)
    params = _method_params(cfg)
    for grid in grids:
        _check_grid_fits(manifest.image_size, grid, cfg["method"], params)
    if cfg["k"] >= len(tree.images):
        raise ConfigError(f"k={cfg['k']} must be smaller than the corpus size {len(tree.images)}")

    provenance = _provenance(cfg, _sha256_paths(tree.paths))
    rows = subimage_sweep(
        tree.images, tree.labels, tree.names, cfg["method"], params, grids,
        k=cfg["k"], distance_mode=cfg["distance"], threads=cfg["threads"],
    )
    _write_csv(
        cfg["out"], ["grid", "rows", "cols", "length", "accuracy"],
        [[r["grid"], r["rows"], r["cols"], r["length"], repr(r["accuracy"])] for r in rows],
        _comments(provenance),
    )
    for r in rows:
        print(f"{r['grid']:>7}  length {r['length']:>6}  accuracy {r['accuracy']:.4f}")
    best = max(rows, key=lambda r: r["accuracy"])
    print(f"best: {best['grid']} at {best['accuracy']:.4f} -> {cfg['out']}")
    return 0


def cmd_visualize(cfg) -> int:
    image_path = cfg["image"]
    if image_path is None or not Path(image_path).is_file():
        raise ConfigError(f"image {image_path!r} does not exist")
    cfg = dict(cfg, method="elp")
    params = _method_params(cfg)
    indices = []
    for token in str(cfg["offset_indices"]).split(","):
        if token.strip():
            indices.append(int(token))
    if not indices:
        raise ConfigError("empty offset index list")
    for idx in indices:
        if not 0 <= idx < params.n_projections:
            raise ConfigError(
                f"offset index {idx} out of range [0, {params.n_projections})"
            )

    img = load_image(image_path)
    provenance = _provenance(cfg, _sha256_file(image_path))
    outputs = []
    for idx in indices:
        rendered = elp_code_image(img, params, idx)
        out_path = f"{cfg['out_prefix']}_offset{idx}.png"
        save_image(rendered, out_path)
        outputs.append(out_path)
    _write_json(f"{cfg['out_prefix']}_meta.json", {**provenance, "outputs": outputs})
    print("wrote " + ", ".join(outputs))
    return 0


def cmd_bench(cfg) -> int:
    if cfg["repeats"] < 1:
        raise ConfigError("repeats must be >= 1")
    started = time.perf_counter()
    if cfg["synthetic"]:
        size = _parse_size(cfg["size"])
        if size is None:
            raise ConfigError("synthetic benchmarking needs a concrete --size")
        rng = np.random.default_rng(cfg["seed"])
        images = [
            GrayImage(rng.integers(0, 256, size=size, dtype=np.uint8))
            for _ in range(cfg["synthetic"])
        ]
        labels = np.zeros(len(images), dtype=np.int64)
        names = ["synthetic"]
        input_hash = f"synthetic:seed={cfg['seed']},n={cfg['synthetic']},size={size[0]}x{size[1]}"
    else:
        if cfg["root"] is None:
            raise ConfigError("bench needs either --root or --synthetic N")
        tree, manifest = _load_tree(cfg)
        images, labels, names = tree.images, tree.labels, tree.names
        size = manifest.image_size
        input_hash = _sha256_paths(tree.paths)
    load_s = time.perf_counter() - started

    grid = _parse_grid(cfg["grid"])
    params = _method_params(cfg)
    _check_grid_fits(size, grid, cfg["method"], params)

    if cfg["method"] == "elp":
        per_image_windows = sum(
            window_count(h, w, params.window_side, params.stride)
            for h, w in cell_shapes(size[0], size[1], grid)
        )
    else:
        per_image_windows = sum(
            max(h - 2 * params.radius, 0) * max(w - 2 * params.radius, 0)
            for h, w in cell_shapes(size[0], size[1], grid)
        )

    runs = []
    for _ in range(cfg["repeats"]):
        t0 = time.perf_counter()
        corpus = extract_corpus(images, labels, names, cfg["method"], params, grid,
                                threads=cfg["threads"])
        dt = time.perf_counter() - t0
        runs.append({
            "extract_s": dt,
            "images_per_s": len(images) / dt,
            "windows_per_s": per_image_windows * len(images) / dt,
            "checksum": _sha256_array(corpus.values),
        })

    deterministic = len({r["checksum"] for r in runs}) == 1
    report = {
        **_provenance(cfg, input_hash),
        "threads": cfg["threads"],
        "n_images": len(images),
        "image_size": list(size),
        "windows_per_image": per_image_windows,
        "descriptor_length": corpus.dim,
        "stages": {"load_s": load_s},
        "runs": runs,
        "deterministic": deterministic,
    }
    if cfg["out"]:
        _write_json(cfg["out"], report)
    for i, r in enumerate(runs):
        print(f"run {i + 1}: {r['extract_s']:.2f}s  {r['images_per_s']:.1f} images/s  "
              f"{r['windows_per_s']:.0f} windows/s  {r['checksum'][:23]}...")
    print(f"deterministic checksums: {deterministic}  (threads={cfg['threads']})")
    return 0


COMMANDS = {
    "extract": (cmd_extract, TREE_OPTS + METHOD_OPTS + [
        Opt("--grid", str, "1x1", "sub-image grid ROWSxCOLS"),
        Opt("--out", str, "corpus.elpc", "output corpus file"),
        Opt("--csv", str, None, "also export the corpus as CSV"),
        Opt("--manifest", str, None, "manifest path (default: <out>.manifest.json)"),
    ], "encode a dataset tree into a descriptor corpus"),
    "search": (cmd_search, [
        Opt("--corpus", str, _REQUIRED, "corpus file from 'extract'"),
        Opt("--k", int, 5, "number of nearest neighbors"),
        Opt("--distance", str, "paper", "distance pipeline", DISTANCE_MODES),
        Opt("--out-prefix", str, "search", "prefix for report/CSV outputs"),
    ], "leave-one-out k-NN retrieval over a corpus"),
    "classify": (cmd_classify, [
        Opt("--corpus", str, _REQUIRED, "corpus file from 'extract'"),
        Opt("--train-fraction", float, 0.8, "training share of the split"),
        Opt("--seed", int, 0, "split seed"),
        Opt("--c-grid", str, None, "comma list of C values (default: decades 1e-7..1e7)"),
        Opt("--gamma-grid", str, None, "comma list of gamma values (default: decades 1e-5..1e3)"),
        Opt("--smoke", _bool, False, "use a reduced 3x3 parameter grid"),
        Opt("--stratified", _bool, False, "stratify the split by identity"),
        Opt("--tol", float, 1e-3, "solver KKT tolerance"),
        Opt("--max-iter", int, 200_000, "solver iteration cap"),
        Opt("--out-prefix", str, "classify", "prefix for report/CSV/model outputs"),
    ], "RBF-SVM grid search and final model training"),
    "sweep": (cmd_sweep, TREE_OPTS + METHOD_OPTS + [
        Opt("--grids", str, _REQUIRED, "grid list '1x1,2x2' or square range '1..12'"),
        Opt("--k", int, 5, "number of nearest neighbors"),
        Opt("--distance", str, "paper", "distance pipeline", DISTANCE_MODES),
        Opt("--out", str, "sweep.csv", "output CSV"),
    ], "retrieval accuracy across sub-image grids"),
    "visualize": (cmd_visualize, ELP_OPTS + [
        Opt("--image", str, _REQUIRED, "input image (PNG/JPEG/PGM)"),
        Opt("--offset-indices", str, "0,2", "adjunct slots to render"),
        Opt("--out-prefix", str, "code", "prefix for PNG outputs"),
    ], "render projection-code images for one input"),
    "bench": (cmd_bench, METHOD_OPTS + [
        Opt("--root", str, None, "dataset root (or use --synthetic)"),
        Opt("--synthetic", int, None, "benchmark on N seeded synthetic images"),
        Opt("--seed", int, 0, "synthetic generator seed"),
        Opt("--min-count", int, 100, "identity selection threshold for --root"),
        Opt("--size", str, "112x84", "image size HEIGHTxWIDTH"),
        Opt("--resize", _bool, False, "resize --root images to --size"),
        Opt("--grid", str, "1x1", "sub-image grid"),
        Opt("--repeats", int, 2, "timed repetitions (checksums must agree)"),
        Opt("--out", str, "bench.json", "benchmark report"),
    ], "extraction throughput and determinism report"),
}


def parse_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    values = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args, opts) -> dict:
    by_dest = {o.dest: o for o in opts}
    cfg = {o.dest: o.default for o in opts}

    if args.config:
        for key, raw in parse_config_file(args.config).items():
            if key == "config":
                raise ConfigError("config files cannot nest --config")
            if key not in by_dest:
                raise ConfigError(f"unknown config key {key!r}")
            cfg[key] = _coerce(by_dest[key], raw)

    for opt in opts:
        given = getattr(args, opt.dest, None)
        if given is not None:
            cfg[opt.dest] = _coerce(opt, given)

    for opt in opts:
        if cfg[opt.dest] is _REQUIRED:
            raise ConfigError(f"missing required option {opt.flag}")
    return cfg


def _coerce(opt: Opt, value):
    if value is _REQUIRED or value is None:
        return value
    try:
        coerced = opt.type(value) if isinstance(value, str) or opt.type is _bool else value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {opt.flag}: {exc}")
    if opt.choices and coerced not in opt.choices:
        raise ConfigError(f"{opt.flag} must be one of {', '.join(map(str, opt.choices))}")
    return coerced


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elpface",
        description="Projection-code (ELP) and LBP face descriptors with a "
                    "retrieval and classification evaluation harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, opts, description) in COMMANDS.items():
        cmd = sub.add_parser(name, help=description, description=description)
        for opt in COMMON_OPTS + opts:
            if opt.type is _bool:
                cmd.add_argument(opt.flag, dest=opt.dest, default=None,
                                 action=argparse.BooleanOptionalAction, help=opt.help)
            else:
                cmd.add_argument(opt.flag, dest=opt.dest, default=None, help=opt.help)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler, opts, _ = COMMANDS[args.command]
    try:
        cfg = _resolve(args, COMMON_OPTS + opts)
        if cfg["threads"] < 1:
            raise ConfigError("threads must be >= 1")
        cfg["command"] = args.command
        return handler(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
