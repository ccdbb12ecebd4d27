"""Binary and CSV serialization for descriptor corpora and trained models.

Both binary formats are little-endian and self-describing: an 8-byte magic,
a u32 length-prefixed UTF-8 JSON header carrying every dimension needed to
read the raw blocks that follow, then the blocks themselves in header
order. Exact layouts are documented in the README.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CorpusFormatError
from .evaluate import LabeledCorpus, Standardization
from .imaging import SubImageGrid
from .svm import BinarySvc, SvcModel, SvcParams

CORPUS_MAGIC = b"ELPCORP1"
MODEL_MAGIC = b"ELPSVCM1"


def _write_header(fh, magic: bytes, header: dict) -> None:
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    fh.write(magic)
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)


def _read_header(fh, magic: bytes, path) -> dict:
    got = fh.read(len(magic))
    if got != magic:
        raise CorpusFormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    (length,) = struct.unpack("<I", fh.read(4))
    return json.loads(fh.read(length).decode("utf-8"))


def _read_array(fh, dtype, count, path) -> np.ndarray:
    arr = np.fromfile(fh, dtype=dtype, count=count)
    if arr.size != count:
        raise CorpusFormatError(f"{path}: truncated file")
    return arr


def save_corpus(path, corpus: LabeledCorpus, provenance: dict | None = None) -> None:
    """Write a descriptor corpus to the binary container.

    ``provenance`` (the resolved run configuration and input hash) is stored
    verbatim in the header for traceability; readers ignore it.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "version": 1,
        "method": corpus.method,
        "params": corpus.params,
        "grid": [corpus.grid.rows, corpus.grid.cols],
        "names": corpus.names,
        "paths": corpus.paths,
        "n": len(corpus),
        "dim": corpus.dim,
        "labels_dtype": "<i8",
        "values_dtype": "<f8",
        "provenance": provenance,
    }
    with open(path, "wb") as fh:
        _write_header(fh, CORPUS_MAGIC, header)
        corpus.labels.astype("<i8").tofile(fh)
        corpus.values.astype("<f8").tofile(fh)


def load_corpus(path) -> LabeledCorpus:
    path = Path(path)
    with open(path, "rb") as fh:
        header = _read_header(fh, CORPUS_MAGIC, path)
        n, dim = header["n"], header["dim"]
        labels = _read_array(fh, np.dtype(header["labels_dtype"]), n, path)
        values = _read_array(fh, np.dtype(header["values_dtype"]), n * dim, path)
    return LabeledCorpus(
        values.reshape(n, dim).astype(np.float64),
        labels.astype(np.int64),
        header["names"],
        header["method"],
        header["params"],
        SubImageGrid(*header["grid"]),
        header["paths"],
    )


def write_corpus_csv(path, corpus: LabeledCorpus, comments=()) -> None:
    """CSV export: one row per image holding path, label, and all values.

    Values are written with repr-precision so they round-trip exactly;
    ``comments`` become '#'-prefixed preamble lines.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    paths = corpus.paths or [""] * len(corpus)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        cols = ",".join(f"v{i}" for i in range(corpus.dim))
        fh.write(f"path,label,{cols}\n")
        for p, lab, row in zip(paths, corpus.labels, corpus.values):
            fh.write(f"{p},{int(lab)},")
            fh.write(",".join(repr(v) for v in row.tolist()))
            fh.write("\n")


def save_model(path, model: SvcModel) -> None:
    """Write a one-vs-one ensemble to the binary container."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pairs = sorted(model.pair_models)
    header = {
        "version": 1,
        "dim": int(model.transform.mean.size),
        "classes": [int(c) for c in model.classes],
        "params": model.params.to_dict(),
        "pairs": [
            {
                "a": int(a),
                "b": int(b),
                "n_sv": int(model.pair_models[(a, b)].support_vectors.shape[0]),
                "bias": float(model.pair_models[(a, b)].bias),
                "converged": bool(model.pair_models[(a, b)].converged),
                "iterations": int(model.pair_models[(a, b)].iterations),
            }
            for a, b in pairs
        ],
    }
    with open(path, "wb") as fh:
        _write_header(fh, MODEL_MAGIC, header)
        model.transform.mean.astype("<f8").tofile(fh)
        model.transform.scale.astype("<f8").tofile(fh)
        for a, b in pairs:
            machine = model.pair_models[(a, b)]
            machine.support_vectors.astype("<f8").tofile(fh)
            machine.coef.astype("<f8").tofile(fh)
            machine.support_indices.astype("<i8").tofile(fh)


def load_model(path) -> SvcModel:
    path = Path(path)
    with open(path, "rb") as fh:
        header = _read_header(fh, MODEL_MAGIC, path)
        dim = header["dim"]
        params = SvcParams(**header["params"])
        mean = _read_array(fh, "<f8", dim, path).astype(np.float64)
        scale = _read_array(fh, "<f8", dim, path).astype(np.float64)
        pair_models = {}
        for entry in header["pairs"]:
            n_sv = entry["n_sv"]
            sv = _read_array(fh, "<f8", n_sv * dim, path).reshape(n_sv, dim)
            coef = _read_array(fh, "<f8", n_sv, path)
            support = _read_array(fh, "<i8", n_sv, path)
            pair_models[(entry["a"], entry["b"])] = BinarySvc(
                sv.astype(np.float64), coef.astype(np.float64), entry["bias"],
                params.gamma, support.astype(np.int64), entry["converged"],
                entry["iterations"],
            )
    return SvcModel(
        np.asarray(header["classes"], dtype=np.int64),
        pair_models,
        Standardization(mean, scale),
        params,
    )
