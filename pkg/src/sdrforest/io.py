"""CSV datasets, result tables and model files.

Model files are canonical JSON: keys sorted, no insignificant whitespace.
Floating point arrays are stored as raw little-endian IEEE-754 bytes, so
a saved forest predicts bit-for-bit what the original did.  The layout is
described in ``docs/model_format.md``.
"""

import base64
import csv
import json
import math
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import (ConstantColumn, CorruptModel, MissingTarget, NonNumericCell, ParseError,
                     VersionMismatch)
from .forest import Forest
from .tree import LEAF, OBLIQUE, FitParams, Tree

FORMAT_NAME = "sdrforest-model"
FORMAT_VERSION = 1
UNIT_NORM_TOL = 1e-9

# dtype of every per-tree array, as stored on disk
TREE_DTYPES = {
    "kind": "<i1", "feature": "<i8", "coef_row": "<i8", "coefs": "<f8",
    "threshold": "<f8", "left": "<i8", "right": "<i8", "value": "<f8",
    "count": "<i8", "leaf_id": "<i8",
}


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray | None
    feature_names: list[str]
    target_name: str | None

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class Standardization:
    """Per-column affine map ``(x - mean) / scale`` applied to covariates."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": _encode(self.mean, "<f8"), "scale": _encode(self.scale, "<f8")}

    @classmethod
    def from_dict(cls, d) -> "Standardization":
        return cls(_decode(d["mean"], "standardization.mean"),
                   _decode(d["scale"], "standardization.scale"))


# -- CSV ------------------------------------------------------------------


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader, None)
            if header is None:
                raise ParseError("file is empty", 1)
            header = [h.strip() for h in header]
            if len(set(header)) != len(header):
                raise ParseError("header names are not unique", 1)
            rows = []
            for row in reader:
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != len(header):
                    raise ParseError(
                        f"expected {len(header)} fields, found {len(row)}", reader.line_num)
                rows.append((reader.line_num, row))
        except csv.Error as e:
            raise ParseError(str(e), reader.line_num) from None
    return header, rows


def _to_matrix(header, rows) -> np.ndarray:
    out = np.empty((len(rows), len(header)))
    for r, (_, row) in enumerate(rows):
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise NonNumericCell(r + 1, header[c], cell)
            out[r, c] = v
    return out


def read_dataset(path, target: str | None = None, standardize: bool = False,
                 columns: list[str] | None = None):
    """Load a headed numeric CSV.

    Covariates are all non-target columns in header order, or exactly
    ``columns`` when given.  ``target=None`` reads covariates only.  With
    ``standardize`` every covariate is centered and scaled to unit
    (population) variance and the parameters are returned; otherwise the
    second return value is ``None``.  Row numbers in errors count data
    rows from 1.
    """
    header, rows = _read_rows(path)
    if target is not None and target not in header:
        raise MissingTarget(f"target column {target!r} not in header {header}")
    if columns is None:
        columns = [h for h in header if h != target]
    else:
        missing = [c for c in columns if c not in header]
        if missing:
            raise MissingTarget(f"columns {missing} not in header {header}")
    data = _to_matrix(header, rows)
    X = np.ascontiguousarray(data[:, [header.index(c) for c in columns]])
    y = data[:, header.index(target)].copy() if target is not None else None

    std = None
    if standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        for j, s in enumerate(scale):
            if not s > 0:
                raise ConstantColumn(columns[j])
        std = Standardization(mean, scale)
        X = std.apply(X)
    return Dataset(X, y, list(columns), target), std


def write_table(path, columns: list[str], rows) -> None:
    """Write a headed CSV; floats use ``repr`` so they read back exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def write_matrix(path, columns: list[str], M) -> None:
    write_table(path, columns, np.asarray(M, dtype=np.float64).tolist())


def write_dicts(path, rows: list[dict], columns: list[str] | None = None) -> None:
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    write_table(path, columns, ([r.get(c, "") for c in columns] for r in rows))


# -- model files ----------------------------------------------------------


def _encode(a, dtype: str) -> dict:
    a = np.ascontiguousarray(a, dtype=dtype)
    raw = zlib.compress(a.tobytes(), 6)
    return {"dtype": dtype, "shape": list(a.shape), "data": base64.b64encode(raw).decode("ascii")}


def _decode(d, name: str, dtype: str | None = None) -> np.ndarray:
    try:
        if dtype is not None and d["dtype"] != dtype:
            raise CorruptModel(name, f"dtype {d['dtype']!r}, expected {dtype!r}")
        raw = zlib.decompress(base64.b64decode(d["data"], validate=True))
        shape = tuple(int(s) for s in d["shape"])
        return np.frombuffer(raw, dtype=np.dtype(d["dtype"])).reshape(shape).astype(
            np.dtype(d["dtype"]).newbyteorder("="))
    except CorruptModel:
        raise
    except Exception as e:
        raise CorruptModel(name, str(e)) from None


def model_to_dict(forest: Forest) -> dict:
    trees = [{k: _encode(getattr(t, k), TREE_DTYPES[k]) for k in Tree.ARRAYS}
             for t in forest.trees]
    std = forest.standardization
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "n_features": forest.n_features,
        "feature_names": forest.feature_names,
        "target_name": forest.target_name,
        "params": asdict(forest.params),
        "n_trees": forest.n_trees,
        "seed": forest.seed,
        "fingerprint": forest.fingerprint,
        "standardization": std.to_dict() if std is not None else None,
        "inbag": _encode(forest.inbag, "<i4"),
        "trees": trees,
    }


def dumps_model(forest: Forest) -> bytes:
    doc = model_to_dict(forest)
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def save_model(forest: Forest, path) -> None:
    Path(path).write_bytes(dumps_model(forest))


def _check_tree(t: Tree, m: int, p: int) -> None:
    name = f"trees[{m}]"
    n = t.n_nodes
    if n == 0:
        raise CorruptModel(name, "no nodes")
    for k in Tree.ARRAYS:
        a = getattr(t, k)
        if k != "coefs" and a.shape != (n,):
            raise CorruptModel(f"{name}.{k}", f"shape {a.shape}, expected ({n},)")
    if t.coefs.ndim != 2 or t.coefs.shape[1] != p:
        raise CorruptModel(f"{name}.coefs", f"shape {t.coefs.shape}")
    if not np.isin(t.kind, (0, 1, 2)).all():
        raise CorruptModel(f"{name}.kind", "unknown node kind")
    leaf = t.kind == LEAF
    inner = ~leaf
    for k in ("left", "right"):
        c = getattr(t, k)[inner]
        # children always have larger ids, which also rules out cycles
        if (c <= np.flatnonzero(inner)).any() or (c >= n).any():
            raise CorruptModel(f"{name}.{k}", "child index out of bounds")
    if not np.array_equal(np.sort(t.leaf_id[leaf]), np.arange(leaf.sum())):
        raise CorruptModel(f"{name}.leaf_id", "leaf ids are not 0..n_leaves-1")
    axis = t.kind == 1
    if ((t.feature[axis] < 0) | (t.feature[axis] >= p)).any():
        raise CorruptModel(f"{name}.feature", "feature index out of bounds")
    obl = t.kind == OBLIQUE
    rows = t.coef_row[obl]
    if ((rows < 0) | (rows >= len(t.coefs))).any():
        raise CorruptModel(f"{name}.coef_row", "coefficient row out of bounds")
    if len(t.coefs) and np.abs(np.linalg.norm(t.coefs, axis=1) - 1.0).max() > UNIT_NORM_TOL:
        raise CorruptModel(f"{name}.coefs", "oblique direction is not unit norm")
    if not (np.isfinite(t.threshold[inner]).all() and np.isfinite(t.value).all()):
        raise CorruptModel(name, "non-finite threshold or value")


def model_from_dict(doc) -> Forest:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CorruptModel("format", "not a model file")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"model format version {version!r} is not supported (expected {FORMAT_VERSION})")
    try:
        p = int(doc["n_features"])
        params = FitParams(**doc["params"])
        n_trees = int(doc["n_trees"])
        seed = int(doc["seed"])
        fp = doc["fingerprint"]
        names = doc["feature_names"]
        target = doc["target_name"]
        trees_doc = doc["trees"]
        inbag_doc = doc["inbag"]
        std_doc = doc["standardization"]
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptModel("header", str(e)) from None
    if len(trees_doc) != n_trees or n_trees < 1:
        raise CorruptModel("trees", f"{len(trees_doc)} trees, header says {n_trees}")
    if names is not None and len(names) != p:
        raise CorruptModel("feature_names", "length differs from n_features")

    trees = []
    for m, td in enumerate(trees_doc):
        try:
            arrays = {k: _decode(td[k], f"trees[{m}].{k}", TREE_DTYPES[k]) for k in Tree.ARRAYS}
        except (KeyError, TypeError) as e:
            raise CorruptModel(f"trees[{m}]", f"missing {e}") from None
        arrays["kind"] = arrays["kind"].astype(np.int8)
        t = Tree(**arrays, n_features=p, params=params)
        _check_tree(t, m, p)
        trees.append(t)

    inbag = _decode(inbag_doc, "inbag", "<i4").astype(np.int32)
    if inbag.ndim != 2 or inbag.shape[0] != n_trees:
        raise CorruptModel("inbag", f"shape {inbag.shape}")
    std = None
    if std_doc is not None:
        try:
            std = Standardization.from_dict(std_doc)
        except (KeyError, TypeError) as e:
            raise CorruptModel("standardization", str(e)) from None
        if std.mean.shape != (p,) or std.scale.shape != (p,):
            raise CorruptModel("standardization", "wrong length")
    return Forest(trees=trees, inbag=inbag, params=params, seed=seed, n_features=p,
                  fingerprint=fp, feature_names=names, target_name=target,
                  standardization=std)


def loads_model(data: bytes) -> Forest:
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as e:
        raise CorruptModel("document", str(e)) from None
    return model_from_dict(doc)


def load_model(path) -> Forest:
    return loads_model(Path(path).read_bytes())
