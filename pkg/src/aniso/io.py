"""CSV datasets, score files and the versioned JSON model format.

Model files store every float as ``float.hex`` text, so a saved detector
reloads bit for bit and scores identically in another process.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from aniso.detector import Detector, DetectorConfig
from aniso.errors import (CorruptFile, DataError, LabelNotBinary, NonFiniteValue, ParseError,
                          RaggedRows, VersionMismatch)
from aniso.forest import Dataset, FitConfig, ForestModel, HyperRectangle, IsolationTree, Leaf, Split
from aniso.scoring import BoundingPolicy, ScorerKind

FORMAT_NAME = "aniso-model"
FORMAT_VERSION = 1

PathLike = Union[str, Path]


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_dataset(path: PathLike, label_column: Optional[Union[int, str]] = None,
                 delimiter: str = ",", has_header: Optional[bool] = None) -> Dataset:
    """Read a numeric CSV table.

    Args:
        path: CSV file, RFC 4180 quoting, ``.`` as decimal point.
        label_column: index (negative counts from the end) or header name
            of a 0/1 label column to split off; ``None`` keeps every column.
        delimiter: field separator.
        has_header: ``None`` treats the first row as a header when any of
            its cells is not a number.

    Row and column numbers in errors are 0-based and count data rows only.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    if has_header is None:
        has_header = not all(_is_number(c) for c in rows[0])
    header = [c.strip() for c in rows[0]] if has_header else None
    body = rows[1:] if has_header else rows
    if not body:
        raise DataError(f"{path}: no data rows")

    width = len(body[0])
    values = np.empty((len(body), width))
    for i, row in enumerate(body):
        if len(row) != width:
            raise RaggedRows(f"row {i} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(i, j, cell) from None
            if not math.isfinite(v):
                raise NonFiniteValue(i, j)
            values[i, j] = v

    labels = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if header is None or label_column not in header:
                raise DataError(f"no column named {label_column!r}")
            col = header.index(label_column)
        else:
            col = int(label_column)
            if not -width <= col < width:
                raise DataError(f"label column {col} out of range for {width} columns")
            col %= width
        labels = values[:, col]
        if not np.isin(labels, (0.0, 1.0)).all():
            bad = int(np.flatnonzero(~np.isin(labels, (0.0, 1.0)))[0])
            raise LabelNotBinary(f"row {bad}: label {labels[bad]!r} is not 0 or 1")
        values = np.delete(values, col, axis=1)
        if values.shape[1] == 0:
            raise DataError("no feature columns left after removing the label column")
    return Dataset(values, None if labels is None else labels.astype(np.int8))


def write_scores(path: Optional[PathLike], scores, stream=None) -> None:
    """Write ``index,score`` rows in input order; floats use shortest round-trip text."""
    lines = ["index,score"] + [f"{i},{float(s)!r}" for i, s in enumerate(scores)]
    text = "\n".join(lines) + "\n"
    if path is None:
        stream.write(text)
    else:
        Path(path).write_text(text)


def _hex(x: float) -> str:
    return float(x).hex()


def _unhex(s) -> float:
    if not isinstance(s, str):
        raise CorruptFile(f"expected a hex float string, got {s!r}")
    return float.fromhex(s)


def _rect_to_json(r: HyperRectangle) -> dict:
    return {"lower": [_hex(v) for v in r.lower], "upper": [_hex(v) for v in r.upper]}


def _rect_from_json(obj) -> HyperRectangle:
    return HyperRectangle([_unhex(v) for v in obj["lower"]], [_unhex(v) for v in obj["upper"]])


def _node_to_json(n) -> dict:
    if isinstance(n, Leaf):
        return {"depth": n.depth, "count": n.count, "rect": _rect_to_json(n.rect)}
    return {"feature": n.feature, "threshold": _hex(n.threshold),
            "left": _node_to_json(n.left), "right": _node_to_json(n.right)}


def _node_from_json(obj, d: int):
    if "feature" in obj:
        return Split(int(obj["feature"]), _unhex(obj["threshold"]),
                     _node_from_json(obj["left"], d), _node_from_json(obj["right"], d))
    return Leaf(int(obj["depth"]), int(obj["count"]), _rect_from_json(obj["rect"]))


def _config_to_json(c: DetectorConfig) -> dict:
    box = None
    if c.bounding_box is not None:
        box = [[_hex(v) for v in side] for side in c.bounding_box]
    return {
        "n_estimators": c.n_estimators,
        "subsample_size": c.subsample_size,
        "scorer": c.scorer.value,
        "alpha": _hex(c.alpha),
        "tau": None if c.tau is None else _hex(c.tau),
        "contamination": None if c.contamination is None else _hex(c.contamination),
        "seed": c.seed,
        "strict_paper_depth": c.strict_paper_depth,
        "bounding_policy": c.bounding_policy.value,
        "bounding_box": box,
    }


def _config_from_json(obj) -> DetectorConfig:
    opt = lambda v: None if v is None else _unhex(v)
    box = obj.get("bounding_box")
    if box is not None:
        box = tuple(tuple(_unhex(v) for v in side) for side in box)
    return DetectorConfig(
        n_estimators=int(obj["n_estimators"]),
        subsample_size=int(obj["subsample_size"]),
        scorer=ScorerKind(obj["scorer"]),
        alpha=_unhex(obj["alpha"]),
        tau=opt(obj["tau"]),
        contamination=opt(obj["contamination"]),
        seed=int(obj["seed"]),
        strict_paper_depth=bool(obj["strict_paper_depth"]),
        bounding_policy=BoundingPolicy(obj["bounding_policy"]),
        bounding_box=box,
    )


def detector_to_json(det: Detector) -> dict:
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": _config_to_json(det.config),
        "fitted_tau": None if det.fitted_tau is None else _hex(det.fitted_tau),
        "data_bounds": _rect_to_json(det.model.data_bounds),
        "trees": [
            {"subsample_size": t.subsample_size,
             "bounding_box": _rect_to_json(t.bounding_box),
             "root": _node_to_json(t.root)}
            for t in det.model.trees
        ],
    }


def detector_from_json(obj) -> Detector:
    if not isinstance(obj, dict) or obj.get("format") != FORMAT_NAME:
        raise CorruptFile("not an aniso model file")
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"model format version {version!r}, this build reads {FORMAT_VERSION}")
    try:
        config = _config_from_json(obj["config"])
        bounds = _rect_from_json(obj["data_bounds"])
        d = bounds.dim
        trees = []
        for t in obj["trees"]:
            root = _node_from_json(t["root"], d)
            tree = IsolationTree.from_root(root, int(t["subsample_size"]),
                                           _rect_from_json(t["bounding_box"]))
            for stored, rebuilt in zip(_leaves(root), tree.leaves()):
                if (stored.depth, stored.count) != (rebuilt.depth, rebuilt.count) \
                        or stored.rect != rebuilt.rect:
                    raise CorruptFile("leaf record disagrees with its split path")
            trees.append(tree)
        tau = obj["fitted_tau"]
        fitted_tau = None if tau is None else _unhex(tau)
        fit_config = FitConfig(config.n_estimators, config.subsample_size, config.seed)
        model = ForestModel(trees, fit_config, bounds)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, (CorruptFile, VersionMismatch)):
            raise
        raise CorruptFile(f"malformed model file: {exc}") from exc
    return Detector(model, config, fitted_tau)


def _leaves(n) -> list[Leaf]:
    if isinstance(n, Leaf):
        return [n]
    return _leaves(n.left) + _leaves(n.right)


def save_model(det: Detector, path: PathLike) -> None:
    Path(path).write_text(json.dumps(detector_to_json(det), separators=(",", ":")) + "\n")


def load_model(path: PathLike) -> Detector:
    try:
        obj = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    return detector_from_json(obj)
