"""CSV ingestion, scaling, stratified splitting and input quantization.

The on-disk product is a prepared dataset JSON holding integer features in
[0, 2^w_in), integer class labels, the train/test index split and the
min/max scaling that produced the integers, so every later stage works
from one self-contained deterministic file.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np


class DataError(Exception):
    """Bad input data (malformed CSV, unusable columns, version skew)."""


@dataclass
class RawDataset:
    features: np.ndarray  # float64 (n, f)
    labels: np.ndarray  # int64 (n,)
    feature_names: list[str]
    label_names: list[str]  # index = class id, first occurrence order


@dataclass
class QuantDataset:
    name: str
    w_in: int
    features: np.ndarray  # int64 (n, f) in [0, 2^w_in)
    labels: np.ndarray  # int64 (n,)
    train_idx: np.ndarray  # int64, ascending
    test_idx: np.ndarray  # int64, ascending
    scaling_min: np.ndarray  # float64 (f,)
    scaling_max: np.ndarray
    feature_names: list[str]
    label_names: list[str]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def load_csv(path, label_col: str = "class") -> RawDataset:
    """Parse a headered CSV; the label column may sit anywhere."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_col not in header:
            raise DataError(
                f"{path}: no '{label_col}' column (have: {', '.join(header)})"
            )
        li = header.index(label_col)
        feature_names = [h for i, h in enumerate(header) if i != li]
        if not feature_names:
            raise DataError(f"{path}: no feature columns besides '{label_col}'")
        rows, labels = [], []
        label_ids: dict[str, int] = {}
        for rownum, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and rec[0].strip() == ""):
                continue  # ignore blank lines
            if len(rec) != len(header):
                raise DataError(
                    f"{path}: row {rownum} has {len(rec)} fields, expected {len(header)}"
                )
            vals = []
            for ci, cell in enumerate(rec):
                if ci == li:
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {rownum}, column '{header[ci]}': "
                        f"non-numeric value {cell!r}"
                    ) from None
            lab = rec[li].strip()
            if lab not in label_ids:
                label_ids[lab] = len(label_ids)
            rows.append(vals)
            labels.append(label_ids[lab])
    if not rows:
        raise DataError(f"{path}: no data rows")
    if len(label_ids) < 2:
        raise DataError(f"{path}: single class {next(iter(label_ids))!r}; need >= 2")
    return RawDataset(
        np.array(rows, dtype=np.float64),
        np.array(labels, dtype=np.int64),
        feature_names,
        list(label_ids),
    )


def minmax_scale(features: np.ndarray):
    """Per-column map onto [0, 1]; constant columns go to 0."""
    mins = features.min(axis=0)
    maxs = features.max(axis=0)
    span = maxs - mins
    out = np.zeros_like(features, dtype=np.float64)
    live = span > 0
    out[:, live] = (features[:, live] - mins[live]) / span[live]
    return out, mins, maxs


def quantize01(scaled: np.ndarray, w_in: int) -> np.ndarray:
    """Round-half-up onto the w_in-bit integer grid."""
    top = (1 << w_in) - 1
    q = np.floor(scaled * top + 0.5).astype(np.int64)
    return np.clip(q, 0, top)


def stratified_split(labels: np.ndarray, train_frac: float, seed: int):
    """Per-class shuffle and cut; train share rounds half up per class."""
    if not 0.0 < train_frac < 1.0:
        raise DataError(f"train fraction {train_frac} outside (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5117)))
    train, test = [], []
    for cls in range(int(labels.max()) + 1):
        idxs = np.nonzero(labels == cls)[0]
        perm = idxs[rng.permutation(len(idxs))]
        n_train = int(np.floor(train_frac * len(idxs) + 0.5))
        train.extend(perm[:n_train])
        test.extend(perm[n_train:])
    return (
        np.array(sorted(train), dtype=np.int64),
        np.array(sorted(test), dtype=np.int64),
    )


def prepare_dataset(
    raw: RawDataset, name: str, w_in: int = 4, train_frac: float = 0.7, seed: int = 0
) -> QuantDataset:
    scaled, mins, maxs = minmax_scale(raw.features)
    feats = quantize01(scaled, w_in)
    train_idx, test_idx = stratified_split(raw.labels, train_frac, seed)
    return QuantDataset(
        name=name,
        w_in=w_in,
        features=feats,
        labels=raw.labels.copy(),
        train_idx=train_idx,
        test_idx=test_idx,
        scaling_min=np.asarray(mins, dtype=np.float64),
        scaling_max=np.asarray(maxs, dtype=np.float64),
        feature_names=list(raw.feature_names),
        label_names=list(raw.label_names),
    )


def dataset_to_dict(ds: QuantDataset) -> dict:
    return {
        "version": 1,
        "name": ds.name,
        "w_in": ds.w_in,
        "feature_names": ds.feature_names,
        "label_names": ds.label_names,
        "features": ds.features.tolist(),
        "labels": ds.labels.tolist(),
        "train_idx": ds.train_idx.tolist(),
        "test_idx": ds.test_idx.tolist(),
        "scaling": {"min": ds.scaling_min.tolist(), "max": ds.scaling_max.tolist()},
    }


def dataset_from_dict(d: dict) -> QuantDataset:
    if d.get("version") != 1:
        raise DataError(f"unsupported dataset version {d.get('version')!r}")
    feats = np.array(d["features"], dtype=np.int64)
    if feats.ndim != 2:
        raise DataError("features must be a 2-d array")
    top = (1 << d["w_in"]) - 1
    if feats.size and (feats.min() < 0 or feats.max() > top):
        raise DataError(f"feature values outside [0, {top}]")
    return QuantDataset(
        name=d["name"],
        w_in=int(d["w_in"]),
        features=feats,
        labels=np.array(d["labels"], dtype=np.int64),
        train_idx=np.array(d["train_idx"], dtype=np.int64),
        test_idx=np.array(d["test_idx"], dtype=np.int64),
        scaling_min=np.array(d["scaling"]["min"], dtype=np.float64),
        scaling_max=np.array(d["scaling"]["max"], dtype=np.float64),
        feature_names=list(d["feature_names"]),
        label_names=[str(s) for s in d["label_names"]],
    )


def save_dataset(ds: QuantDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_dict(ds), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_dataset(path) -> QuantDataset:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: not valid JSON ({e})") from None
    return dataset_from_dict(d)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
