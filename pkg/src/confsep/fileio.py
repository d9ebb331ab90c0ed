"""Dataset CSV files and poison manifests.

Dataset files have a header ``f0,...,f{d-1},label`` followed by one item
per line. Floats are written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .attack import PoisonedDataset
from .data import LabeledDataset


class DatasetFileError(ValueError):
    """Malformed dataset file; message carries the path and line number."""


def format_dataset(D: LabeledDataset) -> str:
    lines = [",".join([f"f{j}" for j in range(D.dim)] + ["label"])]
    for x, y in D:
        lines.append(",".join([repr(float(v)) for v in x] + [str(y)]))
    return "\n".join(lines) + "\n"


def write_dataset(D: LabeledDataset, path) -> None:
    Path(path).write_text(format_dataset(D), encoding="utf-8", newline="\n")


def parse_dataset(text: str, num_classes: int | None = None, source: str = "<string>") -> LabeledDataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetFileError(f"{source}: empty file, expected a header line")
    header = lines[0].split(",")
    d = len(header) - 1
    expected = [f"f{j}" for j in range(d)] + ["label"]
    if d < 1 or header != expected:
        raise DatasetFileError(f"{source}:1: bad header, expected 'f0,...,f{{d-1}},label'")
    if len(lines) == 1:
        raise DatasetFileError(f"{source}: no data rows")
    X = np.empty((len(lines) - 1, d))
    y = np.empty(len(lines) - 1, dtype=np.int64)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        fields = line.split(",")
        if len(fields) != d + 1:
            raise DatasetFileError(f"{source}:{lineno}: expected {d + 1} columns, got {len(fields)}")
        try:
            X[i] = [float(v) for v in fields[:-1]]
            y[i] = int(fields[-1])
        except ValueError as exc:
            raise DatasetFileError(f"{source}:{lineno}: {exc}") from None
        if not np.all(np.isfinite(X[i])):
            raise DatasetFileError(f"{source}:{lineno}: non-finite feature value")
        if y[i] < 0:
            raise DatasetFileError(f"{source}:{lineno}: negative label {y[i]}")
    if num_classes is None:
        num_classes = max(2, int(y.max()) + 1)
    if y.max() >= num_classes:
        bad = int(np.argmax(y >= num_classes)) + 2
        raise DatasetFileError(f"{source}:{bad}: label {y[bad - 2]} outside [0, {num_classes})")
    return LabeledDataset(X, y, num_classes)


def read_dataset(path, num_classes: int | None = None) -> LabeledDataset:
    text = Path(path).read_text(encoding="utf-8")
    return parse_dataset(text, num_classes, str(path))


def manifest_path(dataset_path) -> Path:
    p = Path(dataset_path)
    return p.with_name(p.name + ".manifest.json")


def manifest_dict(P: PoisonedDataset, source: str, rate: float) -> dict:
    return {
        "source": source,
        "n": P.plan.n,
        "k": P.plan.k,
        "rate": rate,
        "seed": P.seed,
        "split_seed": P.plan.seed,
        "poison_indices": list(P.plan.poison_indices),
        "trigger": {
            "coords": list(P.spec.patch_coords),
            "values": list(P.spec.patch_values),
            "target_label": P.spec.target_label,
            "placement": P.spec.placement,
        },
    }


def write_manifest(P: PoisonedDataset, path, source: str, rate: float) -> None:
    text = json.dumps(manifest_dict(P, source, rate), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8", newline="\n")
