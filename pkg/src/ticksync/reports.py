"""Delimited-output writers: matrix CSVs, long-format report tables and
run manifests.  All writers emit fixed float formats and newline
conventions so identical runs produce byte-identical files."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError

__all__ = [
    "write_matrix_csv",
    "read_matrix_csv",
    "write_rows_csv",
    "write_manifest",
    "FLOAT_FMT",
]

FLOAT_FMT = ".12g"


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, FLOAT_FMT)
    if isinstance(value, (np.floating,)):
        return format(float(value), FLOAT_FMT)
    return str(value)


def write_matrix_csv(path: str | Path, matrix: np.ndarray, row_labels: Sequence[str]) -> None:
    """One labelled row per line: label,v0,v1,..."""
    matrix = np.atleast_2d(np.asarray(matrix))
    if matrix.shape[0] != len(row_labels):
        raise ValueError(f"{matrix.shape[0]} rows vs {len(row_labels)} labels")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset"] + [f"v{j}" for j in range(matrix.shape[1])])
        for label, row in zip(row_labels, matrix):
            w.writerow([label] + [format(x, ".17g") for x in row])


def read_matrix_csv(path: str | Path) -> tuple[np.ndarray, list[str]]:
    labels: list[str] = []
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "asset":
            raise ParseError(f"bad matrix header {header!r}", 1)
        width = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width + 1:
                raise ParseError(f"expected {width + 1} fields, got {len(row)}", lineno)
            labels.append(row[0])
            try:
                rows.append([float(x) for x in row[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
    return np.array(rows), labels


def write_rows_csv(path: str | Path, fieldnames: Sequence[str], rows: Iterable[Mapping]) -> None:
    """Long-format table with stable field order and float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fieldnames)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in fieldnames])


def write_manifest(path: str | Path, entries: Mapping[str, object]) -> None:
    """key=value run manifest; nested mappings are flattened with dots."""
    flat: dict[str, str] = {}

    def add(prefix: str, value) -> None:
        if isinstance(value, Mapping):
            for k, v in value.items():
                add(f"{prefix}.{k}" if prefix else str(k), v)
        elif isinstance(value, (list, tuple)):
            flat[prefix] = ",".join(_fmt(v) for v in value)
        else:
            flat[prefix] = _fmt(value)

    for key, val in entries.items():
        add(key, val)
    with open(path, "w") as fh:
        for k, v in flat.items():
            fh.write(f"{k}={v}\n")
