"""Plain-text persistence: labelled matrix CSVs, key=value files, model directories."""
from __future__ import annotations

import csv
import math
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .admm import FactorModel
from .errors import DataError

__all__ = [
    "write_matrix_csv",
    "read_matrix_csv",
    "write_keyvalue",
    "read_keyvalue",
    "save_model",
    "load_model",
    "atomic_outputs",
    "output_lock",
]


def _cell(x):
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def write_matrix_csv(path, matrix, row_labels, col_labels, corner="label"):
    """Write a matrix with a header of column labels and a leading label column.

    Values are written with ``repr`` so they read back bit-for-bit.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (len(row_labels), len(col_labels)):
        raise ValueError(f"matrix shape {matrix.shape} does not match labels "
                         f"({len(row_labels)}, {len(col_labels)})")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow([corner, *col_labels])
        for label, row in zip(row_labels, matrix):
            out.writerow([label, *(_cell(x) for x in row)])


def read_matrix_csv(path):
    """Inverse of :func:`write_matrix_csv`; returns ``(matrix, row_labels, col_labels)``."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        cols = header[1:]
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            labels.append(rec[0])
            try:
                rows.append([float(x) for x in rec[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric entry") from None
    matrix = np.array(rows, dtype=float).reshape(len(labels), len(cols))
    return matrix, labels, cols


def write_keyvalue(path, mapping):
    with open(path, "w") as fh:
        for key, value in mapping.items():
            fh.write(f"{key}={value}\n")


def read_keyvalue(path):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def save_model(model: FactorModel, directory, tickers=None, words=None, meta=None):
    """Write ``u.csv``, ``w.csv`` and ``meta.txt`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tickers = tickers if tickers is not None else [f"stock{i}" for i in range(model.n)]
    words = words if words is not None else [f"word{j}" for j in range(model.m)]
    factors = [f"f{k}" for k in range(model.d)]
    write_matrix_csv(directory / "u.csv", model.u, tickers, factors, corner="ticker")
    write_matrix_csv(directory / "w.csv", model.w, factors, words, corner="factor")
    write_keyvalue(directory / "meta.txt", meta or {"d": model.d})


def load_model(directory):
    """Returns ``(model, tickers, words, meta)``."""
    directory = Path(directory)
    for name in ("u.csv", "w.csv"):
        if not (directory / name).exists():
            raise FileNotFoundError(f"model file {directory / name} not found")
    u, tickers, _ = read_matrix_csv(directory / "u.csv")
    w, _, words = read_matrix_csv(directory / "w.csv")
    meta = read_keyvalue(directory / "meta.txt") if (directory / "meta.txt").exists() else {}
    return FactorModel(u, w), tickers, words, meta


@contextmanager
def atomic_outputs(directory):
    """Stage files in a temporary sibling directory and move them in on success.

    Yields the staging directory. If the block raises, nothing reaches
    ``directory``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=directory))
    try:
        yield staging
        for item in sorted(staging.iterdir()):
            os.replace(item, directory / item.name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)


@contextmanager
def output_lock(directory):
    """Advisory lock file guarding an output directory against concurrent runs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(f"{directory} is locked by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)
