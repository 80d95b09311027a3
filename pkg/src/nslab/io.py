"""CSV tables and binary field snapshots."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def write_csv(path, columns, rows) -> None:
    """Fixed column order; floats as %.17g, integers and strings verbatim."""
    def fmt(x):
        if isinstance(x, (bool, np.bool_)):
            return "1" if x else "0"
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            return "%.17g" % x
        return str(x)

    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
            fh.write(",".join(fmt(x) for x in row) + "\n")


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns by name; numeric columns as float arrays, others as strings."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    columns, body = rows[0], rows[1:]
    out = {}
    for k, name in enumerate(columns):
        values = [r[k] for r in body]
        try:
            out[name] = np.array([float(v) for v in values])
        except ValueError:
            out[name] = np.array(values)
    return out


def write_snapshot(path, amplitude: np.ndarray, **header) -> None:
    """One JSON header line, then little-endian float64 (re, im) pairs in C order."""
    amp = np.ascontiguousarray(amplitude, dtype=np.complex128)
    head = {"shape": list(amp.shape), "dtype": "<f8", "layout": "re,im", "order": "C"}
    head.update(header)
    pairs = np.empty(amp.shape + (2,), dtype="<f8")
    pairs[..., 0] = amp.real
    pairs[..., 1] = amp.imag
    with open(path, "wb") as fh:
        fh.write((json.dumps(head, sort_keys=True) + "\n").encode())
        fh.write(pairs.tobytes(order="C"))


def read_snapshot(path) -> tuple[dict, np.ndarray]:
    raw = Path(path).read_bytes()
    cut = raw.index(b"\n")
    head = json.loads(raw[:cut])
    pairs = np.frombuffer(raw[cut + 1:], dtype="<f8").reshape(tuple(head["shape"]) + (2,))
    return head, pairs[..., 0] + 1j * pairs[..., 1]
