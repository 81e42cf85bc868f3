"""Text formats: edge lists, cascade records, matrices and flat ``key = value`` files.

Floats are written with ``repr`` so every file round-trips bit for bit.
"""
import os

import numpy as np

from .errors import ConfigError, DataError
from .model import CascadeSet, ObservedNetwork

CASCADE_HEADER = "cascade_id\tnode_id\ttime"


def _fmt(x):
    return repr(float(x))


def write_edges(path, network, scores=None):
    """One ``src<TAB>dst`` line per link, optionally followed by a score column."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in network.edges():
            if scores is None:
                fh.write(f"{i}\t{j}\n")
            else:
                fh.write(f"{i}\t{j}\t{_fmt(scores[i, j])}\n")


def read_edges(path, n_nodes):
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected 'src<TAB>dst'")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: node ids must be integers") from None
    try:
        return ObservedNetwork.from_edges(n_nodes, edges)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_cascades(path, cascades):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CASCADE_HEADER + "\n")
        for j, i, t in cascades.records():
            fh.write(f"{j}\t{i}\t{_fmt(t)}\n")


def read_cascades(path, n_nodes, n_cascades, window):
    records = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CASCADE_HEADER:
            raise DataError(f"{path}: expected header {CASCADE_HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                records.append((int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed record") from None
    try:
        return CascadeSet.from_records(n_nodes, n_cascades, records, window)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_matrix(path, mat):
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    with open(path, "w", encoding="utf-8") as fh:
        for row in mat:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def read_matrix(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split("\t")])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows:
        raise DataError(f"{path}: empty matrix file")
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: ragged matrix rows")
    return np.array(rows)


def write_labels(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node_id\tcommunity\n")
        for i, c in enumerate(labels):
            fh.write(f"{i}\t{int(c)}\n")


def read_labels(path):
    labels = {}
    with open(path, encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            if line.strip():
                i, c = line.split("\t")
                labels[int(i)] = int(c)
    return np.array([labels[i] for i in range(len(labels))], dtype=np.int64)


def write_rows(path, header, rows):
    """Generic TSV table; floats via repr, everything else via str."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        return header, [line.rstrip("\n").split("\t") for line in fh if line.strip()]


# -- flat key = value files ---------------------------------------------------

def encode_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        # list of pairs -> "i,j;i,j", list of scalars -> "a,b"
        if value and isinstance(value[0], (list, tuple)):
            return ";".join(",".join(str(int(v)) for v in pair) for pair in value)
        return ",".join(str(v) for v in value)
    if value is None:
        return ""
    return str(value)


def write_kv(path, mapping):
    """Keys in insertion order, one ``key = value`` line each."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in mapping.items():
            fh.write(f"{key} = {encode_value(value)}\n")


def read_kv(path):
    """Parse a flat config file into raw strings; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value
    return out


def parse_pairs(text):
    if not text.strip():
        return []
    pairs = []
    for chunk in text.split(";"):
        a, b = chunk.split(",")
        pairs.append((int(a), int(b)))
    return pairs


def parse_int_list(text):
    return [int(v) for v in text.split(",")] if text.strip() else []


def parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc.strerror}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path
