"""
File formats.

Every text file starts with ``# key=value`` header lines whose values are
JSON literals, so metadata survives a write/read cycle unchanged.

timestamp stream   records ``A,123456`` (channel, integer picoseconds)
histogram CSV      ``delay_ns,counts,g2,g2_err`` at bin centres
curve CSV          named float columns (saturation, decay, spectrum, models)
config             flat ``key = value`` lines, ``#`` comments
"""

from __future__ import annotations

import json
import os
from pathlib import Path
import tempfile

import numpy as np

from photonstat.correlator import CoincidenceHistogram
from photonstat.montecarlo import PhotonStream

__all__ = [
    "DataFormatError",
    "atomic_write",
    "write_stream",
    "read_stream",
    "write_histogram",
    "read_histogram",
    "write_columns",
    "read_columns",
    "read_config",
    "write_config",
]

_CHANNEL_NAMES = np.array(["A", "B"])


class DataFormatError(ValueError):
    pass


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(meta):
    return "".join(f"# {k}={json.dumps(v)}\n" for k, v in meta.items())


def _split_header(text):
    meta, body_start = {}, 0
    for line in text.splitlines(keepends=True):
        if not line.startswith("#"):
            break
        body_start += len(line)
        entry = line[1:].strip()
        if "=" not in entry:
            continue
        key, value = entry.split("=", 1)
        try:
            meta[key.strip()] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"bad header value for {key!r}: {value!r}") from exc
    return meta, text[body_start:]


def _to_json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


# --- timestamp streams -------------------------------------------------------------

def format_stream(stream):
    meta = {"format": "photonstat-stream-1", "duration_s": stream.duration}
    meta.update({k: _to_json_value(v) for k, v in stream.metadata.items()})
    names = _CHANNEL_NAMES[stream.channels]
    body = "\n".join(f"{c},{t}" for c, t in zip(names.tolist(), stream.timestamps_ps.tolist()))
    return _header(meta) + body + ("\n" if len(stream) else "")


def write_stream(path, stream):
    atomic_write(path, format_stream(stream))


def read_stream(path):
    text = Path(path).read_text(encoding="utf-8")
    meta, body = _split_header(text)
    if meta.pop("format", None) != "photonstat-stream-1":
        raise DataFormatError(f"{path}: not a photonstat timestamp stream")
    try:
        duration = float(meta.pop("duration_s"))
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing duration_s header") from exc
    body = body.strip()
    if not body:
        return PhotonStream(np.empty(0, np.int64), np.empty(0, np.uint8), duration, meta)
    lines = body.split("\n")
    channels = np.array([ln[:1] for ln in lines])
    if not np.all(np.isin(channels, _CHANNEL_NAMES)) or any(ln[1:2] != "," for ln in lines):
        raise DataFormatError(f"{path}: records must look like 'A,123' or 'B,123'")
    try:
        ts = np.array([int(ln[2:]) for ln in lines], dtype=np.int64)
    except ValueError as exc:
        raise DataFormatError(f"{path}: timestamps must be integer picoseconds") from exc
    if np.any(np.diff(ts) < 0):
        raise DataFormatError(f"{path}: timestamps must be ascending")
    return PhotonStream(ts, (channels == "B").astype(np.uint8), duration, meta)


# --- histograms --------------------------------------------------------------------

def format_histogram(hist):
    meta = {
        "format": "photonstat-histogram-1",
        "bin_width_ns": hist.bin_width * 1e9,
        # exact SI values for parsing; ns values are for reading
        "bin_width_s": hist.bin_width,
        "delay_min_s": hist.delay_min,
        "n_starts": int(hist.n_starts),
        "n_stops": int(hist.n_stops),
        "total_time_s": hist.total_time,
    }
    meta.update({k: _to_json_value(v) for k, v in hist.metadata.items()})
    rows = ["delay_ns,counts,g2,g2_err"]
    centers = hist.centers * 1e9
    for i, (d, c) in enumerate(zip(centers.tolist(), hist.counts.tolist())):
        if hist.g2 is None:
            rows.append(f"{d!r},{c},,")
        else:
            rows.append(f"{d!r},{c},{float(hist.g2[i])!r},{float(hist.g2_err[i])!r}")
    return _header(meta) + "\n".join(rows) + "\n"


def write_histogram(path, hist):
    atomic_write(path, format_histogram(hist))


def read_histogram(path):
    meta, body = _split_header(Path(path).read_text(encoding="utf-8"))
    if meta.pop("format", None) != "photonstat-histogram-1":
        raise DataFormatError(f"{path}: not a photonstat histogram")
    lines = body.strip().split("\n")
    if not lines or lines[0].strip() != "delay_ns,counts,g2,g2_err":
        raise DataFormatError(f"{path}: missing column header")
    counts, g2, err = [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise DataFormatError(f"{path}: bad row {ln!r}")
        counts.append(int(parts[1]))
        if parts[2]:
            g2.append(float(parts[2]))
            err.append(float(parts[3]))
    if not counts:
        raise DataFormatError(f"{path}: histogram has no bins")
    normalized = len(g2) == len(counts)
    meta.pop("bin_width_ns", None)
    try:
        return CoincidenceHistogram(
            bin_width=meta.pop("bin_width_s"),
            delay_min=meta.pop("delay_min_s"),
            counts=np.array(counts, dtype=np.int64),
            n_starts=meta.pop("n_starts"),
            n_stops=meta.pop("n_stops"),
            total_time=meta.pop("total_time_s"),
            g2=np.array(g2) if normalized else None,
            g2_err=np.array(err) if normalized else None,
            metadata=meta,
        )
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing header {exc}") from exc


# --- generic column files ------------------------------------------------------------

def format_columns(columns, metadata=None):
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    rows = [",".join(names)]
    rows += [",".join(repr(float(v)) for v in row) for row in zip(*arrays)]
    return _header(metadata or {}) + "\n".join(rows) + "\n"


def write_columns(path, columns, metadata=None):
    atomic_write(path, format_columns(columns, metadata))


def read_columns(path, required=(), optional=()):
    """Read a CSV of float columns; returns (dict of arrays, metadata)."""
    meta, body = _split_header(Path(path).read_text(encoding="utf-8"))
    lines = [ln for ln in body.strip().split("\n") if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: no data")
    names = [n.strip() for n in lines[0].split(",")]
    missing = [n for n in required if n not in names]
    if missing:
        raise DataFormatError(f"{path}: missing columns {missing}")
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-numeric value") from exc
    if data.size == 0:
        raise DataFormatError(f"{path}: no data rows")
    if data.ndim != 2 or data.shape[1] != len(names):
        raise DataFormatError(f"{path}: ragged rows")
    cols = {n: data[:, i] for i, n in enumerate(names) if n in required or n in optional}
    return cols, meta


# --- config ------------------------------------------------------------------------

def read_config(path):
    """Parse a flat ``key = value`` file into a dict of strings."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise DataFormatError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def write_config(path, values):
    atomic_write(path, "".join(f"{k} = {v}\n" for k, v in values.items()))
