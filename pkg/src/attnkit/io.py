"""File formats and atomic output for the command-line front end.

All writers go through an atomic temp-file-plus-rename so a crashed run
never leaves a half-written artifact.  CSV numbers are formatted to 6
significant digits with missing values as empty fields; JSON keeps full
float precision with sorted keys, so equal inputs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import struct
import tempfile

import numpy as np

from .features import FeatureVector
from .gaze import Blink, Fixation, Saccade
from .physio import PhysioSeries
from .sequences import ProbeSequence
from .validation import IngestError, SchemaError

__all__ = [
    "atomic_write_text",
    "atomic_write_bytes",
    "sha256_file",
    "format_cell",
    "parse_cell",
    "write_csv",
    "read_csv",
    "write_json",
    "write_pgm16",
    "write_matrix_csv",
    "EVENT_CSV_COLUMNS",
    "write_events_csv",
    "read_events_csv",
    "read_probes_csv",
    "read_labels_csv",
    "write_features_csv",
    "read_features_csv",
    "write_synchrony_csv",
    "read_sequences_csv",
    "write_assignments_csv",
    "write_diagnostics_csv",
    "write_importance_csv",
    "write_sweep_csv",
    "read_physio_csv",
    "write_raise_events_csv",
    "write_counts_csv",
    "read_counts_csv",
    "write_manifest",
]


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    _atomic_write(path, text.encode("utf-8"))


def atomic_write_bytes(path: str, data: bytes) -> None:
    _atomic_write(path, data)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def format_cell(value) -> str:
    """One CSV cell: 6 significant digits for floats, empty for missing."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            return ""
        return format(float(value), ".6g")
    return str(value)


def parse_cell(text: str):
    """Inverse-ish of format_cell: empty -> None, else float."""
    text = text.strip()
    if text == "":
        return None
    return float(text)


def write_csv(path: str, header, rows) -> None:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([format_cell(cell) for cell in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path: str, required=None):
    """Read a headered CSV; returns (header, rows of str lists)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            rows.append(row)
    if required:
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing required column(s): " + ", ".join(missing))
    return header, rows


def write_json(path: str, payload) -> None:
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_pgm16(path: str, matrix) -> None:
    """16-bit binary PGM (P5): the maximum cell maps to 65535."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if not np.isfinite(matrix).all() or (matrix < 0).any():
        raise ValueError("matrix must be finite and non-negative")
    peak = matrix.max()
    if peak > 0:
        scaled = np.round(matrix / peak * 65535.0).astype(np.uint16)
    else:
        scaled = np.zeros(matrix.shape, dtype=np.uint16)
    rows, cols = matrix.shape
    header = f"P5\n{cols} {rows}\n65535\n".encode("ascii")
    body = struct.pack(f">{scaled.size}H", *scaled.ravel().tolist())
    atomic_write_bytes(path, header + body)


def write_matrix_csv(path: str, matrix) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-D")
    header = [f"c{j}" for j in range(matrix.shape[1])]
    write_csv(path, header, matrix.tolist())


# ---------------------------------------------------------------------------
# gaze events
# ---------------------------------------------------------------------------

EVENT_CSV_COLUMNS = (
    "kind", "start_us", "end_us",
    "centroid_x", "centroid_y", "dispersion_x", "dispersion_y", "mean_pupil_mm",
    "length_px", "direction_px", "amplitude_deg", "avg_velocity_deg_s",
    "peak_velocity_deg_s", "avg_accel_deg_s2", "peak_accel_deg_s2",
    "peak_decel_deg_s2", "overlong",
)


def write_events_csv(path: str, events) -> None:
    """Events as rows with one fixed column per attribute; blanks where N/A."""
    rows = []
    for ev in events:
        cells = {c: None for c in EVENT_CSV_COLUMNS}
        cells["kind"] = ev.kind
        cells["start_us"] = ev.start_us
        cells["end_us"] = ev.end_us
        if ev.kind == "fixation":
            cells["centroid_x"], cells["centroid_y"] = ev.centroid
            cells["dispersion_x"], cells["dispersion_y"] = ev.dispersion
            cells["mean_pupil_mm"] = ev.mean_pupil_mm
        elif ev.kind == "saccade":
            cells["length_px"] = ev.length_px
            cells["direction_px"] = ev.direction_px
            cells["amplitude_deg"] = ev.amplitude_deg
            cells["avg_velocity_deg_s"] = ev.avg_velocity_deg_s
            cells["peak_velocity_deg_s"] = ev.peak_velocity_deg_s
            cells["avg_accel_deg_s2"] = ev.avg_accel_deg_s2
            cells["peak_accel_deg_s2"] = ev.peak_accel_deg_s2
            cells["peak_decel_deg_s2"] = ev.peak_decel_deg_s2
        elif ev.kind == "blink":
            cells["overlong"] = ev.overlong
        else:
            raise ValueError(f"unknown event kind {ev.kind!r}")
        rows.append([cells[c] for c in EVENT_CSV_COLUMNS])
    write_csv(path, EVENT_CSV_COLUMNS, rows)


def read_events_csv(path: str):
    header, rows = read_csv(path, required=EVENT_CSV_COLUMNS[:3])
    idx = {c: header.index(c) for c in header}

    def get(row, col):
        return parse_cell(row[idx[col]]) if col in idx else None

    events = []
    for row in rows:
        kind = row[idx["kind"]]
        start_us = int(float(row[idx["start_us"]]))
        end_us = int(float(row[idx["end_us"]]))
        if kind == "fixation":
            events.append(Fixation(
                start_us=start_us, end_us=end_us,
                centroid=(get(row, "centroid_x"), get(row, "centroid_y")),
                dispersion=(get(row, "dispersion_x"), get(row, "dispersion_y")),
                mean_pupil_mm=get(row, "mean_pupil_mm")))
        elif kind == "saccade":
            events.append(Saccade(
                start_us=start_us, end_us=end_us,
                length_px=get(row, "length_px"),
                direction_px=get(row, "direction_px"),
                amplitude_deg=get(row, "amplitude_deg"),
                avg_velocity_deg_s=get(row, "avg_velocity_deg_s"),
                peak_velocity_deg_s=get(row, "peak_velocity_deg_s"),
                avg_accel_deg_s2=get(row, "avg_accel_deg_s2"),
                peak_accel_deg_s2=get(row, "peak_accel_deg_s2"),
                peak_decel_deg_s2=get(row, "peak_decel_deg_s2")))
        elif kind == "blink":
            overlong = get(row, "overlong")
            duration_ms = (end_us - start_us) / 1000.0
            # reconstruct a compatible flag threshold from the stored bit
            overlong_ms = duration_ms - 1.0 if overlong else max(500.0, duration_ms)
            events.append(Blink(start_us=start_us, end_us=end_us,
                                overlong_ms=overlong_ms))
        else:
            raise IngestError(f"{path}: unknown event kind {kind!r}")
    return events


# ---------------------------------------------------------------------------
# probes, labels, features
# ---------------------------------------------------------------------------

def read_probes_csv(path: str):
    """Rows of (person_id, probe_id, t_us)."""
    header, rows = read_csv(path, required=("person_id", "probe_id", "t_us"))
    idx = {c: header.index(c) for c in header}
    return [(row[idx["person_id"]], row[idx["probe_id"]],
             int(float(row[idx["t_us"]]))) for row in rows]


def read_labels_csv(path: str) -> dict:
    """Mapping (person_id, probe_id) -> integer label."""
    header, rows = read_csv(path, required=("person_id", "probe_id", "label"))
    idx = {c: header.index(c) for c in header}
    labels = {}
    for row in rows:
        key = (row[idx["person_id"]], row[idx["probe_id"]])
        if key in labels:
            raise IngestError(f"{path}: duplicate label for {key}")
        labels[key] = int(float(row[idx["label"]]))
    return labels


def write_features_csv(path: str, feature_vectors) -> None:
    """One row per (person_id, probe_id); columns are the sorted name union."""
    fvs = list(feature_vectors)
    names = sorted({n for fv in fvs for n in fv.values})
    header = ["person_id", "probe_id"] + names
    rows = [[fv.person_id, fv.probe_id] + [fv.values.get(n) for n in names]
            for fv in fvs]
    write_csv(path, header, rows)


def read_features_csv(path: str):
    header, rows = read_csv(path, required=("person_id", "probe_id"))
    name_cols = [(j, c) for j, c in enumerate(header)
                 if c not in ("person_id", "probe_id")]
    pid = header.index("person_id")
    qid = header.index("probe_id")
    return [FeatureVector(person_id=row[pid], probe_id=row[qid],
                          values={c: parse_cell(row[j]) for j, c in name_cols})
            for row in rows]


# ---------------------------------------------------------------------------
# synchrony, sequences, clustering
# ---------------------------------------------------------------------------

def write_synchrony_csv(path: str, scores) -> None:
    header = ("person_id", "probe_id", "measure", "raw", "z", "n_peers", "label")
    rows = [[s.person_id, s.probe_id, s.measure, s.raw, s.z, s.n_peers,
             s.peer_group] for s in scores]
    write_csv(path, header, rows)


def read_sequences_csv(path: str):
    """Rows person_id,s1..sL into ProbeSequence objects with a shared alphabet."""
    header, rows = read_csv(path, required=("person_id",))
    if header[0] != "person_id" or len(header) < 2:
        raise SchemaError(f"{path}: expected header person_id,s1..sL")
    states = [tuple(row[1:]) for row in rows]
    alphabet = tuple(sorted({s for seq in states for s in seq}))
    return [ProbeSequence(person_id=row[0], states=seq, alphabet=alphabet)
            for row, seq in zip(rows, states)]


def write_assignments_csv(path: str, person_ids, assignments) -> None:
    write_csv(path, ("person_id", "cluster"),
              [[p, int(c)] for p, c in zip(person_ids, assignments)])


def write_diagnostics_csv(path: str, diagnostics) -> None:
    header = ("k", "asw", "huberts_c", "point_biserial")
    rows = [[d.k, d.average_silhouette_width, d.huberts_c, d.point_biserial]
            for d in diagnostics]
    write_csv(path, header, rows)


def write_importance_csv(path: str, names, importances) -> None:
    """Features ranked by descending importance (ties by input order)."""
    order = np.lexsort((np.arange(len(names)), -np.asarray(importances, dtype=float)))
    rows = [[names[i], float(importances[i])] for i in order]
    write_csv(path, ("feature", "importance"), rows)


def write_sweep_csv(path: str, sweep) -> None:
    header = ("threshold", "precision", "recall", "f1", "macro_f1", "best")
    rows = []
    for report in sweep.reports:
        pos = report.per_class[1]
        rows.append([report.threshold, pos["precision"], pos["recall"],
                     pos["f1"], report.macro_f1,
                     int(report.threshold == sweep.best_threshold)])
    write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# physiology
# ---------------------------------------------------------------------------

def read_physio_csv(path: str) -> dict:
    """Mapping (person_id, channel) -> (t_us array, values array), time-sorted."""
    header, rows = read_csv(path, required=("person_id", "channel", "t_us", "value"))
    idx = {c: header.index(c) for c in header}
    series: dict = {}
    for row in rows:
        key = (row[idx["person_id"]], row[idx["channel"]])
        series.setdefault(key, []).append(
            (int(float(row[idx["t_us"]])), float(row[idx["value"]])))
    out = {}
    for key, pairs in series.items():
        pairs.sort()
        t = np.array([p[0] for p in pairs], dtype=np.int64)
        v = np.array([p[1] for p in pairs], dtype=np.float64)
        out[key] = (t, v)
    return out


def physio_series_from_samples(person_id: str, channel: str, t_us: np.ndarray,
                               values: np.ndarray) -> PhysioSeries:
    """Build a uniformly-sampled series, inferring the rate from timestamps."""
    rate = None
    if len(t_us) >= 2:
        dt = float(np.median(np.diff(t_us)))
        if dt > 0:
            rate = 1e6 / dt
    return PhysioSeries(person_id=person_id, channel=channel,
                        values=np.asarray(values, dtype=np.float64),
                        rate_hz=rate, t0_us=int(t_us[0]) if len(t_us) else 0)


# ---------------------------------------------------------------------------
# hand raises
# ---------------------------------------------------------------------------

def write_raise_events_csv(path: str, events_by_student) -> None:
    """events_by_student: mapping student_id -> iterable of RaiseEvent."""
    header = ("student_id", "start_s", "end_s", "mean_probability")
    rows = []
    for student_id in sorted(events_by_student):
        for ev in events_by_student[student_id]:
            rows.append([student_id, ev.start_s, ev.end_s, ev.mean_probability])
    write_csv(path, header, rows)


def write_counts_csv(path: str, counts: dict) -> None:
    write_csv(path, ("student_id", "count"),
              [[k, int(counts[k])] for k in sorted(counts)])


def read_counts_csv(path: str) -> dict:
    header, rows = read_csv(path, required=("student_id", "count"))
    idx = {c: header.index(c) for c in header}
    counts = {}
    for row in rows:
        key = row[idx["student_id"]]
        if key in counts:
            raise IngestError(f"{path}: duplicate student_id {key!r}")
        counts[key] = int(float(row[idx["count"]]))
    return counts


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def write_manifest(path: str, command: str, config: dict, inputs: dict,
                   outputs, version: str) -> None:
    """Run record: resolved config, seed, input digests, outputs, version.

    Deliberately timestamp-free so identical runs produce identical bytes.
    """
    payload = {
        "command": command,
        "config": config,
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items())},
        "outputs": sorted(str(p) for p in outputs),
        "version": version,
    }
    write_json(path, payload)
