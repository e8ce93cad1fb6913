"""CSV/JSON input and output.

Input traces arrive as UTF-8 CSV with header ``user,timestamp,lat,lon``.
Timestamps are ISO-8601 (assumed UTC when naive) or integer epoch values,
read as seconds below 1e11 and as milliseconds above. All writes go to a
temporary file first and are renamed into place, so failed runs never
leave partial output behind.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from .errors import DatasetLoadError
from .geo import Dataset, GeoPoint, Record, Trace

CSV_HEADER = ["user", "timestamp", "lat", "lon"]


def parse_timestamp_ms(text: str) -> int:
    """Epoch milliseconds from ISO-8601 or integer epoch seconds/millis."""
    text = text.strip()
    try:
        value = int(text)
    except ValueError:
        pass
    else:
        return value * 1000 if abs(value) < 10**11 else value
    iso = text.replace("Z", "+00:00") if text.endswith("Z") else text
    dt = datetime.fromisoformat(iso)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(round(dt.timestamp() * 1000))


def load_dataset(path) -> Dataset:
    """Read a trace CSV into one chronologically sorted trace per user."""
    path = Path(path)
    problems = []
    grouped: dict = {}
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != CSV_HEADER:
            raise DatasetLoadError(
                f"{path}: expected header {','.join(CSV_HEADER)!r}, got {header!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                problems.append((line_no, f"expected 4 fields, got {len(row)}"))
                continue
            user = row[0].strip()
            try:
                if not user:
                    raise ValueError("empty user id")
                time_ms = parse_timestamp_ms(row[1])
                point = GeoPoint(float(row[2]), float(row[3]))
            except ValueError as exc:
                problems.append((line_no, str(exc)))
                continue
            grouped.setdefault(user, []).append(Record(user, point, time_ms))
    if problems:
        raise DatasetLoadError(f"{path}: {len(problems)} malformed row(s)", problems)
    traces = tuple(
        Trace(user, tuple(sorted(records, key=lambda r: r.time_ms)))
        for user, records in sorted(grouped.items())
    )
    return Dataset(traces)


def _atomic_write(path: Path, write_fn):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_dataset_csv(dataset: Dataset, path) -> Path:
    """Write traces with epoch-millisecond timestamps; returns the path."""
    path = Path(path)

    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for trace in dataset:
            for r in trace:
                writer.writerow([r.user, r.time_ms, repr(r.point.lat), repr(r.point.lon)])

    _atomic_write(path, write)
    return path


def write_json(payload: dict, path) -> Path:
    path = Path(path)
    _atomic_write(path, lambda fh: json.dump(payload, fh, indent=2, sort_keys=True))
    return path


def write_rows_csv(rows, path) -> Path:
    """Report rows with one line per protected unit."""
    path = Path(path)

    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(["user", "day", "param_name", "param_value",
                         "pois", "distortion_m", "coverage", "cost"])
        for row in rows:
            names, values = row.config.as_row()
            writer.writerow([
                row.user,
                row.day.isoformat() if row.day is not None else "",
                names, values,
                repr(row.metrics["pois"]), repr(row.metrics["distortion"]),
                repr(row.metrics["coverage"]), repr(row.cost),
            ])

    _atomic_write(path, write)
    return path
