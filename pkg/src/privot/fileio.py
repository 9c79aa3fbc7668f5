"""CSV and NDJSON helpers. All files are UTF-8 with LF line endings.

CSV files may start with ``#`` comment lines carrying the resolved run
config as JSON; readers skip them. NDJSON reports start with a
``{"record": "config", ...}`` line followed by one JSON object per row.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _open_w(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n")


def write_csv(path, header, rows, config_echo: dict | None = None) -> None:
    with _open_w(path) as fh:
        if config_echo is not None:
            fh.write("# config: " + json.dumps(config_echo, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def write_points_csv(path, points, config_echo: dict | None = None, prefix: str = "x") -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    write_csv(path, [f"{prefix}{i + 1}" for i in range(pts.shape[1])], pts, config_echo)


def read_csv(path) -> tuple[list, np.ndarray, dict | None]:
    """Header, numeric body and the embedded config (if any)."""
    echo = None
    with open(path, encoding="utf-8") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                if line.startswith("# config: "):
                    echo = json.loads(line[len("# config: "):])
                continue
            lines.append(line)
    rows = list(csv.reader(lines))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header = rows[0]
    body = np.array(rows[1:], dtype=np.float64).reshape(-1, len(header))
    return header, body, echo


def read_points_csv(path) -> np.ndarray:
    header, body, _ = read_csv(path)
    if header != [f"x{i + 1}" for i in range(len(header))]:
        raise ValueError(f"{path}: expected header x1..xd, got {header}")
    return body


def write_ndjson(path, rows, config_echo: dict | None = None) -> None:
    with _open_w(path) as fh:
        if config_echo is not None:
            fh.write(json.dumps({"record": "config", "config": config_echo}, sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def read_ndjson(path) -> tuple[dict | None, list]:
    echo, rows = None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("record") == "config":
                echo = obj["config"]
            else:
                rows.append(obj)
    return echo, rows


def write_json(path, doc: dict) -> None:
    with _open_w(path) as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
