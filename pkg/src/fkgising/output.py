"""Atomic CSV / JSON-lines writers with lossless float formatting."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path


def format_value(v) -> str:
    """Floats at 17 significant digits so CSV round-trips are lossless."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def write_jsonl(path: Path, records) -> None:
    lines = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
    atomic_write_bytes(path, lines.encode("utf-8"))


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]
