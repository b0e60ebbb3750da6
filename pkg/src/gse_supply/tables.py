"""Small CSV helpers shared by the loaders and writers.

All files are UTF-8 with a header row; writers use RFC-4180 quoting with
``\\n`` line endings so reruns are byte-identical across platforms.
"""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InputError


def read_rows(path: str | Path, required: Sequence[str]) -> list[dict[str, str]]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = [f.strip() for f in (reader.fieldnames or [])]
            missing = [c for c in required if c not in fields]
            if missing:
                raise InputError(f"{path}: missing columns {missing}")
            return [{k.strip(): (v or "").strip() for k, v in row.items()} for row in reader]
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None


def parse_float(value: str, where: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise InputError(f"{where}: not a number: {value!r}") from None


def render_csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(header, rows), encoding="utf-8", newline="")
    return path


def fmt(value: float, places: int) -> str:
    out = f"{value:.{places}f}"
    # avoid "-0.000"
    if out.lstrip("-").strip("0.") == "":
        out = out.lstrip("-")
    return out


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
