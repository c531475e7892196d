"""Strict CSV reading with line numbers, and deterministic writing."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from pathlib import Path

from .errors import DataValidationError


def fmt(x) -> str:
    """Shortest round-trip text for numbers; integral floats lose the ``.0``."""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return ""
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_rows(path, columns: Sequence[str], remap: Mapping[str, str] | None = None) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, {canonical_column: text})`` for each data row.

    ``remap`` maps canonical names to the headers actually used in the file.
    """
    path = Path(path)
    remap = dict(remap or {})
    if not path.exists():
        raise DataValidationError("file not found", path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError("empty file, expected a header row", path, 1) from None
        header = [h.strip() for h in header]
        pos = {}
        for col in columns:
            name = remap.get(col, col)
            if name not in header:
                raise DataValidationError(f"missing column {name!r} (header: {header})", path, 1)
            pos[col] = header.index(name)
        width = len(header)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise DataValidationError(f"expected {width} fields, got {len(row)}", path, line)
            yield line, {col: row[i].strip() for col, i in pos.items()}


def parse_float(text: str, what: str, path, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataValidationError(f"{what} {text!r} is not a number", path, line) from None
    if not math.isfinite(v):
        raise DataValidationError(f"{what} {text!r} is not finite", path, line)
    return v


def parse_int(text: str, what: str, path, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        try:
            v = float(text)
        except ValueError:
            v = math.nan
        if math.isfinite(v) and v.is_integer():
            return int(v)
        raise DataValidationError(f"{what} {text!r} is not an integer", path, line) from None


def parse_bool(text: str, what: str, path, line: int) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "t", "yes", "y"):
        return True
    if t in ("0", "false", "f", "no", "n", ""):
        return False
    raise DataValidationError(f"{what} {text!r} is not a boolean", path, line)
