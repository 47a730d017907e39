"""CSV helpers: ``#`` provenance comments, a header row, repr-exact floats."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Mapping


class CsvFormatError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))
    if hasattr(v, "item"):  # numpy scalar
        return _fmt(v.item())
    return str(v)


def render_csv(header: list, rows: Iterable, comments: Mapping | Iterable[str] | None = None) -> str:
    buf = io.StringIO()
    if comments:
        items = comments.items() if isinstance(comments, Mapping) else ((c, None) for c in comments)
        for key, val in items:
            buf.write(f"# {key}\n" if val is None else f"# {key} = {val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: list, rows: Iterable, comments=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(header, rows, comments))
    return path


def read_numeric_csv(path, expected_cols: int | None = None) -> tuple[list | None, list]:
    """Read a numeric CSV, skipping ``#`` comments and an optional header row.

    Returns ``(header, rows)``.  Raises ``CsvFormatError`` naming the line on
    the first non-numeric cell or inconsistent row length.
    """
    header, rows, width = None, [], None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or not "".join(rec).strip() or rec[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                if header is None and not rows:
                    header = [c.strip() for c in rec]
                    width = len(header)
                    continue
                raise CsvFormatError(f"{path}: line {lineno}: non-numeric value in {rec!r}") from None
            if width is None:
                width = len(vals)
            if len(vals) != width:
                raise CsvFormatError(f"{path}: line {lineno}: expected {width} columns, got {len(vals)}")
            rows.append(vals)
    if expected_cols is not None and width is not None and width != expected_cols:
        raise CsvFormatError(f"{path}: expected {expected_cols} columns, got {width}")
    return header, rows
