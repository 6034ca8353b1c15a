"""CSV ingestion and JSON result documents.

Input files are comma-delimited UTF-8 with a mandatory header row and '.'
decimal separators.  Column selection accepts names or 0-based indices.
A non-numeric or empty cell in a selected column is an error naming the
file line and column, never a silent drop.

Result documents are plain dictionaries with a schema identifier; floats
pass through ``json`` untouched, which emits the shortest decimal string
that round-trips to the exact binary value.
"""

from __future__ import annotations

import csv
import json
from typing import List, Optional, Sequence, Union

from .errors import ColumnNotFound, ParseError
from .moments import Dataset

__all__ = ["ingest_csv", "read_points_csv", "document", "dump_document", "SCHEMA"]

SCHEMA = "maxagree/v1"


def _resolve_column(header: List[str], selector: Union[str, int]) -> int:
    if isinstance(selector, int) or (isinstance(selector, str) and selector.lstrip("-").isdigit()):
        idx = int(selector)
        if not 0 <= idx < len(header):
            raise ColumnNotFound(f"column index {idx} outside 0..{len(header) - 1}")
        return idx
    matches = [i for i, name in enumerate(header) if name.strip() == selector]
    if not matches:
        # Case-insensitive fallback keeps ergonomic parity with typical headers.
        matches = [i for i, name in enumerate(header) if name.strip().lower() == selector.lower()]
    if not matches:
        raise ColumnNotFound(f"column {selector!r} not in header {header}")
    return matches[0]


def _read_table(path: str) -> tuple[List[str], List[List[str]]]:
    try:
        handle = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"input file not found: {path}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "", "file is empty; header row required") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    return [h.strip() for h in header], rows


def _parse_cell(raw: str, line: int, column: str) -> float:
    text = raw.strip()
    if not text:
        raise ParseError(line, column, f"line {line}, column {column!r}: empty cell")
    try:
        return float(text)
    except ValueError:
        raise ParseError(line, column, f"line {line}, column {column!r}: {raw!r} is not a number") from None


def ingest_csv(
    path: str,
    response: Union[str, int],
    predictors: Sequence[Union[str, int]],
) -> Dataset:
    """Load the selected response and predictor columns into a Dataset."""
    header, rows = _read_table(path)
    y_idx = _resolve_column(header, response)
    x_idx = [_resolve_column(header, p) for p in predictors]
    if y_idx in x_idx:
        raise ColumnNotFound(
            f"response column {header[y_idx]!r} also selected as a predictor"
        )
    xs, ys = [], []
    for offset, row in enumerate(rows):
        line = offset + 2  # header is file line 1
        needed = max([y_idx, *x_idx])
        if len(row) <= needed:
            raise ParseError(line, header[needed], f"line {line}: only {len(row)} fields")
        xs.append([_parse_cell(row[i], line, header[i]) for i in x_idx])
        ys.append(_parse_cell(row[y_idx], line, header[y_idx]))
    names = [header[i] for i in x_idx] + [header[y_idx]]
    return Dataset(xs, ys, column_names=names)


def read_points_csv(path: str, columns: Optional[Sequence[Union[str, int]]] = None):
    """Read prediction points (one per row) from a CSV with header."""
    header, rows = _read_table(path)
    idx = list(range(len(header))) if columns is None else [_resolve_column(header, c) for c in columns]
    pts = []
    for offset, row in enumerate(rows):
        line = offset + 2
        pts.append([_parse_cell(row[i], line, header[i]) for i in idx])
    return pts


def document(command: str, result: dict) -> dict:
    """Wrap a result payload in the versioned document envelope."""
    return {"schema": SCHEMA, "command": command, "result": result}


def _jsonable(value):
    """Strict-JSON representation: non-finite floats become null."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and (value != value or value in (float("inf"), float("-inf"))):
        return None
    return value


def dump_document(doc: dict, out: Optional[str] = None) -> str:
    """Serialize a document deterministically; write to ``out`` if given."""
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
    return text
