"""
Export functions for run artifacts: JSON documents, metric CSVs and
`key=value` console lines.

Floats are written with repr so that identical runs produce byte-identical files.
"""

import csv
import json
import os
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from .logger import get_logger

logger = get_logger(__name__)

CLASSIFICATION_COLUMNS = ["epoch", "loss", "oa", "macc"]


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return value


def _ensure_parent(output_file):
    parent = os.path.dirname(str(output_file))
    if parent:
        os.makedirs(parent, exist_ok=True)


def export_json(results, output_file):
    """
    Export results to JSON file.

    Args:
        results (dict): Document to write
        output_file (str): Output file path
    """
    _ensure_parent(output_file)
    with open(output_file, 'w', encoding='utf-8') as f:
        json.dump(results, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    logger.info("json exported", path=str(output_file))
    return output_file


def export_rows_csv(rows: Sequence[Mapping], output_file, columns: Optional[List[str]] = None):
    """
    Export a list of flat dicts to CSV.

    Args:
        rows: One dict per row
        output_file (str): Output file path
        columns: Column order (defaults to first-seen key order)
    """
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    _ensure_parent(output_file)
    with open(output_file, 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in columns})
    logger.info("csv exported", path=str(output_file), rows=len(rows))
    return output_file


def export_history_csv(history, output_file):
    """Write metrics.csv: epoch,loss,oa,macc plus segmentation IoU columns when present."""
    rows = history.rows()
    columns = list(CLASSIFICATION_COLUMNS)
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    return export_rows_csv(rows, output_file, columns)


def append_csv_row(row: Mapping, output_file):
    """Append one row, writing the header first when the file is new."""
    _ensure_parent(output_file)
    exists = os.path.isfile(output_file) and os.path.getsize(output_file) > 0
    columns = list(row)
    with open(output_file, 'a', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        if not exists:
            writer.writeheader()
        writer.writerow({k: _cell(row[k]) for k in columns})
    return output_file


def format_key_values(values: Mapping) -> str:
    """`key=value` lines; nested dicts and lists are flattened with dotted / indexed keys."""
    lines = []

    def walk(prefix, value):
        if isinstance(value, Mapping):
            for k, v in value.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        elif isinstance(value, (list, tuple)):
            for i, v in enumerate(value):
                walk(f"{prefix}.{i}", v)
        else:
            lines.append(f"{prefix}={_cell(value)}")

    walk("", values)
    return "\n".join(lines)
