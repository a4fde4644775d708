"""CSV tables; floats are written with ``repr`` so they read back exactly."""

import csv
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def write_csv(
    path: str | Path,
    columns: Sequence[str],
    rows: Sequence[Mapping[str, Any]],
) -> Path:
    """Write ``rows`` under a header of ``columns``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row[column]) for column in columns])
    return path


def read_csv(path: str | Path) -> List[Dict[str, str]]:
    """Rows of a CSV written by ``write_csv``, keyed by column."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
