"""
Plain-text writers.

CSV and plot-data floats are printed with 17 significant digits. JSON floats
use the shortest repr that reads back to the same double, so both formats
round-trip exactly.
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(value)


class ReportEncoder(json.JSONEncoder):
    """numpy scalars and arrays, complex numbers; non-finite floats become null."""

    def default(self, o):
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, complex):
            return {"re": _finite(o.real), "im": _finite(o.imag)}
        return super().default(o)

    def iterencode(self, o, _one_shot=False):
        return super().iterencode(_scrub(o), _one_shot)


def _finite(x: float):
    return x if math.isfinite(x) else None


def _scrub(value: Any) -> Any:
    # JSON has no inf/nan literals
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, dict):
        return {k: _scrub(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_scrub(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return _finite(float(value))
    return value


def dumps_json(obj: Any, indent: int = 2) -> str:
    return json.dumps(obj, cls=ReportEncoder, indent=indent, allow_nan=False) + "\n"


def write_json(path: PathLike, obj: Any) -> None:
    Path(path).write_text(dumps_json(obj))
    logger.info(f"Wrote {path}")


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    count = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return count


def write_plot_data(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Whitespace-separated columns with a '#' header line, readable by gnuplot."""
    with open(path, "w", newline="") as f:
        f.write("# " + " ".join(header) + "\n")
        writer = csv.writer(f, delimiter=" ", lineterminator="\n")
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    logger.info(f"Wrote {path}")
