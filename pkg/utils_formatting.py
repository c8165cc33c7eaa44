import csv
import io
import json
import math
import sys
from typing import Any, Dict, List, Sequence

import numpy as np
import sympy


class OutputFormat:
    JSON = "json"
    CSV = "csv"
    ALL = (JSON, CSV)


def format_number(value: Any) -> str:
    """Full double precision (17 significant digits); blank for missing values."""
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


def to_plain(value: Any) -> Any:
    """Recursively turn numpy/sympy values into JSON-safe builtins; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return x if math.isfinite(x) else None
    if isinstance(value, sympy.Basic):
        return str(value)
    return value


def format_json(payload: Any) -> str:
    # Python's float repr is the shortest string that reads back to the same double
    return json.dumps(to_plain(payload), indent=2, sort_keys=False, allow_nan=False) + "\n"


def format_csv(columns: Sequence[str], rows: List[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


def records_to_csv(records: List[Dict[str, Any]], columns: Sequence[str] | None = None) -> str:
    if not records:
        return format_csv(columns or [], [])
    columns = list(columns or records[0].keys())
    return format_csv(columns, [[rec.get(col) for col in columns] for rec in records])


def print_params_header(params: Dict[str, Any]) -> None:
    """Effective parameters, one line on stderr (CSV outputs carry no header of their own)."""
    fields = " ".join(f"{k}={format_number(v) if not isinstance(v, str) else v}" for k, v in params.items())
    print(f"📋 params: {fields}", file=sys.stderr)
