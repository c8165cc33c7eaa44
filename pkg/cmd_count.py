import dataclasses
import sys
from pathlib import Path
from typing import Any, List, Tuple

from gapcount import CountReport, count_range
from utils_formatting import OutputFormat, format_csv, format_json, print_params_header

SUMMARY_COLUMNS = ["j", "E_lo", "E_hi", "n_G", "n_boundary", "lower", "upper", "evans", "oracle", "certified"]
VERIFY_COLUMNS = ["j", "E_lo", "E_hi", "evans", "oracle", "agree"]


def summary_rows(reports: List[CountReport]) -> List[List[Any]]:
    return [
        [
            r.gap.index,
            r.gap.E_lo if r.gap.finite else None,
            r.gap.E_hi,
            r.n_G,
            r.n_boundary,
            r.lower_bound,
            r.upper_bound,
            r.evans_count,
            r.oracle_count,
            r.exact_certified,
        ]
        for r in reports
    ]


def _summary_path(output: str) -> Path:
    path = Path(output)
    return path.with_name(path.stem + ".summary.csv")


def process(cfg: Any) -> Tuple[bool, str]:
    spec = cfg.load_potential()
    reports = count_range(spec, cfg.j_lo, cfg.j_hi, cfg.count_params())
    success = all(r.ok for r in reports)
    summary = format_csv(SUMMARY_COLUMNS, summary_rows(reports))
    if cfg.output_format == OutputFormat.CSV:
        print_params_header(cfg.header())
        return success, summary
    if cfg.output:
        path = _summary_path(cfg.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(summary)
        print(f"📋 Summary written to {path}", file=sys.stderr)
    return success, format_json({"params": cfg.header(), "reports": [r.to_dict() for r in reports]})


def process_oracle_verify(cfg: Any) -> Tuple[bool, str]:
    """Every gap in range counted twice: Evans roots and the two-box Dirichlet oracle."""
    spec = cfg.load_potential()
    params = dataclasses.replace(cfg.count_params(), run_oracle=True)
    reports = count_range(spec, cfg.j_lo, cfg.j_hi, params)
    rows = []
    for r in reports:
        agree = None if r.oracle_count is None else r.oracle_count == r.evans_count
        rows.append([r.gap.index, r.gap.E_lo if r.gap.finite else None, r.gap.E_hi, r.evans_count, r.oracle_count, agree])
        if agree is None:
            print(f"⚠️ G_{r.gap.index}: oracle indeterminate", file=sys.stderr)
    success = all(r.ok for r in reports)
    if cfg.output_format == OutputFormat.CSV:
        print_params_header(cfg.header())
        return success, format_csv(VERIFY_COLUMNS, rows)
    return success, format_json({"params": cfg.header(), "comparison": [dict(zip(VERIFY_COLUMNS, row)) for row in rows]})
