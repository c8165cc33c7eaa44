import sys
from typing import Any, Tuple

import numpy as np

from errors import ConfigError
from evans import evans_roots_in_gap, evans_scan
from floquet import GapInterval, classify_energy, discriminant, gap_coordinate, gap_omega, gaps
from gapcount import select_gaps
from potential import PotentialSpec, potential_bounds
from utils_formatting import OutputFormat, format_csv, format_json, print_params_header, records_to_csv


def find_gap(spec: PotentialSpec, cfg: Any, j: int) -> GapInterval:
    selected = select_gaps(spec, j, j, cfg.count_params())
    if not selected:
        raise ConfigError(f"gap G_{j} is closed (double point); nothing to scan")
    return selected[0]


def process_bands(cfg: Any) -> Tuple[bool, str]:
    spec = cfg.load_potential()
    e_min = cfg.e_min if cfg.e_min is not None else potential_bounds(spec.periodic)[0] - 1.0
    if not cfg.e_max > e_min:
        raise ConfigError(f"--emax {cfg.e_max} must exceed the lower end {e_min}")
    rows = []
    for E in np.linspace(e_min, cfg.e_max, cfg.n_samples):
        E = float(E)
        rows.append([E, discriminant(spec, E, cfg.tol), classify_energy(spec, E, cfg.tol)])
    if cfg.output_format == OutputFormat.JSON:
        return True, format_json({"params": cfg.header(), "samples": [dict(zip(("E", "k", "class"), r)) for r in rows]})
    print_params_header(cfg.header())
    return True, format_csv(["E", "k", "classification"], rows)


def process_gaps(cfg: Any) -> Tuple[bool, str]:
    spec = cfg.load_potential()
    found = gaps(spec, cfg.e_max, cfg.scan_step, cfg.edge_tol, cfg.tol)
    for gap in found:
        if gap.finite:
            gap_omega(spec, gap, tol=cfg.tol)
    print(f"📋 {len(found)} nonempty gap(s) below E={cfg.e_max}", file=sys.stderr)
    if cfg.output_format == OutputFormat.CSV:
        print_params_header(cfg.header())
        rows = [[g.index, g.E_lo if g.finite else None, g.E_hi, g.kind_lo, g.kind_hi, g.omega] for g in found]
        return True, format_csv(["j", "E_lo", "E_hi", "kind_lo", "kind_hi", "omega"], rows)
    return True, format_json({"params": cfg.header(), "gaps": [g.to_dict() for g in found]})


def process_evans_scan(cfg: Any) -> Tuple[bool, str]:
    spec = cfg.load_potential()
    gap = find_gap(spec, cfg, cfg.j_lo)
    rows = []
    for E, f, _ in evans_scan(spec, gap, cfg.grid_n, cfg.tol):
        coordinate = gap_coordinate(spec, gap, E, tol=cfg.tol) if gap.finite else None
        rows.append([E, coordinate, f])
    if cfg.output_format == OutputFormat.JSON:
        samples = [dict(zip(("E", "gap_coordinate", "f"), r)) for r in rows]
        return True, format_json({"params": cfg.header(), "gap": gap.to_dict(), "samples": samples})
    print_params_header(cfg.header())
    return True, format_csv(["E", "gap_coordinate", "f"], rows)


def process_roots(cfg: Any) -> Tuple[bool, str]:
    spec = cfg.load_potential()
    params = cfg.count_params()
    records = []
    for gap in select_gaps(spec, cfg.j_lo, cfg.j_hi, params):
        for root in evans_roots_in_gap(spec, gap, cfg.grid_n, cfg.root_tol, cfg.tol):
            records.append({"gap": gap.index, **root.to_dict()})
    if cfg.output_format == OutputFormat.CSV:
        print_params_header(cfg.header())
        return True, records_to_csv(records, ["gap", "E_root", "mu", "fE_sign", "fE", "fE_fd"])
    return True, format_json({"params": cfg.header(), "roots": records})
