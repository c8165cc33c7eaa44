import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import config
import oracle
from errors import GapCountError
from evans import EvansRoot, evans_roots_in_gap, evans_scan, semi_infinite_window
from floquet import GapInterval, RdefComponents, band_edges, gaps, rdef_components
from potential import PotentialSpec, defect_is_constant, max_abs_potential, max_defect

# Relative mismatch tolerated between the analytic and central-difference f_E
FD_RTOL = 1e-4


@dataclass(frozen=True)
class CountParams:
    scan_step: float = config.SCAN_STEP
    edge_tol: float = config.EDGE_TOL
    boundary_tol: float = 1e-6
    grid_n: int = config.ROOT_GRID_N
    root_tol: float = config.ROOT_TOL
    tol: float = config.TOL
    run_oracle: bool = False
    oracle_n_grid: int = config.BOX_N_GRID
    diagnostic_dir: str = config.DIAGNOSTIC_DIR

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class CountReport:
    """Eigenvalue count for one gap with the bounds n_G + 1 - n_boundary <= D <= n_G + 1."""

    gap: GapInterval
    n_G: int
    n_boundary: int
    lower_bound: int
    upper_bound: int
    evans_count: int
    oracle_count: int | None
    exact_certified: bool
    classically_allowed: bool
    roots: List[EvansRoot] = field(default_factory=list)
    rdef: List[List[float]] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)

    @property
    def bounds_verified(self) -> bool:
        return self.classically_allowed

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gap": self.gap.to_dict(),
            "n_G": self.n_G,
            "n_boundary": self.n_boundary,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "bounds_verified": self.bounds_verified,
            "evans_count": self.evans_count,
            "oracle_count": self.oracle_count,
            "exact_certified": self.exact_certified,
            "classically_allowed": self.classically_allowed,
            "roots": [r.to_dict() for r in self.roots],
            "rdef": self.rdef,
            "diagnostics": self.diagnostics,
        }


def _rdef_near_gap(spec: PotentialSpec, gap: GapInterval, params: CountParams) -> RdefComponents:
    pad = 10 * params.boundary_tol
    lo = gap.E_lo if gap.finite else gap.E_hi - semi_infinite_window(spec)
    return rdef_components(spec, lo - pad, gap.E_hi + pad, params.scan_step, params.edge_tol, params.tol)


def _dump_diagnostic(spec: PotentialSpec, report: CountReport, params: CountParams) -> Path:
    out_dir = Path(params.diagnostic_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scan = [[E, f] for E, f, _ in evans_scan(spec, report.gap, params.grid_n, params.tol)]
    path = out_dir / f"gap_{report.gap.index}_diagnostic.json"
    path.write_text(json.dumps({"report": report.to_dict(), "evans_scan": scan}, indent=2))
    return path


def count_gap(spec: PotentialSpec, gap: GapInterval, params: CountParams | None = None) -> CountReport:
    """Count defect eigenvalues in one gap and check them against the R_def bounds."""
    params = params or CountParams()
    rdef = _rdef_near_gap(spec, gap, params)
    lo = gap.E_lo if gap.finite else gap.E_hi - semi_infinite_window(spec)
    inside = rdef.meeting_open(lo, gap.E_hi, params.boundary_tol)
    n_G = len(inside)
    edges = (gap.E_lo, gap.E_hi) if gap.finite else (gap.E_hi,)
    n_boundary = sum(1 for E in edges if rdef.contains(E, params.boundary_tol))
    classically_allowed = gap.finite and gap.E_lo > max_defect(spec)

    roots = evans_roots_in_gap(spec, gap, params.grid_n, params.root_tol, params.tol)
    lower, upper = n_G + 1 - n_boundary, n_G + 1
    report = CountReport(
        gap=gap,
        n_G=n_G,
        n_boundary=n_boundary,
        lower_bound=lower,
        upper_bound=upper,
        evans_count=len(roots),
        oracle_count=None,
        exact_certified=classically_allowed and (n_boundary == 0 or defect_is_constant(spec)),
        classically_allowed=classically_allowed,
        roots=roots,
        rdef=[[c[0], c[1]] for c in inside],
    )

    for root in roots:
        if root.fE_sign * root.mu >= 0:
            report.diagnostics.append(f"f_E at E={root.E_root} has the sign of mu")
        if abs(root.fE - root.fE_fd) > FD_RTOL * abs(root.fE):
            report.diagnostics.append(
                f"f_E at E={root.E_root}: analytic {root.fE} vs central difference {root.fE_fd}"
            )
    if classically_allowed:
        if not lower <= report.evans_count <= upper:
            report.diagnostics.append(f"evans count {report.evans_count} outside bounds [{lower}, {upper}]")
        if defect_is_constant(spec) and report.evans_count != upper:
            report.diagnostics.append(f"constant defect: evans count {report.evans_count} differs from n_G + 1 = {upper}")

    if params.run_oracle:
        report.oracle_count = oracle.gap_count_oracle(spec, gap, n_grid=params.oracle_n_grid)
        if report.oracle_count is not None and report.oracle_count != report.evans_count:
            report.diagnostics.append(f"oracle count {report.oracle_count} differs from evans count {report.evans_count}")

    if report.diagnostics:
        for message in report.diagnostics:
            print(f"❌ G_{gap.index}: {message}", file=sys.stderr)
        path = _dump_diagnostic(spec, report, params)
        print(f"📋 G_{gap.index}: postmortem written to {path}", file=sys.stderr)
    else:
        print(f"✅ G_{gap.index}: {report.evans_count} eigenvalue(s), bounds [{lower}, {upper}]", file=sys.stderr)
    return report


def energy_cap_for_index(spec: PotentialSpec, j_hi: int, params: CountParams | None = None) -> float:
    """Smallest doubling of a free-particle estimate whose scan reaches edge E_{2 j_hi}."""
    params = params or CountParams()
    E_max = ((j_hi + 1) * math.pi / spec.period) ** 2 + max_abs_potential(spec) + 10.0
    for _ in range(8):
        edges = band_edges(spec, E_max, params.scan_step, params.edge_tol, params.tol)
        if len(edges) > 2 * j_hi + 1:
            return E_max
        E_max *= 2.0
    raise GapCountError(f"could not reach gap G_{j_hi} below E={E_max}")


def select_gaps(spec: PotentialSpec, j_lo: int, j_hi: int, params: CountParams | None = None) -> List[GapInterval]:
    """Nonempty gaps G_j with j_lo <= j <= j_hi, in index order."""
    params = params or CountParams()
    if j_lo < 0 or j_hi < j_lo:
        raise GapCountError(f"bad gap index range [{j_lo}, {j_hi}]")
    E_max = energy_cap_for_index(spec, j_hi, params)
    return [g for g in gaps(spec, E_max, params.scan_step, params.edge_tol, params.tol) if j_lo <= g.index <= j_hi]


def count_range(spec: PotentialSpec, j_lo: int, j_hi: int, params: CountParams | None = None) -> List[CountReport]:
    """One report per nonempty gap G_j with j_lo <= j <= j_hi, in index order."""
    params = params or CountParams()
    selected = select_gaps(spec, j_lo, j_hi, params)
    print(f"📋 Counting {len(selected)} gap(s) with index in [{j_lo}, {j_hi}]", file=sys.stderr)
    return [count_gap(spec, gap, params) for gap in selected]
