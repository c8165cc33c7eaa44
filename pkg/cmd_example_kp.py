import dataclasses
import sys
from typing import Any, Dict, Sequence, Set, Tuple

from diophantine import QuadraticIrrational, exceptional_analysis, kp_threshold, resonant_defect_level
from errors import ConfigError, DiophantineError
from gapcount import CountParams, count_gap, select_gaps
from potential import kronig_penney_spec
from utils_formatting import format_json

NAMED_PERIODS = {
    "phi": (1, -1, -1),
    "sqrt2": (1, 0, -2),
    "sqrt3": (1, 0, -3),
}

# Orbit terms listed in the report even when fewer are counted
MIN_LISTED_TERMS = 4


def parse_period(a_choice: str) -> QuadraticIrrational:
    if a_choice in NAMED_PERIODS:
        return QuadraticIrrational(*NAMED_PERIODS[a_choice])
    try:
        n1, n2, n3 = (int(part) for part in a_choice.split(","))
        return QuadraticIrrational(n1, n2, n3)
    except (ValueError, DiophantineError) as e:
        raise ConfigError(f"--a must be one of {sorted(NAMED_PERIODS)} or n1,n2,n3; got {a_choice!r} ({e})") from e


def example_kp(
    A: float,
    a_choice: str = "phi",
    j: int = 11,
    k_range: Tuple[int, int] = (0, 2),
    nk: Sequence[int] = (),
    params: CountParams | None = None,
) -> Tuple[bool, Dict[str, Any]]:
    """Kronig-Penney square wave of contrast A with the defect level that makes offset j resonant.

    Gaps named by `nk` (or, by default, by orbit terms k_range[0] <= k <
    k_range[1] plus one non-orbit control gap) are counted with both the
    Evans roots and the box oracle.

    Returns:
        (all diagnostics passed, report dictionary)
    """
    q = parse_period(a_choice)
    k_lo, k_hi = k_range
    if j == 0:
        raise ConfigError("j must be nonzero")
    params = dataclasses.replace(params or CountParams(), run_oracle=True)
    a = float(q)
    q_def = resonant_defect_level(j, q)
    spec = kronig_penney_spec(A, a, q_def)
    print(f"📋 Kronig-Penney A={A}, a={q.exact}, q_def={q_def}", file=sys.stderr)

    analysis = exceptional_analysis(spec, q, k_max=max(k_hi, MIN_LISTED_TERMS))
    predictions = [p for p in analysis.predictions if k_lo <= _term(analysis, p) < k_hi]
    predicted_gaps = sorted({p["gap_index"] for p in predictions if p["gap_index"] > 0})
    if nk:
        indices = sorted(set(nk))
        control = None
    else:
        if not predicted_gaps:
            raise ConfigError("no gap to count: give --nk or a k range that contains orbit terms")
        control = control_gap({p["gap_index"] for p in analysis.predictions}, predicted_gaps[0])
        indices = sorted({*predicted_gaps, control})

    selected = {g.index: g for g in select_gaps(spec, min(indices), max(indices), params)}
    gap_reports = []
    for n in indices:
        gap = selected.get(n)
        if gap is None:
            print(f"⚠️ G_{n} is closed; skipped", file=sys.stderr)
            continue
        report = count_gap(spec, gap, params)
        points = [p for p in analysis.predictions if p["gap_index"] == n]
        gap_reports.append(
            {
                "n": n,
                "exceptional": n in {p["gap_index"] for p in analysis.predictions},
                "control": n == control,
                "predicted_points": [
                    {
                        "defect_index": p["defect_index"],
                        "rdef_point_estimate": p["rdef_point_estimate"],
                        "inside_gap": gap.contains(p["rdef_point_estimate"]),
                    }
                    for p in points
                ],
                "evans_count": report.evans_count,
                "oracle_count": report.oracle_count,
                "count": report.to_dict(),
            }
        )

    threshold = kp_threshold(j, q)
    result = {
        "A": A,
        "a": str(q.exact),
        "a_value": a,
        "j": j,
        "q_def": q_def,
        "q_def_formula": f"2 pi^2 j / (a sqrt({q.d}))",
        "threshold": threshold,
        "A_above_threshold": A > threshold,
        "exceptional_analysis": analysis.to_dict(),
        "gaps": gap_reports,
    }
    success = all(not r["count"]["diagnostics"] for r in gap_reports)
    return success, result


def control_gap(exceptional: Set[int], start: int) -> int:
    """Smallest odd gap index above `start` that no orbit term lands in.

    Odd gaps of the square wave are open for generic contrast, so the
    control gap is expected to hold a single eigenvalue.
    """
    n = start + 1
    while n % 2 == 0 or n in exceptional:
        n += 1
    return n


def _term(analysis: Any, prediction: Dict[str, Any]) -> int:
    # Position of the pair inside its orbit
    orbit = analysis.orbits[prediction["orbit"]]
    for k, hit in enumerate(orbit):
        if hit.N == prediction["gap_index"] and hit.M == prediction["defect_index"]:
            return k
    return -1


def process(cfg: Any) -> Tuple[bool, str]:
    params = cfg.count_params()
    success, result = example_kp(cfg.A, cfg.a_choice, cfg.j, (cfg.k_lo, cfg.k_hi), cfg.nk, params)
    print(f"📋 threshold {result['threshold']:.6g}, A={cfg.A}", file=sys.stderr)
    return success, format_json({"params": cfg.header(), **result})
