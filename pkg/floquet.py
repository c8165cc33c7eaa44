import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.optimize import brentq

import config
from errors import FloquetError
from potential import PotentialSpec, potential_bounds
from propagator import J, defect_transfer, defect_with_theta, monodromy_periodic, monodromy_with_phi

PERIODIC = "periodic"
ANTIPERIODIC = "antiperiodic"

# Step halvings allowed when one scan step moves k by more than 2
_MAX_HALVINGS = 20

PairFn = Callable[[float], Tuple[float, float]]


@dataclass
class GapInterval:
    """Open gap (E_lo, E_hi) of the periodic operator; index 0 is (-inf, E_0)."""

    index: int
    E_lo: float
    E_hi: float
    kind_lo: str | None
    kind_hi: str
    omega: float | None = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.E_lo)

    @property
    def width(self) -> float:
        return self.E_hi - self.E_lo

    @property
    def midpoint(self) -> float:
        if not self.finite:
            raise FloquetError("semi-infinite gap has no midpoint")
        return 0.5 * (self.E_lo + self.E_hi)

    def contains(self, E: float) -> bool:
        return self.E_lo < E < self.E_hi

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        if not self.finite:
            out["E_lo"] = None
        return out


@dataclass
class RdefComponents:
    """Closed components [lo, hi] of {E : k_def(E, 1)^2 >= 4}, ordered and disjoint."""

    intervals: List[Tuple[float, float]] = field(default_factory=list)

    def meeting_open(self, lo: float, hi: float, tol: float = 0.0) -> List[Tuple[float, float]]:
        return [c for c in self.intervals if c[1] > lo + tol and c[0] < hi - tol]

    def contains(self, E: float, tol: float = 0.0) -> bool:
        return any(c[0] - tol <= E <= c[1] + tol for c in self.intervals)

    @property
    def points(self) -> List[float]:
        return [c[0] for c in self.intervals if c[0] == c[1]]


def discriminant(spec: PotentialSpec, E: float, tol: float = config.TOL) -> float:
    return float(np.trace(monodromy_periodic(spec, E, tol)))


def discriminant_with_slope(spec: PotentialSpec, E: float, tol: float = config.TOL) -> Tuple[float, float]:
    """k(E) and k'(E) = tr(M J Phi)."""
    M, phi = monodromy_with_phi(spec, E, tol)
    return float(np.trace(M)), float(np.trace(M @ J @ phi))


def defect_discriminant(spec: PotentialSpec, E: float, x: float = 1.0, tol: float = config.TOL) -> float:
    try:
        return float(np.trace(defect_transfer(spec, E, x, tol)))
    except ValueError as e:
        raise FloquetError(str(e)) from e


def defect_discriminant_with_slope(spec: PotentialSpec, E: float, tol: float = config.TOL) -> Tuple[float, float]:
    N, theta = defect_with_theta(spec, E, 1.0, tol)
    return float(np.trace(N)), float(np.trace(N @ J @ theta))


def classify_energy(spec: PotentialSpec, E: float, tol: float = config.TOL) -> str:
    k = discriminant(spec, E, tol)
    g = k * k - 4.0
    if abs(g) <= 1e-9:
        return "edge"
    return "band" if g < 0 else "gap"


def _phase_stepper(q_min: float, length: float, scan_step: float) -> Callable[[float], float]:
    # Energy step that advances the fastest local phase length*sqrt(E - q_min) by a bounded amount
    def step_at(E: float) -> float:
        return min(scan_step, config.SCAN_PHASE_STEP * 2.0 * math.sqrt(max(E - q_min, 1.0)) / length)

    return step_at


def _crossing(g: Callable[[float], float], a: float, ga: float, b: float, gb: float, edge_tol: float) -> List[Tuple[float, bool]]:
    if (ga > 0) == (gb > 0):
        return []
    return [(brentq(g, a, b, xtol=edge_tol), False)]


def _roots_between(
    pair_fn: PairFn, E0: float, k0: float, d0: float, E1: float, k1: float, d1: float, edge_tol: float
) -> List[Tuple[float, bool]]:
    def g(E: float) -> float:
        k = pair_fn(E)[0]
        return k * k - 4.0

    g0, g1 = k0 * k0 - 4.0, k1 * k1 - 4.0
    if d0 * d1 < 0:
        # Extremum of k inside the step: split into monotone halves
        Ec = brentq(lambda E: pair_fn(E)[1], E0, E1, xtol=edge_tol * 1e-3)
        kc = pair_fn(Ec)[0]
        gc = kc * kc - 4.0
        if abs(gc) <= config.POINT_TOL:
            return [(Ec, True)]
        return _crossing(g, E0, g0, Ec, gc, edge_tol) + _crossing(g, Ec, gc, E1, g1, edge_tol)
    return _crossing(g, E0, g0, E1, g1, edge_tol)


def _scan_roots(
    pair_fn: PairFn, E_start: float, E_stop: float, step_at: Callable[[float], float], edge_tol: float
) -> List[Tuple[float, bool]]:
    """Roots of k^2 - 4 on [E_start, E_stop] as (E, is_double), in increasing order."""
    roots: List[Tuple[float, bool]] = []
    E0 = E_start
    k0, d0 = pair_fn(E0)
    while E0 < E_stop:
        step = step_at(E0)
        E1 = min(E0 + step, E_stop)
        k1, d1 = pair_fn(E1)
        halvings = 0
        while abs(k1 - k0) > 2.0 and (min(abs(k0), abs(k1)) < 2.0 or k0 * k1 < 0) and halvings < _MAX_HALVINGS:
            step /= 2.0
            E1 = E0 + step
            k1, d1 = pair_fn(E1)
            halvings += 1
        try:
            roots.extend(_roots_between(pair_fn, E0, k0, d0, E1, k1, d1, edge_tol))
        except ValueError as e:
            raise FloquetError(f"could not bracket a root in [{E0}, {E1}]: {e}") from e
        E0, k0, d0 = E1, k1, d1
    return roots


def band_edges(
    spec: PotentialSpec,
    E_max: float,
    scan_step: float = config.SCAN_STEP,
    edge_tol: float = config.EDGE_TOL,
    tol: float = config.TOL,
) -> List[Tuple[float, str]]:
    """All roots E_0 <= E_1 <= ... of k(E)^2 = 4 below E_max.

    A double point (closed gap) appears as two equal consecutive entries.

    Returns:
        List of (energy, kind) where kind is "periodic" (k = 2) or
        "antiperiodic" (k = -2).
    """
    if not (scan_step > 0 and edge_tol > 0):
        raise FloquetError("scan_step and edge_tol must be positive")
    q_min = potential_bounds(spec.periodic)[0]
    E_start = q_min - 1.0
    if E_max <= E_start:
        raise FloquetError(f"E_max={E_max} lies below the periodic potential minimum {q_min}")

    def pair_fn(E: float) -> Tuple[float, float]:
        return discriminant_with_slope(spec, E, tol)

    roots = _scan_roots(pair_fn, E_start, E_max, _phase_stepper(q_min, spec.period, scan_step), edge_tol)
    if not roots:
        raise FloquetError(f"no band edge found below E_max={E_max}")
    edges: List[Tuple[float, str]] = []
    for E, double in roots:
        kind = PERIODIC if discriminant(spec, E, tol) > 0 else ANTIPERIODIC
        edges.append((E, kind))
        if double:
            edges.append((E, kind))
    return edges


def gaps(
    spec: PotentialSpec,
    E_max: float,
    scan_step: float = config.SCAN_STEP,
    edge_tol: float = config.EDGE_TOL,
    tol: float = config.TOL,
) -> List[GapInterval]:
    edges = band_edges(spec, E_max, scan_step, edge_tol, tol)
    out = [GapInterval(0, -math.inf, edges[0][0], None, edges[0][1])]
    j = 1
    while 2 * j < len(edges):
        (lo, kind_lo), (hi, kind_hi) = edges[2 * j - 1], edges[2 * j]
        if hi > lo:
            out.append(GapInterval(j, lo, hi, kind_lo, kind_hi))
        j += 1
    return out


def edge_kind_for_index(j: int) -> str:
    """Parity rule: E_j is a periodic point iff j = 0 or 3 mod 4."""
    return PERIODIC if j % 4 in (0, 3) else ANTIPERIODIC


def _edge_slope(spec: PotentialSpec, E: float, tol: float) -> float:
    k, dk = discriminant_with_slope(spec, E, tol)
    return abs(2.0 * k * dk)


def _require_finite(gap: GapInterval) -> None:
    if not gap.finite:
        raise FloquetError("the gap coordinate is only defined on finite gaps")


def _edge_integral(spec: PotentialSpec, edge: float, sign: float, span: float, quad_tol: float, tol: float) -> float:
    # int over [edge, edge + sign*span] of dE / sqrt(k^2 - 4), with E = edge + sign*t^2
    if span <= 0:
        return 0.0
    slope = _edge_slope(spec, edge, tol)

    def integrand(t: float) -> float:
        k = discriminant(spec, edge + sign * t * t, tol)
        g = abs(k * k - 4.0)
        # Cap at twice the edge limit 2/sqrt(slope) where rounding makes g unreliable
        return 2.0 * t / math.sqrt(max(g, 0.25 * slope * t * t, 1e-300))

    value, _ = quad(integrand, 0.0, math.sqrt(span), epsabs=quad_tol, epsrel=quad_tol, limit=200)
    return value


def gap_coordinate(
    spec: PotentialSpec, gap: GapInterval, E: float, quad_tol: float = config.QUAD_TOL, tol: float = config.TOL
) -> float:
    """Gap coordinate: int_{E_lo}^E dE / sqrt(k(E)^2 - 4), in [0, omega]."""
    _require_finite(gap)
    if not gap.E_lo <= E <= gap.E_hi:
        raise FloquetError(f"E={E} lies outside gap G_{gap.index} = ({gap.E_lo}, {gap.E_hi})")
    mid = gap.midpoint
    if E <= mid:
        return _edge_integral(spec, gap.E_lo, 1.0, E - gap.E_lo, quad_tol, tol)
    left = _edge_integral(spec, gap.E_lo, 1.0, mid - gap.E_lo, quad_tol, tol)
    right = _edge_integral(spec, gap.E_hi, -1.0, gap.E_hi - mid, quad_tol, tol)
    return left + right - _edge_integral(spec, gap.E_hi, -1.0, gap.E_hi - E, quad_tol, tol)


def gap_omega(spec: PotentialSpec, gap: GapInterval, quad_tol: float = config.QUAD_TOL, tol: float = config.TOL) -> float:
    """omega_j; cached on the gap."""
    if gap.omega is None:
        gap.omega = gap_coordinate(spec, gap, gap.E_hi, quad_tol, tol)
    return gap.omega


def gap_coordinate_inverse(
    spec: PotentialSpec, gap: GapInterval, s: float, quad_tol: float = config.QUAD_TOL, tol: float = config.TOL
) -> float:
    """Energy with gap coordinate s, by bracketing on [E_lo, E_hi]."""
    omega = gap_omega(spec, gap, quad_tol, tol)
    if not 0.0 <= s <= omega:
        raise FloquetError(f"gap coordinate {s} outside [0, {omega}]")
    if s == 0.0:
        return gap.E_lo
    if s == omega:
        return gap.E_hi
    return brentq(lambda E: gap_coordinate(spec, gap, E, quad_tol, tol) - s, gap.E_lo, gap.E_hi, xtol=1e-12)


def gap_coordinate_grid(
    spec: PotentialSpec, gap: GapInterval, n: int, edge_tol: float = config.EDGE_TOL, tol: float = config.TOL
) -> np.ndarray:
    """n energies equally spaced in the gap coordinate, kept 10*edge_tol inside the edges.

    The map is tabulated on Chebyshev-spaced energies, where dE/dtheta
    vanishes at both edges like sqrt(k^2 - 4) does, so the trapezoid
    integrand stays bounded.
    """
    _require_finite(gap)
    lo, hi = gap.E_lo + 10 * edge_tol, gap.E_hi - 10 * edge_tol
    if hi <= lo:
        return np.array([])
    w = hi - lo
    theta = np.linspace(0.0, 1.0, 4 * n + 1)
    energies = lo + 0.5 * w * (1.0 - np.cos(np.pi * theta))
    dE = 0.5 * w * np.pi * np.sin(np.pi * theta)
    g = np.array([discriminant(spec, E, tol) ** 2 - 4.0 for E in energies])
    density = dE / np.sqrt(np.maximum(np.abs(g), 1e-300))
    s = cumulative_trapezoid(density, theta, initial=0.0)
    targets = np.linspace(0.0, s[-1], n)
    return np.interp(np.interp(targets, s, theta), theta, energies)


def rdef_components(
    spec: PotentialSpec,
    E_lo: float,
    E_hi: float,
    scan_step: float = config.SCAN_STEP,
    edge_tol: float = config.EDGE_TOL,
    tol: float = config.TOL,
) -> RdefComponents:
    """Components of {E in [E_lo, E_hi] : k_def(E, 1)^2 >= 4}.

    Touching points, where k_def reaches +-2 without crossing (the constant
    defect case), come back as degenerate components [E, E].
    """
    if not E_lo < E_hi:
        raise FloquetError(f"need E_lo < E_hi, got [{E_lo}, {E_hi}]")
    q_min = potential_bounds(spec.defect)[0]

    def pair_fn(E: float) -> Tuple[float, float]:
        return defect_discriminant_with_slope(spec, E, tol)

    roots = _scan_roots(pair_fn, E_lo, E_hi, _phase_stepper(q_min, 1.0, scan_step), edge_tol)
    k0 = pair_fn(E_lo)[0]
    inside = k0 * k0 - 4.0 >= 0.0
    start = E_lo
    intervals: List[Tuple[float, float]] = []
    for E, double in roots:
        if double:
            if not inside:
                intervals.append((E, E))
            continue
        if inside:
            intervals.append((start, E))
        else:
            start = E
        inside = not inside
    if inside:
        intervals.append((start, E_hi))
    return RdefComponents(intervals)


def defect_x_band_structure(
    spec: PotentialSpec, E: float, n_x: int = 200, tol: float = config.TOL
) -> List[Tuple[float, float]]:
    """Components of {x in [0, 1] : k_def(E, x)^2 >= 4} on an n_x grid, edges refined."""
    xs = np.linspace(0.0, 1.0, n_x + 1)

    def g(x: float) -> float:
        k = defect_discriminant(spec, E, x, tol)
        return k * k - 4.0

    # Slack so that x = 0, where N = I and g = 0 exactly, counts as inside
    slack = 1e-12
    values = [g(x) for x in xs]
    out: List[Tuple[float, float]] = []
    start: float | None = xs[0] if values[0] >= -slack else None
    for x0, x1, g0, g1 in zip(xs, xs[1:], values, values[1:]):
        in0, in1 = g0 >= -slack, g1 >= -slack
        if in0 == in1:
            continue
        root = brentq(lambda x: g(x) + slack, x0, x1, xtol=1e-12)
        if in0:
            out.append((float(start), root))
            start = None
        else:
            start = root
    if start is not None:
        out.append((float(start), 1.0))
    return out
