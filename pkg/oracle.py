import math
import sys
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal
from scipy.optimize import brentq

import config
from errors import OracleError
from evans import periodic_eigenpair, semi_infinite_window
from floquet import GapInterval
from potential import PolyPiece, PotentialSpec, integrate_full, min_piece_width, potential_bounds
from propagator import propagate


@dataclass(frozen=True)
class BoxDiscretization:
    """Dirichlet box [-L_left, 1 + L_right] with n_grid interior nodes."""

    L_left: float
    L_right: float
    n_grid: int

    @property
    def length(self) -> float:
        return self.L_left + 1.0 + self.L_right

    @property
    def h(self) -> float:
        return self.length / (self.n_grid + 1)

    def nodes(self) -> np.ndarray:
        return -self.L_left + self.h * np.arange(1, self.n_grid + 1)

    def enlarged(self, spec: PotentialSpec, periods: int = 1) -> "BoxDiscretization":
        """Same spacing, `periods` more cells on each side."""
        extra = periods * spec.period
        n = int(round((self.length + 2 * extra) / self.h)) - 1
        return BoxDiscretization(self.L_left + extra, self.L_right + extra, n)


def _check_box(spec: PotentialSpec, box: BoxDiscretization) -> None:
    for side in (box.L_left, box.L_right):
        cells = side / spec.period
        if side <= 0 or abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
            raise OracleError(f"box side {side} is not a positive multiple of the period {spec.period}")
    if box.n_grid < 1000:
        raise OracleError(f"n_grid must be at least 1000, got {box.n_grid}")
    if not box.h < min_piece_width(spec) / 8:
        raise OracleError(f"grid spacing {box.h} is too coarse for the narrowest piece")


def _operator(spec: PotentialSpec, box: BoxDiscretization) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonal, off-diagonal and cell-averaged potential of the 3-point Dirichlet matrix."""
    h = box.h
    x = box.nodes()
    q = (integrate_full(spec, x + h / 2) - integrate_full(spec, x - h / 2)) / h
    diag = 2.0 / (h * h) + q
    off = np.full(box.n_grid - 1, -1.0 / (h * h))
    return diag, off, q


def box_eigenvalues(spec: PotentialSpec, box: BoxDiscretization, E_max: float) -> List[float]:
    """Raw eigenvalues below E_max of the central-difference Dirichlet matrix (bisection driver)."""
    _check_box(spec, box)
    diag, off, q = _operator(spec, box)
    lo = float(q.min()) - 1.0
    if E_max <= lo:
        return []
    vals = eigvalsh_tridiagonal(diag, off, select="v", select_range=(lo, E_max), lapack_driver="stebz")
    return sorted(float(v) for v in vals)


def dispersion_corrected(vals: np.ndarray, vecs: np.ndarray, q: np.ndarray, h: float) -> np.ndarray:
    """First-order removal of the 3-point stencil bias: E ~ lambda + h^2/12 sum (lambda - q)^2 v^2."""
    kinetic = (vals[None, :] - q[:, None]) ** 2
    return vals + h * h / 12.0 * np.sum(kinetic * vecs ** 2, axis=0)


def _end_mass(vecs: np.ndarray, box: BoxDiscretization, spec: PotentialSpec) -> np.ndarray:
    x = box.nodes()
    width_left = max(spec.period, box.L_left / 4)
    width_right = max(spec.period, box.L_right / 4)
    ends = (x < -box.L_left + width_left) | (x > 1.0 + box.L_right - width_right)
    return np.sum(vecs[ends, :] ** 2, axis=0)


def box_gap_modes(
    spec: PotentialSpec, box: BoxDiscretization, lo: float, hi: float
) -> List[Tuple[float, float]]:
    """(corrected energy, end-zone mass) of the box modes whose corrected energy lies in (lo, hi)."""
    _check_box(spec, box)
    diag, off, q = _operator(spec, box)
    h = box.h
    # Raw eigenvalues sit below the corrected ones; widen the window to catch them
    reach = h * h / 12.0 * (max(abs(hi), abs(lo)) + float(np.abs(q).max())) ** 2
    vals, vecs = eigh_tridiagonal(
        diag, off, select="v", select_range=(lo - reach - 1e-9, hi), lapack_driver="stebz"
    )
    if len(vals) == 0:
        return []
    corrected = dispersion_corrected(vals, vecs, q, h)
    mass = _end_mass(vecs, box, spec)
    return [(float(E), float(m)) for E, m in zip(corrected, mass) if lo < E < hi]


def default_margin(spec: PotentialSpec, box: BoxDiscretization, E_hi: float) -> float:
    """3x the residual error left after the dispersion correction."""
    q_min = potential_bounds(spec.periodic + spec.defect)[0]
    kinetic = max(abs(E_hi - q_min), 1.0)
    first_order = box.h ** 2 * kinetic ** 2 / 12.0
    return 3.0 * first_order * (box.h ** 2 * kinetic / 12.0)


def decay_periods(spec: PotentialSpec, gap: GapInterval) -> int:
    """Periods per side so gap modes decay below BOX_DECAY_TARGET at the gap quarter points."""
    if gap.finite:
        probes = (gap.E_lo + 0.25 * gap.width, gap.E_hi - 0.25 * gap.width)
    else:
        probes = (gap.E_hi - 0.25 * semi_infinite_window(spec),)
    worst = max(abs(periodic_eigenpair(spec, E).lambda_minus) for E in probes)
    if worst <= 0.0:
        return config.BOX_PERIODS
    needed = math.ceil(math.log(config.BOX_DECAY_TARGET) / math.log(worst))
    periods = max(config.BOX_PERIODS, needed)
    if periods > config.BOX_MAX_PERIODS:
        print(
            f"⚠️ G_{gap.index}: decay needs {periods} periods per side, capped at {config.BOX_MAX_PERIODS}",
            file=sys.stderr,
        )
        periods = config.BOX_MAX_PERIODS
    return periods


def auto_boxes(
    spec: PotentialSpec, gap: GapInterval, n_grid: int = config.BOX_N_GRID
) -> Tuple[BoxDiscretization, BoxDiscretization]:
    """Two boxes one period apart per side, sized from the decay rate inside the gap."""
    periods = decay_periods(spec, gap)
    side = periods * spec.period
    length = 2 * side + 1.0
    q_min = potential_bounds(spec.periodic + spec.defect)[0]
    kinetic = max(abs(gap.E_hi - q_min), 1.0)
    # Spacing that keeps the uncorrected stencil bias h^2 E / 12 below 1e-4 relative
    h_target = min(min_piece_width(spec) / 10, math.sqrt(1.2e-3 / kinetic))
    n = max(n_grid, int(math.ceil(length / h_target)))
    first = BoxDiscretization(side, side, n)
    return first, first.enlarged(spec, 1)


def gap_count_oracle(
    spec: PotentialSpec,
    gap: GapInterval,
    boxes: Sequence[BoxDiscretization] | None = None,
    E_margin: float | None = None,
    n_grid: int = config.BOX_N_GRID,
) -> int | None:
    """Number of defect modes in the gap from two Dirichlet boxes, or None when they disagree.

    Modes carrying more than BOX_ARTIFACT_MASS of their weight near the box
    walls are wall states, not defect modes, and are not counted.
    """
    if boxes is None:
        boxes = auto_boxes(spec, gap, n_grid)
    if len(boxes) != 2:
        raise OracleError("gap_count_oracle needs exactly two boxes")
    if abs(boxes[1].L_left - boxes[0].L_left) < spec.period * (1 - 1e-9):
        raise OracleError("the two boxes must differ by at least one period on each side")
    counts = []
    for box in boxes:
        margin = default_margin(spec, box, gap.E_hi) if E_margin is None else E_margin
        lo = gap.E_lo + margin if gap.finite else gap.E_hi - semi_infinite_window(spec)
        hi = gap.E_hi - margin
        modes = box_gap_modes(spec, box, lo, hi)
        kept = [E for E, mass in modes if mass <= config.BOX_ARTIFACT_MASS]
        counts.append(len(kept))
    if counts[0] != counts[1]:
        print(f"⚠️ G_{gap.index}: box counts {counts[0]} and {counts[1]} differ; oracle indeterminate", file=sys.stderr)
        return None
    return counts[0]


def dirichlet_spectrum(pieces: Sequence[PolyPiece], L: float, n_max: int, tol: float = config.TOL) -> List[float]:
    """First n_max Dirichlet eigenvalues on [0, L] by shooting on u(L) from (u, p) = (0, 1)."""
    if n_max < 1:
        raise OracleError(f"n_max must be positive, got {n_max}")
    q_min, q_max = potential_bounds(pieces)

    def u_end(E: float) -> float:
        return float(propagate(pieces, E, 0.0, L, tol)[0, 1])

    E_stop = q_max + ((n_max + 1) * math.pi / L) ** 2 + 10.0
    found: List[float] = []
    E0 = q_min
    u0 = u_end(E0)
    while len(found) < n_max and E0 < E_stop:
        E1 = E0 + config.SCAN_PHASE_STEP * 2.0 * math.sqrt(max(E0 - q_min, 1.0)) / L
        u1 = u_end(E1)
        if u0 == 0.0:
            found.append(E0)
        elif u0 * u1 < 0:
            found.append(brentq(u_end, E0, E1, xtol=1e-13, rtol=1e-15))
        E0, u0 = E1, u1
    if len(found) < n_max:
        raise OracleError(f"only {len(found)} of {n_max} Dirichlet eigenvalues bracketed below {E_stop}")
    return found[:n_max]
