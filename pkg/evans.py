import math
import sys
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.optimize import brentq

import config
from errors import EvansError
from floquet import GapInterval, gap_coordinate_grid
from potential import PotentialSpec, eval_defect, max_abs_potential
from propagator import (
    J,
    HamiltonianAt,
    defect_transfer,
    defect_with_theta,
    monodromy_periodic,
    monodromy_with_phi,
)


@dataclass(frozen=True)
class GapEigenPair:
    """Eigenpairs of a transfer matrix with real eigenvalues, |lambda_minus| < 1 < |lambda_plus|."""

    v_plus: np.ndarray
    v_minus: np.ndarray
    lambda_plus: float
    lambda_minus: float


@dataclass(frozen=True)
class EvansRoot:
    E_root: float
    mu: float
    fE_sign: int
    fE: float
    fE_fd: float

    def to_dict(self) -> dict:
        return {
            "E_root": self.E_root,
            "mu": self.mu,
            "fE_sign": self.fE_sign,
            "fE": self.fE,
            "fE_fd": self.fE_fd,
        }


def _eigenvector(M: np.ndarray, lam: float) -> np.ndarray:
    # Two candidate null vectors of M - lam I; the longer one is the well-conditioned choice
    first = np.array([M[0, 1], lam - M[0, 0]])
    second = np.array([lam - M[1, 1], M[1, 0]])
    v = first if np.linalg.norm(first) >= np.linalg.norm(second) else second
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise EvansError("transfer matrix is a multiple of the identity; eigenvector undefined")
    return v / norm


def _fix_sign(v: np.ndarray, ref: np.ndarray | None) -> np.ndarray:
    if ref is not None:
        return v if float(v @ ref) >= 0.0 else -v
    return v if v[np.argmax(np.abs(v))] > 0 else -v


def gap_eigenpair(M: np.ndarray, ref: GapEigenPair | None = None) -> GapEigenPair:
    """Growing and decaying eigenpairs of M inside a gap.

    lambda_minus is taken as 1/lambda_plus, which stays accurate when
    k^2 - 4 is small near the band edges.

    Args:
        M: 2x2 symplectic matrix with trace^2 > 4.
        ref: pair at a neighbouring energy; vectors are flipped to keep a
            positive inner product with it. Without it the larger component
            is made positive.
    """
    k = float(np.trace(M))
    g = k * k - 4.0
    if not g > 0:
        raise EvansError(f"trace {k} does not lie in a gap (k^2 - 4 = {g})")
    lam_plus = 0.5 * (k + math.copysign(math.sqrt(g), k))
    lam_minus = 1.0 / lam_plus
    v_plus = _fix_sign(_eigenvector(M, lam_plus), None if ref is None else ref.v_plus)
    v_minus = _fix_sign(_eigenvector(M, lam_minus), None if ref is None else ref.v_minus)
    return GapEigenPair(v_plus, v_minus, lam_plus, lam_minus)


def periodic_eigenpair(spec: PotentialSpec, E: float, ref: GapEigenPair | None = None, tol: float = config.TOL) -> GapEigenPair:
    return gap_eigenpair(monodromy_periodic(spec, E, tol), ref)


def defect_eigenpair(spec: PotentialSpec, E: float, x: float = 1.0, ref: GapEigenPair | None = None, tol: float = config.TOL) -> GapEigenPair:
    """w+-, tau+- of N(E, x); requires k_def(E, x)^2 > 4."""
    return gap_eigenpair(defect_transfer(spec, E, x, tol), ref)


def generalized_evans(spec: PotentialSpec, E: float, x: float, ref: GapEigenPair | None = None, tol: float = config.TOL) -> float:
    """f(E, x) = <v-, J N(E, x) v+>."""
    pair = periodic_eigenpair(spec, E, ref, tol)
    N = defect_transfer(spec, E, x, tol)
    return float(pair.v_minus @ J @ N @ pair.v_plus)


def evans(spec: PotentialSpec, E: float, ref: GapEigenPair | None = None, tol: float = config.TOL) -> float:
    return generalized_evans(spec, E, 1.0, ref, tol)


def hf_coefficients(P: np.ndarray, P_E: np.ndarray, pair: GapEigenPair) -> Tuple[float, float]:
    """Rotation rates alpha+- of the eigenvectors of P: dv/dE = alpha J v.

    alpha = lambda <v, J P_E v> / (1 - lambda^2). The same formula gives
    beta+- (P = N, P_E = N_E) and delta+- (P = N, derivative in x).
    """
    out = []
    for v, lam in ((pair.v_plus, pair.lambda_plus), (pair.v_minus, pair.lambda_minus)):
        denom = 1.0 - lam * lam
        if abs(denom) < 1e-14:
            raise EvansError("eigenvalue on the unit circle: band edge")
        out.append(lam * float(v @ J @ P_E @ v) / denom)
    return out[0], out[1]


def alpha_coefficients(spec: PotentialSpec, E: float, tol: float = config.TOL) -> Tuple[float, float]:
    M, phi = monodromy_with_phi(spec, E, tol)
    return hf_coefficients(M, M @ J @ phi, gap_eigenpair(M))


def beta_coefficients(spec: PotentialSpec, E: float, x: float = 1.0, tol: float = config.TOL) -> Tuple[float, float]:
    N, theta = defect_with_theta(spec, E, x, tol)
    return hf_coefficients(N, N @ J @ theta, gap_eigenpair(N))


def delta_coefficients(spec: PotentialSpec, E: float, x: float = 1.0, tol: float = config.TOL) -> Tuple[float, float]:
    N = defect_transfer(spec, E, x, tol)
    N_x = J @ HamiltonianAt(E, eval_defect(spec, x)).matrix() @ N
    return hf_coefficients(N, N_x, gap_eigenpair(N))


def evans_E_derivative(spec: PotentialSpec, E: float, ref: GapEigenPair | None = None, tol: float = config.TOL) -> float:
    """df/dE anywhere in a gap, from dv+-/dE = alpha+- J v+- and N_E = N J Theta."""
    M, phi = monodromy_with_phi(spec, E, tol)
    pair = gap_eigenpair(M, ref)
    a_plus, a_minus = hf_coefficients(M, M @ J @ phi, pair)
    N, theta = defect_with_theta(spec, E, 1.0, tol)
    vp, vm = pair.v_plus, pair.v_minus
    return float(
        a_minus * (vm @ N @ vp)
        + vm @ J @ N @ J @ theta @ vp
        + a_plus * (vm @ J @ N @ J @ vp)
    )


def _root_derivative(spec: PotentialSpec, E: float, ref: GapEigenPair | None, tol: float) -> Tuple[float, float]:
    # (f_E, mu) at a zero of f, where N v+ = mu v-
    M, phi = monodromy_with_phi(spec, E, tol)
    pair = gap_eigenpair(M, ref)
    a_plus, a_minus = hf_coefficients(M, M @ J @ phi, pair)
    N, theta = defect_with_theta(spec, E, 1.0, tol)
    mu = float(pair.v_minus @ N @ pair.v_plus)
    if mu == 0.0:
        raise EvansError(f"N v+ vanishes at E={E}")
    fE = mu * a_minus - a_plus / mu - float(pair.v_plus @ theta @ pair.v_plus) / mu
    return fE, mu


def evans_E_derivative_fd(spec: PotentialSpec, E: float, h: float, ref: GapEigenPair | None = None, tol: float = config.TOL) -> float:
    """Central difference of f with both evaluations aligned to the pair at E."""
    base = periodic_eigenpair(spec, E, ref, tol)
    return (evans(spec, E + h, base, tol) - evans(spec, E - h, base, tol)) / (2.0 * h)


def _fd_step(gap: GapInterval, E: float) -> float:
    room = gap.E_hi - E if not gap.finite else min(E - gap.E_lo, gap.E_hi - E)
    return 1e-3 * min(room, 1.0)


def evans_E_derivative_at_root(spec: PotentialSpec, root: EvansRoot, gap: GapInterval, tol: float = config.TOL) -> float:
    """Analytic f_E = mu alpha- - alpha+/mu - <v+, Theta v+>/mu at a root of f."""
    if not gap.contains(root.E_root):
        raise EvansError(f"root {root.E_root} lies outside gap G_{gap.index}")
    fE, mu = _root_derivative(spec, root.E_root, None, tol)
    # Flipping either eigenvector flips f and mu together; report on the root's branch
    return fE if mu * root.mu > 0 else -fE


def evans_x_derivative_at_root(spec: PotentialSpec, E: float, x: float, tol: float = config.TOL) -> float:
    """df/dx = -<v-, H_def N v+>; equals -mu <v-, H_def v-> at a zero of f(E, x).

    Its sign is opposite to mu only when H_def(E, x) is positive definite.
    """
    pair = periodic_eigenpair(spec, E, None, tol)
    N = defect_transfer(spec, E, x, tol)
    H = HamiltonianAt(E, eval_defect(spec, x)).matrix()
    return float(-(pair.v_minus @ H @ N @ pair.v_plus))


def evans_gap_coordinate_derivative(spec: PotentialSpec, gap: GapInterval, E: float, tol: float = config.TOL) -> float:
    """df/dE~ = f_E sqrt(k^2 - 4); bounded up to the band edges."""
    if not gap.contains(E):
        raise EvansError(f"E={E} lies outside gap G_{gap.index}")
    k = float(np.trace(monodromy_periodic(spec, E, tol)))
    return evans_E_derivative(spec, E, None, tol) * math.sqrt(max(k * k - 4.0, 0.0))


def edge_limit_derivative(spec: PotentialSpec, gap: GapInterval, edge: str, mu: float, tol: float = config.TOL) -> float:
    """Band-edge limit of df/dE~ at a root with multiplier mu: -(mu^2 + 1)/mu <v, Phi v>."""
    if edge not in ("lo", "hi"):
        raise EvansError(f"edge must be 'lo' or 'hi', got {edge!r}")
    E = gap.E_lo if edge == "lo" else gap.E_hi
    if not math.isfinite(E):
        raise EvansError("the semi-infinite gap has no lower edge")
    M, phi = monodromy_with_phi(spec, E, tol)
    v = _eigenvector(M, math.copysign(1.0, float(np.trace(M))))
    return -(mu * mu + 1.0) / mu * float(v @ phi @ v)


def semi_infinite_window(spec: PotentialSpec) -> float:
    """Depth L of the search window [E_0 - L, E_0] for eigenvalues below the spectrum."""
    return max(config.SEMI_INFINITE_WINDOW_MIN, 2.0 * max_abs_potential(spec))


def root_search_grid(
    spec: PotentialSpec, gap: GapInterval, grid_n: int, edge_tol: float = config.EDGE_TOL, tol: float = config.TOL
) -> np.ndarray:
    """Energies at which f is sampled: uniform in the gap coordinate, or E_0 - L s^2 below the spectrum."""
    if gap.finite:
        return gap_coordinate_grid(spec, gap, grid_n, edge_tol, tol)
    window = semi_infinite_window(spec)
    s = np.linspace(1.0, 0.0, grid_n)
    energies = gap.E_hi - window * s * s
    return energies[energies < gap.E_hi - 10 * edge_tol]


def _aligned_pairs(spec: PotentialSpec, energies: np.ndarray, tol: float) -> List[GapEigenPair | None]:
    """Eigenpairs along a sorted grid, sign-fixed at the middle and carried outwards."""
    pairs: List[GapEigenPair | None] = [None] * len(energies)
    mid = len(energies) // 2
    order = list(range(mid, len(energies))) + list(range(mid - 1, -1, -1))
    for i in order:
        neighbour = None
        if i > mid:
            neighbour = pairs[i - 1]
        elif i < mid:
            neighbour = pairs[i + 1]
        try:
            pairs[i] = periodic_eigenpair(spec, float(energies[i]), neighbour, tol)
        except EvansError:
            pairs[i] = None
    return pairs


def evans_scan(
    spec: PotentialSpec, gap: GapInterval, grid_n: int = config.ROOT_GRID_N, tol: float = config.TOL
) -> List[Tuple[float, float, GapEigenPair]]:
    """(E, f(E), pair) on the root search grid; nodes with no eigenpair are dropped."""
    energies = root_search_grid(spec, gap, grid_n, tol=tol)
    out = []
    for E, pair in zip(energies, _aligned_pairs(spec, energies, tol)):
        if pair is None:
            continue
        N = defect_transfer(spec, float(E), 1.0, tol)
        out.append((float(E), float(pair.v_minus @ J @ N @ pair.v_plus), pair))
    return out


def evans_roots_in_gap(
    spec: PotentialSpec,
    gap: GapInterval,
    grid_n: int = config.ROOT_GRID_N,
    root_tol: float = config.ROOT_TOL,
    tol: float = config.TOL,
) -> List[EvansRoot]:
    """Zeros of the Evans function in one gap, from sign changes on the gap-coordinate grid."""
    samples = evans_scan(spec, gap, grid_n, tol)
    roots: List[EvansRoot] = []
    cells: List[int] = []
    for i, ((E0, f0, p0), (E1, f1, _)) in enumerate(zip(samples, samples[1:])):
        if f0 == 0.0:
            E_root = E0
        elif f0 * f1 < 0:
            E_root = brentq(lambda E: evans(spec, E, p0, tol), E0, E1, xtol=root_tol)
        else:
            continue
        fE, mu = _root_derivative(spec, E_root, p0, tol)
        h = _fd_step(gap, E_root)
        fE_fd = evans_E_derivative_fd(spec, E_root, h, p0, tol)
        roots.append(EvansRoot(E_root, mu, int(math.copysign(1, fE)), fE, fE_fd))
        cells.append(i)
    for a, b in zip(cells, cells[1:]):
        if b - a < 2:
            print(
                f"⚠️ Roots in G_{gap.index} are less than two grid cells apart; raise --grid-n to be sure none are missed",
                file=sys.stderr,
            )
    return roots
