import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

import config
from errors import PropagationError
from potential import PolyPiece, PotentialSpec, eval_defect

# Symplectic unit; every transfer matrix P satisfies P^t J P = J
J = np.array([[0.0, 1.0], [-1.0, 0.0]])
# dH/dE
H_E = np.array([[1.0, 0.0], [0.0, 0.0]])

# Below this |z| the z - sin z style differences switch to their Taylor series
_SERIES_CUTOFF = 1e-2


@dataclass(frozen=True)
class HamiltonianAt:
    """H(E, x) = diag(E - q(x), 1) at one point."""

    E: float
    q: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.E - self.q, 0.0], [0.0, 1.0]])

    @property
    def classically_allowed(self) -> bool:
        return self.E - self.q > 0.0


def symplectic_defect(P: np.ndarray) -> float:
    """max |P^t J P - J|; zero for an exact transfer matrix."""
    return float(np.max(np.abs(P.T @ J @ P - J)))


def _z_minus_sin(z: float) -> float:
    if abs(z) < _SERIES_CUTOFF:
        z2 = z * z
        return z * z2 * (1 / 6 - z2 * (1 / 120 - z2 * (1 / 5040 - z2 / 362880)))
    return z - math.sin(z)


def _sinh_minus_z(z: float) -> float:
    if abs(z) < _SERIES_CUTOFF:
        z2 = z * z
        return z * z2 * (1 / 6 + z2 * (1 / 120 + z2 * (1 / 5040 + z2 / 362880)))
    return math.sinh(z) - z


def _constant_block(E: float, q: float, L: float) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form transfer matrix and Phi over a constant piece of length L.

    Phi = int_0^L U^t diag(1,0) U, i.e. the Gram matrix of the first row
    (c(x), s(x)) of U.
    """
    gap = E - q
    if abs(gap) < config.SHEAR_TOL:
        U = np.array([[1.0, L], [0.0, 1.0]])
        phi = np.array([[L, L * L / 2], [L * L / 2, L ** 3 / 3]])
        return U, phi
    if gap > 0:
        k = math.sqrt(gap)
        c, s = math.cos(k * L), math.sin(k * L)
        U = np.array([[c, s / k], [-k * s, c]])
        cc = L / 2 + math.sin(2 * k * L) / (4 * k)
        cs = s * s / (2 * k * k)
        ss = _z_minus_sin(2 * k * L) / (4 * k ** 3)
    else:
        kappa = math.sqrt(-gap)
        try:
            c, s = math.cosh(kappa * L), math.sinh(kappa * L)
            sinh2 = math.sinh(2 * kappa * L)
        except OverflowError as e:
            raise PropagationError(f"hyperbolic overflow at E={E}, q={q}, L={L}") from e
        U = np.array([[c, s / kappa], [kappa * s, c]])
        cc = L / 2 + sinh2 / (4 * kappa)
        cs = s * s / (2 * kappa * kappa)
        ss = _sinh_minus_z(2 * kappa * L) / (4 * kappa ** 3)
    return U, np.array([[cc, cs], [cs, ss]])


def _ode_block(piece: PolyPiece, E: float, lo: float, hi: float, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Integrate U' = J H U together with Phi' = U^t H_E U over [lo, hi]."""

    def rhs(x: float, y: np.ndarray) -> np.ndarray:
        u1, u2, p1, p2 = y[:4]
        w = E - piece.value(x)
        return np.array([p1, p2, -w * u1, -w * u2, u1 * u1, u1 * u2, u2 * u2])

    y0 = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    sol = solve_ivp(rhs, (lo, hi), y0, method="RK45", rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise PropagationError(f"integration failed on [{lo}, {hi}] at E={E}: {sol.message}")
    y = sol.y[:, -1]
    U = y[:4].reshape(2, 2)
    det = float(np.linalg.det(U))
    if not det > 0:
        raise PropagationError(f"lost symplecticity on [{lo}, {hi}] at E={E} (det={det})")
    U = U / math.sqrt(det)
    phi = np.array([[y[4], y[5]], [y[5], y[6]]])
    return U, phi


def _segments(pieces: Sequence[PolyPiece], x0: float, x1: float) -> List[Tuple[PolyPiece, float, float]]:
    """Clip pieces to [x0, x1] and check they cover it."""
    slack = 1e-12 * max(1.0, abs(x0), abs(x1))
    out: List[Tuple[PolyPiece, float, float]] = []
    reached = x0
    for piece in pieces:
        lo, hi = max(piece.start, x0), min(piece.end, x1)
        if hi <= lo:
            continue
        if lo - reached > slack:
            raise PropagationError(f"pieces leave [{reached}, {lo}] uncovered")
        out.append((piece, reached, hi))
        reached = hi
    if x1 - reached > slack:
        raise PropagationError(f"pieces leave [{reached}, {x1}] uncovered")
    return out


def propagate_with_phi(
    pieces: Sequence[PolyPiece], E: float, x0: float, x1: float, tol: float = config.TOL
) -> Tuple[np.ndarray, np.ndarray]:
    """Fundamental matrix U(x1) with U(x0) = I and Phi = int U^t H_E U.

    Args:
        pieces: polynomial pieces in the same coordinate as x0, x1.
        E: energy.
        x0, x1: interval ends, x0 <= x1.
        tol: per-step tolerance of the Runge-Kutta pair on non-constant pieces.

    Returns:
        (U, Phi) as 2x2 arrays; Phi is symmetric.
    """
    if not tol > 0:
        raise PropagationError(f"tol must be positive, got {tol}")
    if x1 < x0:
        raise PropagationError(f"need x0 <= x1, got [{x0}, {x1}]")
    U = np.eye(2)
    phi = np.zeros((2, 2))
    if x1 == x0:
        return U, phi
    for piece, lo, hi in _segments(pieces, x0, x1):
        if piece.is_constant:
            block, block_phi = _constant_block(E, piece.coeffs[0], hi - lo)
        else:
            block, block_phi = _ode_block(piece, E, lo, hi, tol)
        phi = phi + U.T @ block_phi @ U
        U = block @ U
    if not np.all(np.isfinite(U)):
        raise PropagationError(f"non-finite transfer matrix at E={E}")
    return U, phi


def propagate(
    pieces: Sequence[PolyPiece], E: float, x0: float, x1: float, tol: float = config.TOL
) -> np.ndarray:
    return propagate_with_phi(pieces, E, x0, x1, tol)[0]


def monodromy_periodic(spec: PotentialSpec, E: float, tol: float = config.TOL) -> np.ndarray:
    return propagate(spec.periodic, E, 0.0, spec.period, tol)


def _check_x(x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise PropagationError(f"defect position must lie in [0, 1], got x={x}")


def defect_transfer(spec: PotentialSpec, E: float, x: float = 1.0, tol: float = config.TOL) -> np.ndarray:
    _check_x(x)
    if x == 0.0:
        return np.eye(2)
    return propagate(spec.defect, E, 0.0, x, tol)


def phi_matrix(spec: PotentialSpec, E: float, tol: float = config.TOL) -> np.ndarray:
    return propagate_with_phi(spec.periodic, E, 0.0, spec.period, tol)[1]


def theta_matrix(spec: PotentialSpec, E: float, x: float = 1.0, tol: float = config.TOL) -> np.ndarray:
    _check_x(x)
    return propagate_with_phi(spec.defect, E, 0.0, x, tol)[1]


def monodromy_with_phi(spec: PotentialSpec, E: float, tol: float = config.TOL) -> Tuple[np.ndarray, np.ndarray]:
    return propagate_with_phi(spec.periodic, E, 0.0, spec.period, tol)


def defect_with_theta(
    spec: PotentialSpec, E: float, x: float = 1.0, tol: float = config.TOL
) -> Tuple[np.ndarray, np.ndarray]:
    _check_x(x)
    return propagate_with_phi(spec.defect, E, 0.0, x, tol)


def transfer_E_derivative(spec: PotentialSpec, E: float, tol: float = config.TOL) -> np.ndarray:
    """M_E = M J Phi."""
    M, phi = monodromy_with_phi(spec, E, tol)
    return M @ J @ phi


def defect_E_derivative(spec: PotentialSpec, E: float, x: float = 1.0, tol: float = config.TOL) -> np.ndarray:
    """N_E = N J Theta."""
    N, theta = defect_with_theta(spec, E, x, tol)
    return N @ J @ theta


def defect_x_derivative(spec: PotentialSpec, E: float, x: float = 1.0, tol: float = config.TOL) -> np.ndarray:
    """N_x = J H_def(E, x) N, straight from the equation of motion."""
    N = defect_transfer(spec, E, x, tol)
    H = HamiltonianAt(E, eval_defect(spec, x)).matrix()
    return J @ H @ N


def kp_closed_form(A: float, a: float, E: float) -> np.ndarray:
    """Kronig-Penney monodromy: well -A on the first half-period, barrier +A on the second."""
    first, _ = _constant_block(E, -A, a / 2)
    second, _ = _constant_block(E, A, a / 2)
    return second @ first
