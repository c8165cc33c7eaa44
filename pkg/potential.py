import bisect
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from errors import PotentialError

# Relative slack allowed when checking that pieces tile their cell
_COVER_TOL = 1e-12


@dataclass(frozen=True)
class PolyPiece:
    """One polynomial piece q(x) = c0 + c1 x + ... on [start, end).

    Coefficients are in increasing degree and refer to the absolute
    coordinate of the cell the piece belongs to (periodic cell [0, a) or
    defect cell [0, 1)), not to a local offset.
    """

    start: float
    end: float
    coeffs: Tuple[float, ...]

    def value(self, x: float) -> float:
        return float(P.polyval(x, self.coeffs))

    def antiderivative(self, x: Any) -> Any:
        """Integral of the piece from `start` to x (vectorised over x)."""
        integral = P.polyint(self.coeffs)
        return P.polyval(x, integral) - P.polyval(self.start, integral)

    def integral(self) -> float:
        return float(self.antiderivative(self.end))

    @property
    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1:])

    @property
    def width(self) -> float:
        return self.end - self.start

    def bounds(self) -> Tuple[float, float]:
        """Exact (min, max) of the polynomial over the closed piece."""
        candidates = [self.start, self.end]
        if len(self.coeffs) > 2:
            for root in P.polyroots(P.polyder(self.coeffs)):
                if abs(root.imag) < 1e-12 and self.start < root.real < self.end:
                    candidates.append(root.real)
        values = [self.value(x) for x in candidates]
        return min(values), max(values)


@dataclass(frozen=True)
class PotentialSpec:
    """Periodic potential of period `period` glued to a defect on (0, 1)."""

    period: float
    periodic: Tuple[PolyPiece, ...]
    defect: Tuple[PolyPiece, ...]

    def __post_init__(self) -> None:
        if not (self.period > 0 and math.isfinite(self.period)):
            raise PotentialError(f"period must be positive and finite, got {self.period}")
        _check_cover(self.periodic, self.period, "periodic")
        _check_cover(self.defect, 1.0, "defect")


def _check_cover(pieces: Sequence[PolyPiece], length: float, label: str) -> None:
    if not pieces:
        raise PotentialError(f"{label} potential has no pieces")
    slack = _COVER_TOL * max(1.0, length)
    if abs(pieces[0].start) > slack:
        raise PotentialError(f"{label} pieces must start at 0, got {pieces[0].start}")
    if abs(pieces[-1].end - length) > slack:
        raise PotentialError(f"{label} pieces must end at {length}, got {pieces[-1].end}")
    for piece in pieces:
        if not piece.end > piece.start:
            raise PotentialError(f"{label} piece [{piece.start}, {piece.end}) is empty")
        if not piece.coeffs or not all(math.isfinite(c) for c in piece.coeffs):
            raise PotentialError(f"{label} piece [{piece.start}, {piece.end}) has bad coefficients")
    for left, right in zip(pieces, pieces[1:]):
        if abs(left.end - right.start) > slack:
            raise PotentialError(
                f"{label} pieces leave a gap or overlap between {left.end} and {right.start}"
            )


def _piece_at(pieces: Sequence[PolyPiece], x: float) -> PolyPiece:
    # Right-continuous: the piece whose left-closed interval holds x
    starts = [p.start for p in pieces]
    idx = bisect.bisect_right(starts, x) - 1
    return pieces[min(max(idx, 0), len(pieces) - 1)]


def eval_pieces(pieces: Sequence[PolyPiece], x: float) -> float:
    return _piece_at(pieces, x).value(x)


def eval_periodic(spec: PotentialSpec, x: float) -> float:
    a = spec.period
    y = x - a * math.floor(x / a)
    if y >= a or y < 0.0:
        y = 0.0
    return eval_pieces(spec.periodic, y)


def eval_defect(spec: PotentialSpec, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise PotentialError(f"defect potential is defined on [0, 1], got x={x}")
    return eval_pieces(spec.defect, x)


def eval_full(spec: PotentialSpec, x: float) -> float:
    if x <= 0.0:
        return eval_periodic(spec, x)
    if x < 1.0:
        return eval_defect(spec, x)
    return eval_periodic(spec, x - 1.0)


def _pieces_integral(pieces: Sequence[PolyPiece]) -> float:
    return sum(p.integral() for p in pieces)


def mean_difference(spec: PotentialSpec) -> float:
    """Delta q: mean of the defect minus mean of the periodic potential."""
    return _pieces_integral(spec.defect) - _pieces_integral(spec.periodic) / spec.period


def potential_bounds(pieces: Sequence[PolyPiece]) -> Tuple[float, float]:
    lows, highs = zip(*(p.bounds() for p in pieces))
    return min(lows), max(highs)


def max_defect(spec: PotentialSpec) -> float:
    return potential_bounds(spec.defect)[1]


def max_abs_potential(spec: PotentialSpec) -> float:
    lo_p, hi_p = potential_bounds(spec.periodic)
    lo_d, hi_d = potential_bounds(spec.defect)
    return max(abs(lo_p), abs(hi_p), abs(lo_d), abs(hi_d))


def defect_is_constant(spec: PotentialSpec) -> bool:
    if not all(p.is_constant for p in spec.defect):
        return False
    return len({p.coeffs[0] for p in spec.defect}) == 1


def min_piece_width(spec: PotentialSpec) -> float:
    return min(p.width for p in spec.periodic + spec.defect)


def periodized_defect_pieces(spec: PotentialSpec) -> Tuple[PolyPiece, ...]:
    """Defect pieces read as one cell of a period-1 potential (for Dirichlet problems on [0, 1])."""
    return tuple(PolyPiece(p.start, p.end, tuple(p.coeffs)) for p in spec.defect)


def _cell_antiderivative(pieces: Sequence[PolyPiece], y: np.ndarray) -> np.ndarray:
    """Integral from 0 to y for y inside the cell the pieces tile."""
    out = np.zeros_like(y)
    done = 0.0
    for i, piece in enumerate(pieces):
        last = i == len(pieces) - 1
        mask = (y >= piece.start) & ((y < piece.end) | last)
        out[mask] = done + piece.antiderivative(y[mask])
        done += piece.integral()
    return out


def integrate_full(spec: PotentialSpec, xs: Any) -> np.ndarray:
    """Antiderivative F(x) = int_0^x q(y) dy of the glued potential.

    Vectorised over `xs`; used by the box oracle to form exact cell averages.
    """
    x = np.atleast_1d(np.asarray(xs, dtype=float))
    a = spec.period
    per_cell = _pieces_integral(spec.periodic)
    defect_total = _pieces_integral(spec.defect)

    def periodic_anti(y: np.ndarray) -> np.ndarray:
        cells = np.floor(y / a)
        rem = np.clip(y - cells * a, 0.0, a)
        return cells * per_cell + _cell_antiderivative(spec.periodic, rem)

    out = np.empty_like(x)
    left = x <= 0.0
    middle = (x > 0.0) & (x < 1.0)
    right = x >= 1.0
    out[left] = periodic_anti(x[left])
    out[middle] = _cell_antiderivative(spec.defect, x[middle])
    out[right] = defect_total + periodic_anti(x[right] - 1.0)
    return out


def kronig_penney_spec(A: float, a: float, q_def: float) -> PotentialSpec:
    """Square well -A on [0, a/2), +A on [a/2, a) with a constant defect."""
    return PotentialSpec(
        period=a,
        periodic=(PolyPiece(0.0, a / 2, (-A,)), PolyPiece(a / 2, a, (A,))),
        defect=(PolyPiece(0.0, 1.0, (q_def,)),),
    )


def constant_spec(period: float, q_per: float, q_def: float) -> PotentialSpec:
    return PotentialSpec(
        period=period,
        periodic=(PolyPiece(0.0, period, (q_per,)),),
        defect=(PolyPiece(0.0, 1.0, (q_def,)),),
    )


_SPEC_KEYS = {"period", "periodic", "defect"}
_PIECE_KEYS = {"from", "to", "coeffs"}


def _pieces_from_list(items: Any, label: str) -> Tuple[PolyPiece, ...]:
    if not isinstance(items, list):
        raise PotentialError(f"'{label}' must be a list of pieces")
    pieces: List[PolyPiece] = []
    for item in items:
        if not isinstance(item, dict):
            raise PotentialError(f"'{label}' entries must be objects, got {item!r}")
        unknown = set(item) - _PIECE_KEYS
        missing = _PIECE_KEYS - set(item)
        if unknown or missing:
            raise PotentialError(
                f"'{label}' piece keys must be {sorted(_PIECE_KEYS)} "
                f"(unknown={sorted(unknown)}, missing={sorted(missing)})"
            )
        try:
            coeffs = tuple(float(c) for c in item["coeffs"])
            pieces.append(PolyPiece(float(item["from"]), float(item["to"]), coeffs))
        except (TypeError, ValueError) as e:
            raise PotentialError(f"bad number in '{label}' piece {item!r}: {e}") from e
    return tuple(pieces)


def spec_from_dict(doc: Dict[str, Any]) -> PotentialSpec:
    if not isinstance(doc, dict):
        raise PotentialError("potential document must be a JSON object")
    unknown = set(doc) - _SPEC_KEYS
    if unknown:
        raise PotentialError(f"unknown keys in potential document: {sorted(unknown)}")
    missing = _SPEC_KEYS - set(doc)
    if missing:
        raise PotentialError(f"missing keys in potential document: {sorted(missing)}")
    try:
        period = float(doc["period"])
    except (TypeError, ValueError) as e:
        raise PotentialError(f"bad period: {doc['period']!r}") from e
    return PotentialSpec(
        period=period,
        periodic=_pieces_from_list(doc["periodic"], "periodic"),
        defect=_pieces_from_list(doc["defect"], "defect"),
    )


def spec_to_dict(spec: PotentialSpec) -> Dict[str, Any]:
    def dump(pieces: Sequence[PolyPiece]) -> List[Dict[str, Any]]:
        return [{"from": p.start, "to": p.end, "coeffs": list(p.coeffs)} for p in pieces]

    return {"period": spec.period, "periodic": dump(spec.periodic), "defect": dump(spec.defect)}


def load_spec(path: str | Path) -> PotentialSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise PotentialError(f"cannot read potential file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise PotentialError(f"potential file {path} is not valid JSON: {e}") from e
    return spec_from_dict(doc)
