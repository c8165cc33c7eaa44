import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import sympy
from mpmath import mp
from sympy import Integer, Rational, expand, minimal_polynomial, sqrt
from sympy.polys.polyerrors import NotAlgebraic
from sympy.ntheory.continued_fraction import (
    continued_fraction_convergents,
    continued_fraction_iterator,
    continued_fraction_periodic,
)
from sympy.solvers.diophantine.diophantine import diop_DN

import config
from errors import DiophantineError
from potential import PotentialSpec, mean_difference

# Largest denominator scanned when testing residual bounds numerically
MAX_SCAN_DENOMINATOR = 10 ** 6
# Periods equal to a fraction with at most this denominator take the rational branch
MAX_RATIONAL_DENOMINATOR = 10 ** 4

EXCEPTIONAL = "exceptional"
NON_EXCEPTIONAL = "non-exceptional"
NO_HIT = "no-hit-below-kmax"
CANDIDATE = "candidate"


@dataclass(frozen=True)
class QuadraticIrrational:
    """Root a of n1 x^2 + n2 x + n3 picked by `branch`: a = (-n2 + branch sqrt(d)) / (2 n1)."""

    n1: int
    n2: int
    n3: int
    branch: int = 1

    def __post_init__(self) -> None:
        if self.n1 == 0:
            raise DiophantineError("n1 must be nonzero for a quadratic")
        if self.branch not in (1, -1):
            raise DiophantineError(f"branch must be +1 or -1, got {self.branch}")
        if math.gcd(math.gcd(self.n1, self.n2), self.n3) != 1:
            raise DiophantineError(f"coefficients {self.n1}, {self.n2}, {self.n3} are not coprime")
        d = self.d
        if d <= 0 or math.isqrt(d) ** 2 == d:
            raise DiophantineError(f"discriminant {d} must be positive and not a square")

    @property
    def d(self) -> int:
        return self.n2 * self.n2 - 4 * self.n1 * self.n3

    @property
    def rational_part(self) -> Rational:
        return Rational(-self.n2, 2 * self.n1)

    @property
    def surd_part(self) -> Rational:
        return Rational(self.branch, 2 * self.n1)

    @property
    def exact(self) -> sympy.Expr:
        return self.rational_part + self.surd_part * sqrt(self.d)

    @property
    def conjugate(self) -> sympy.Expr:
        return self.rational_part - self.surd_part * sqrt(self.d)

    @property
    def derivative_at_root(self) -> sympy.Expr:
        """f'(a) = 2 n1 a + n2 = branch * sqrt(d)."""
        return self.branch * sqrt(self.d)

    def value(self, dps: int = config.MP_DPS) -> Any:
        with mp.workdps(dps):
            return mp.mpf(self.rational_part.p) / self.rational_part.q + (
                mp.mpf(self.surd_part.p) / self.surd_part.q
            ) * mp.sqrt(self.d)

    def __float__(self) -> float:
        return float(self.exact.evalf(30))

    def form(self, N: int, M: int) -> int:
        return self.n1 * N * N + self.n2 * N * M + self.n3 * M * M

    @classmethod
    def from_expr(cls, expr: Any) -> "QuadraticIrrational":
        """Quadratic irrational from an exact sympy number via its minimal polynomial."""
        x = sympy.Symbol("x")
        try:
            poly = sympy.Poly(minimal_polynomial(sympy.sympify(expr), x), x)
        except (NotAlgebraic, NotImplementedError, ValueError) as e:
            raise DiophantineError(f"{expr} is not an algebraic number sympy can handle: {e}") from e
        if poly.degree() != 2:
            raise DiophantineError(f"{expr} has degree {poly.degree()}, not a quadratic irrational")
        n1, n2, n3 = (int(c) for c in poly.all_coeffs())
        if n1 < 0:
            n1, n2, n3 = -n1, -n2, -n3
        target = float(sympy.N(expr, 30))
        plus = cls(n1, n2, n3, 1)
        minus = cls(n1, n2, n3, -1)
        return plus if abs(float(plus) - target) < abs(float(minus) - target) else minus


@dataclass(frozen=True)
class ApproxHit:
    """Integer pair with residual M (N - a M); form_value = n1 N^2 + n2 N M + n3 M^2 for quadratic a."""

    N: int
    M: int
    residual: Any
    form_value: int | None = None

    def residual_float(self) -> float:
        return float(self.residual)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "M": self.M,
            "residual": str(self.residual),
            "residual_value": self.residual_float(),
            "form_value": self.form_value,
        }


def exact_residual(q: QuadraticIrrational, N: int, M: int) -> sympy.Expr:
    return expand(M * (N - q.exact * M))


def factorization_holds(q: QuadraticIrrational, hit: ApproxHit) -> bool:
    """residual * n1 * (N + (a + n2/n1) M) == j * M, checked exactly in Q(sqrt d)."""
    lhs = hit.residual * q.n1 * (hit.N + (q.exact + Rational(q.n2, q.n1)) * hit.M)
    return expand(lhs - hit.form_value * hit.M) == 0


def _interval_cf(lo: Any, hi: Any, n_terms: int) -> List[int]:
    # Terms shared by every number in [lo, hi]
    terms: List[int] = []
    while len(terms) < n_terms:
        a_lo, a_hi = int(mp.floor(lo)), int(mp.floor(hi))
        if a_lo != a_hi:
            break
        terms.append(a_lo)
        f_lo, f_hi = lo - a_lo, hi - a_lo
        if f_lo <= 0:
            break
        lo, hi = 1 / f_hi, 1 / f_lo
    return terms


def _expand_periodic(cf: List[Any], n_terms: int) -> List[int]:
    if cf and isinstance(cf[-1], list):
        head, cycle = cf[:-1], cf[-1]
        out = [int(t) for t in head]
        i = 0
        while len(out) < n_terms:
            out.append(int(cycle[i % len(cycle)]))
            i += 1
        return out[:n_terms]
    return [int(t) for t in cf[:n_terms]]


def periodic_part(q: QuadraticIrrational) -> Tuple[List[int], List[int]]:
    """(pre-period, period) of the exact expansion."""
    cf = continued_fraction_periodic(-q.n2, 2 * q.n1, q.d, q.branch)
    return [int(t) for t in cf[:-1]], [int(t) for t in cf[-1]]


def continued_fraction(a: Any, n_terms: int) -> List[int]:
    """Continued fraction coefficients a_0, a_1, ... of a.

    Quadratic irrationals are expanded exactly; rationals terminate early.
    Floating inputs only yield the terms their precision determines, and
    asking for more raises DiophantineError.
    """
    if n_terms < 1:
        raise DiophantineError(f"n_terms must be positive, got {n_terms}")
    if isinstance(a, QuadraticIrrational):
        return _expand_periodic(continued_fraction_periodic(-a.n2, 2 * a.n1, a.d, a.branch), n_terms)
    if isinstance(a, (int, Fraction)) or (isinstance(a, sympy.Basic) and a.is_Rational):
        r = Rational(a.numerator, a.denominator) if isinstance(a, Fraction) else Rational(a)
        return [int(t) for t in islice(continued_fraction_iterator(r), n_terms)]
    if isinstance(a, sympy.Basic):
        try:
            return continued_fraction(QuadraticIrrational.from_expr(a), n_terms)
        except DiophantineError:
            pass
        with mp.workdps(config.MP_DPS):
            mid = mp.mpf(str(sympy.N(a, config.MP_DPS + 5)))
            width = mp.mpf(10) ** (-(config.MP_DPS - 5)) * max(1, abs(mid))
            terms = _interval_cf(mid - width, mid + width, n_terms)
    else:
        with mp.workdps(config.MP_DPS):
            if isinstance(a, float):
                width = mp.mpf(math.ulp(a))
                mid = mp.mpf(a)
            else:
                mid = mp.mpf(a)
                width = mp.mpf(2) ** (-mp.prec) * max(1, abs(mid))
            terms = _interval_cf(mid - width, mid + width, n_terms)
    if len(terms) < n_terms:
        raise DiophantineError(f"input precision determines only {len(terms)} of {n_terms} terms")
    return terms


def convergents(cf: Sequence[int]) -> List[Tuple[int, int]]:
    """(P_k, Q_k) from P_k = a_k P_{k-1} + P_{k-2}, and likewise for Q_k."""
    if not cf:
        raise DiophantineError("empty continued fraction")
    return [(int(r.p), int(r.q)) for r in map(Rational, continued_fraction_convergents(list(cf)))]


def _numeric(a: Any) -> Any:
    if isinstance(a, QuadraticIrrational):
        return a.value()
    if isinstance(a, sympy.Basic):
        return mp.mpf(str(sympy.N(a, config.MP_DPS + 5)))
    if isinstance(a, Fraction):
        return mp.mpf(a.numerator) / a.denominator
    return mp.mpf(a)


def residuals(a: Any, hits: Sequence[ApproxHit] | Sequence[Tuple[int, int]]) -> List[Any]:
    """M (N - a M) for each pair: exact in Q(sqrt d) for quadratic a, MP_DPS digits otherwise."""
    pairs = [(h.N, h.M) if isinstance(h, ApproxHit) else (int(h[0]), int(h[1])) for h in hits]
    if isinstance(a, QuadraticIrrational):
        return [exact_residual(a, N, M) for N, M in pairs]
    if isinstance(a, sympy.Basic) and a.is_Rational or isinstance(a, (int, Fraction)):
        r = Rational(a.numerator, a.denominator) if isinstance(a, Fraction) else Rational(a)
        return [M * (N - r * M) for N, M in pairs]
    with mp.workdps(config.MP_DPS):
        value = _numeric(a)
        return [M * (N - value * M) for N, M in pairs]


def convergent_residuals(a: Any, n_terms: int) -> List[Tuple[int, int, Any]]:
    """(P_k, Q_k, Q_k (P_k - a Q_k)) for the first n_terms convergents."""
    pairs = convergents(continued_fraction(a, n_terms))
    return [(P, Q, r) for (P, Q), r in zip(pairs, residuals(a, pairs))]


def min_scaled_residual(a: float, M_max: int = MAX_SCAN_DENOMINATOR) -> float:
    """min over 1 <= M <= M_max of |M (N - a M)| with N the nearest integer to a M, zeros skipped."""
    M = np.arange(1, min(M_max, MAX_SCAN_DENOMINATOR) + 1, dtype=float)
    scaled = M * (np.rint(a * M) - a * M)
    scaled = np.abs(scaled[scaled != 0.0])
    return float(scaled.min()) if scaled.size else 0.0


def bounded_cf_floor(m: int) -> float:
    """Residual floor 1/(m + 2) for numbers whose CF coefficients never exceed m."""
    return 1.0 / (m + 2)


def automorph(q: QuadraticIrrational) -> np.ndarray:
    """Proper automorph of the form, oriented so that (a, 1) is its dominant eigenvector.

    Built from the least t^2 - d u^2 = 4 with u > 0; the Pell solution of
    x^2 - d y^2 = 1 gives (2x, 2y) as an upper bound for the search.
    """
    d = q.d
    (x1, y1), = [s for s in diop_DN(d, 1) if s[1] > 0][:1]
    t, u = 2 * int(x1), 2 * int(y1)
    for cand in range(1, u + 1):
        t2 = d * cand * cand + 4
        root = math.isqrt(t2)
        if root * root == t2:
            t, u = root, cand
            break
    if (t - q.n2 * u) % 2:
        raise DiophantineError(f"automorph entries are not integral for {q}")
    forward = [[(t - q.n2 * u) // 2, -q.n3 * u], [q.n1 * u, (t + q.n2 * u) // 2]]
    backward = [[(t + q.n2 * u) // 2, q.n3 * u], [-q.n1 * u, (t - q.n2 * u) // 2]]
    # Eigenvalue of `forward` on (a, 1) is (t + branch u sqrt(d)) / 2
    return np.array(forward if q.branch > 0 else backward, dtype=object)


def _apply(T: np.ndarray, N: int, M: int) -> Tuple[int, int]:
    return int(T[0, 0] * N + T[0, 1] * M), int(T[1, 0] * N + T[1, 1] * M)


def _inverse(T: np.ndarray) -> np.ndarray:
    return np.array([[T[1, 1], -T[0, 1]], [-T[1, 0], T[0, 0]]], dtype=object)


def _canonical(T: np.ndarray, T_inv: np.ndarray, N: int, M: int) -> Tuple[int, int]:
    """Orbit representative: smallest positive M on the branch where N/M tends to a."""
    for _ in range(3):
        N, M = _apply(T, N, M)
    if M < 0 or (M == 0 and N < 0):
        N, M = -N, -M
    while True:
        pN, pM = _apply(T_inv, N, M)
        if not (1 <= pM < M):
            return N, M
        N, M = pN, pM


def search_bound(q: QuadraticIrrational, j: int) -> int:
    return math.ceil(math.sqrt(abs(j) * (abs(q.n1) + abs(q.n2) + abs(q.n3)) * 10))


def _small_solutions(q: QuadraticIrrational, j: int, M_min: int) -> List[Tuple[int, int]]:
    B = search_bound(q, j)
    out = []
    for M in range(M_min, B + 1):
        for N in range(-B, B + 1):
            if q.form(N, M) == j:
                out.append((N, M))
    return out


def representable(q: QuadraticIrrational, j: int) -> bool:
    return bool(_small_solutions(q, j, 0))


def form_solutions(q: QuadraticIrrational, j: int, count: int) -> List[List[ApproxHit]]:
    """Solutions of n1 N^2 + n2 N M + n3 M^2 = j, one list of `count` pairs per orbit.

    Fundamental solutions come from a bounded search and are carried along
    by the automorph; orbits are ordered by their representative (M, N).
    """
    if count < 1:
        raise DiophantineError(f"count must be positive, got {count}")
    if j == 0:
        return []
    T = automorph(q)
    T_inv = _inverse(T)
    seeds = sorted({_canonical(T, T_inv, N, M) for N, M in _small_solutions(q, j, 1)}, key=lambda p: (p[1], p[0]))
    orbits: List[List[ApproxHit]] = []
    for N, M in seeds:
        hits = []
        for _ in range(count):
            hits.append(ApproxHit(N, M, exact_residual(q, N, M), q.form(N, M)))
            N, M = _apply(T, N, M)
        orbits.append(hits)
    return orbits


def fa_quadratic(q: QuadraticIrrational, j_max: int) -> List[Tuple[int, sympy.Expr]]:
    """Points j / f'(a) of F_a with 0 < |j| <= j_max, by exhaustive search of the form's values."""
    if j_max < 1:
        raise DiophantineError(f"j_max must be positive, got {j_max}")
    B = search_bound(q, j_max)
    N = np.arange(-B, B + 1, dtype=np.int64)[:, None]
    M = np.arange(0, B + 1, dtype=np.int64)[None, :]
    values = q.n1 * N * N + q.n2 * N * M + q.n3 * M * M
    found = sorted({int(v) for v in values[(np.abs(values) <= j_max) & (values != 0)]})
    return [(j, Integer(j) / q.derivative_at_root) for j in found]


def fa_rational() -> List[Tuple[int, sympy.Expr]]:
    """F_a of a rational number is {0}."""
    return [(0, Integer(0))]


def _mobius(m: Tuple[int, int, int, int], z: sympy.Expr) -> sympy.Expr:
    m1, m2, m3, m4 = m
    return (m1 * z + m2) / (m3 * z + m4)


def _check_unimodular(m: Tuple[int, int, int, int]) -> None:
    m1, m2, m3, m4 = m
    if m1 * m4 - m2 * m3 != 1:
        raise DiophantineError(f"quadruple {m} has determinant {m1 * m4 - m2 * m3}, expected +1")


def mobius_preimage(a: sympy.Expr, m: Tuple[int, int, int, int]) -> sympy.Expr:
    """b with a = (m1 b + m2) / (m3 b + m4)."""
    _check_unimodular(m)
    m1, m2, m3, m4 = m
    return sympy.radsimp((m4 * a - m2) / (m1 - m3 * a))


def modular_transform(
    hits: Sequence[ApproxHit], m: Tuple[int, int, int, int], b: QuadraticIrrational | sympy.Expr, a: Any = None
) -> List[ApproxHit]:
    """Carry pairs approximating a to pairs approximating b, where a = (m1 b + m2)/(m3 b + m4).

    N' = m4 N - m2 M and M' = m1 M - m3 N; residuals are taken with respect to b.
    """
    _check_unimodular(m)
    m1, m2, m3, m4 = m
    b_exact = b.exact if isinstance(b, QuadraticIrrational) else sympy.sympify(b)
    if a is not None:
        a_exact = a.exact if isinstance(a, QuadraticIrrational) else sympy.sympify(a)
        if sympy.simplify(_mobius(m, b_exact) - a_exact) != 0:
            raise DiophantineError(f"{a_exact} is not the image of {b_exact} under {m}")
    out = []
    for hit in hits:
        N, M = m4 * hit.N - m2 * hit.M, m1 * hit.M - m3 * hit.N
        residual = expand(M * (N - b_exact * M))
        form = b.form(N, M) if isinstance(b, QuadraticIrrational) else None
        out.append(ApproxHit(N, M, residual, form))
    return out


def dirichlet_asymptote(L: float, mean_V: float, n: int) -> float:
    """n^2 pi^2 / L^2 + mean of V."""
    return n * n * math.pi ** 2 / (L * L) + mean_V


def kp_threshold(j: int, q: QuadraticIrrational) -> float:
    """Contrast A above which the exceptional Kronig-Penney gaps of offset j trap the point: 2 pi^2 j / (a sqrt(3 d))."""
    return 2 * math.pi ** 2 * j / (float(q) * math.sqrt(3 * q.d))


def resonant_defect_level(j: int, q: QuadraticIrrational, mean_periodic: float = 0.0) -> float:
    """Mean defect level whose offset y* = a dq / (2 pi^2) equals j / f'(a)."""
    y = float(Integer(j) / q.derivative_at_root)
    return mean_periodic + 2 * math.pi ** 2 * y / float(q)


@dataclass
class ExceptionalReport:
    a: float
    delta_q: float
    y_star: float
    delta: float
    status: str
    j: int | None = None
    margin: float = 0.0
    precision_warning: bool = False
    normalization_consistent: bool = True
    orbits: List[List[ApproxHit]] = field(default_factory=list)
    predictions: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def exceptional(self) -> bool:
        return self.status == EXCEPTIONAL

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "delta_q": self.delta_q,
            "y_star": self.y_star,
            "delta": self.delta,
            "status": self.status,
            "j": self.j,
            "margin": self.margin,
            "precision_warning": self.precision_warning,
            "normalization_consistent": self.normalization_consistent,
            "orbits": [[h.to_dict() for h in orbit] for orbit in self.orbits],
            "predictions": self.predictions,
        }


def _predictions(spec: PotentialSpec, orbits: List[List[ApproxHit]], delta_q: float) -> List[Dict[str, Any]]:
    a = spec.period
    mean_per = sum(p.integral() for p in spec.periodic) / a
    mean_def = mean_per + delta_q
    out = []
    for orbit_id, orbit in enumerate(orbits):
        for hit in orbit:
            out.append(
                {
                    "orbit": orbit_id,
                    "gap_index": hit.N,
                    "defect_index": hit.M,
                    "gap_center_estimate": (hit.N * math.pi / a) ** 2 + mean_per,
                    "rdef_point_estimate": (hit.M * math.pi) ** 2 + mean_def,
                    "center_offset": 2 * math.pi ** 2 / a * hit.residual_float() - delta_q,
                }
            )
    return out


def _quadratic_analysis(spec: PotentialSpec, q: QuadraticIrrational, report: ExceptionalReport, k_max: int) -> None:
    root_d = math.sqrt(q.d)
    s = report.y_star * q.branch * root_d
    candidates = [j for j in {math.floor(s), math.ceil(s)} if j != 0 and representable(q, j)]
    tolerance = report.delta * root_d
    if candidates:
        j = min(candidates, key=lambda c: (abs(s - c), c))
        distance = abs(s - j)
        report.j = j
        report.margin = tolerance - distance
        if distance < tolerance:
            report.status = EXCEPTIONAL
            report.orbits = form_solutions(q, j, k_max)
            report.predictions = _predictions(spec, report.orbits, report.delta_q)
        else:
            report.status = NON_EXCEPTIONAL
    else:
        report.status = NON_EXCEPTIONAL
        report.margin = -tolerance
    report.precision_warning = abs(report.margin) / root_d < report.delta / 10


def _rational_analysis(report: ExceptionalReport) -> None:
    """F_a = {0} for rational a: only a vanishing mean shift stays in the gaps."""
    report.j = 0
    report.margin = report.delta - abs(report.y_star)
    report.status = EXCEPTIONAL if abs(report.y_star) < report.delta else NON_EXCEPTIONAL
    report.precision_warning = abs(report.margin) < report.delta / 10


def _numeric_analysis(spec: PotentialSpec, report: ExceptionalReport, k_max: int) -> None:
    a = spec.period
    nearest = Fraction(a).limit_denominator(MAX_RATIONAL_DENOMINATOR)
    if abs(float(nearest) - a) <= 4 * math.ulp(a):
        _rational_analysis(report)
        return
    try:
        cf = continued_fraction(a, k_max + 1)
    except DiophantineError as e:
        # The float pins down too few terms to tell a from a rational
        print(f"⚠️ Period {a!r} treated as rational: {e}", file=sys.stderr)
        _rational_analysis(report)
        return
    M_max = min(convergents(cf)[-1][1], MAX_SCAN_DENOMINATOR)
    M = np.arange(1, M_max + 1, dtype=float)
    N = np.rint(a * M + report.y_star / M)
    res = M * (N - a * M)
    close = np.abs(res - report.y_star) < report.delta
    hits = [ApproxHit(int(n), int(m), float(r)) for n, m, r in zip(N[close], M[close], res[close])]
    report.orbits = [hits] if hits else []
    report.status = CANDIDATE if hits else NO_HIT
    report.margin = report.delta - float(np.min(np.abs(res - report.y_star)))
    report.precision_warning = abs(report.margin) < report.delta / 10
    if hits:
        report.predictions = _predictions(spec, report.orbits, report.delta_q)


def exceptional_analysis(
    spec: PotentialSpec, a_exact: QuadraticIrrational | sympy.Expr | None = None, delta: float = 0.1, k_max: int = 8
) -> ExceptionalReport:
    """Decide whether y* = a dq / (2 pi^2) lies within delta of F_a and predict the exceptional gaps.

    Each exceptional pair (N, M) predicts gap G_N holding the defect
    Dirichlet level of index M, with centre offset
    (2 pi^2 / a) M (N - a M) - dq.
    """
    if not delta > 0:
        raise DiophantineError(f"delta must be positive, got {delta}")
    a = spec.period
    delta_q = mean_difference(spec)
    y_star = a * delta_q / (2 * math.pi ** 2)
    report = ExceptionalReport(a=a, delta_q=delta_q, y_star=y_star, delta=delta, status=NON_EXCEPTIONAL)

    if a_exact is not None and not isinstance(a_exact, QuadraticIrrational):
        expr = sympy.sympify(a_exact)
        if expr.is_Rational:
            if abs(float(expr) - a) > 1e-9 * max(1.0, a):
                raise DiophantineError(f"exact period {expr} does not match potential period {a}")
            _rational_analysis(report)
            return report
        a_exact = QuadraticIrrational.from_expr(expr)

    if isinstance(a_exact, QuadraticIrrational):
        if abs(float(a_exact) - a) > 1e-9 * max(1.0, a):
            raise DiophantineError(f"exact period {a_exact.exact} does not match potential period {a}")
        _quadratic_analysis(spec, a_exact, report, k_max)
    else:
        _numeric_analysis(spec, report, k_max)

    offsets = [abs(p["center_offset"]) for p in report.predictions if p["orbit"] == 0]
    if len(offsets) >= 2:
        report.normalization_consistent = offsets[-1] < offsets[0]
        if not report.normalization_consistent:
            print("⚠️ Predicted centre offsets do not shrink along the orbit", file=sys.stderr)
    if report.precision_warning:
        print(f"⚠️ Decision margin {report.margin:.3g} is within delta/10 of the threshold", file=sys.stderr)
    return report
