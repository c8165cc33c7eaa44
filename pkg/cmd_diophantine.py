import sys
from typing import Any, Dict, List, Tuple

import sympy

from diophantine import (
    QuadraticIrrational,
    automorph,
    bounded_cf_floor,
    continued_fraction,
    convergent_residuals,
    fa_quadratic,
    fa_rational,
    form_solutions,
    min_scaled_residual,
    periodic_part,
    representable,
)
from errors import ConfigError, DiophantineError
from utils_formatting import format_json


def parse_real(text: str) -> Any:
    """A decimal stays a float; anything else (1/3, sqrt(2), pi) is kept exact."""
    try:
        expr = sympy.sympify(text)
    except (sympy.SympifyError, SyntaxError, TypeError) as e:
        raise ConfigError(f"cannot parse --real {text!r}: {e}") from e
    if not expr.is_real or not expr.is_number:
        raise ConfigError(f"--real {text!r} is not a real number")
    if expr.is_Float:
        return float(text)
    return expr


def _residual_table(a: Any, n_terms: int) -> List[Dict[str, Any]]:
    return [
        {"P": P, "Q": Q, "residual": str(r), "residual_value": float(r)}
        for P, Q, r in convergent_residuals(a, n_terms)
    ]


def quadratic_report(q: QuadraticIrrational, j: int, j_max: int, k_max: int) -> Dict[str, Any]:
    pre, period = periodic_part(q)
    limit = sympy.Integer(j) / q.derivative_at_root if j else sympy.Integer(0)
    orbits = form_solutions(q, j, k_max) if j else []
    return {
        "a": str(q.exact),
        "a_value": float(q),
        "coefficients": [q.n1, q.n2, q.n3],
        "discriminant": q.d,
        "continued_fraction": {"pre_period": pre, "period": period},
        "automorph": [[int(v) for v in row] for row in automorph(q)],
        "F_a": [{"j": jj, "value": str(v), "value_float": float(v)} for jj, v in fa_quadratic(q, j_max)],
        "j": j,
        "representable": representable(q, j) if j else False,
        "residual_limit": str(limit),
        "residual_limit_value": float(limit),
        "orbits": [[hit.to_dict() for hit in orbit] for orbit in orbits],
        "convergent_residuals": _residual_table(q, k_max),
    }


def real_report(a: Any, k_max: int) -> Dict[str, Any]:
    try:
        cf = continued_fraction(a, k_max)
    except DiophantineError as e:
        print(f"⚠️ {e}; reporting the terms that are determined", file=sys.stderr)
        cf = []
        for n in range(k_max - 1, 0, -1):
            try:
                cf = continued_fraction(a, n)
                break
            except DiophantineError:
                continue
    is_rational = isinstance(a, sympy.Basic) and a.is_Rational
    out: Dict[str, Any] = {
        "a": str(a),
        "a_value": float(a),
        "continued_fraction": cf,
        "rational": bool(is_rational),
        "min_scaled_residual": min_scaled_residual(float(a)),
    }
    if len(cf) > 1:
        largest = max(cf[1:])
        out["max_partial_quotient"] = largest
        out["bounded_cf_floor"] = bounded_cf_floor(largest)
        out["convergent_residuals"] = _residual_table(a, len(cf))
    if is_rational:
        out["F_a"] = [{"j": j, "value": str(v), "value_float": float(v)} for j, v in fa_rational()]
    return out


def _source(cfg: Any) -> Tuple[str, Any]:
    if cfg.quadratic is not None:
        n1, n2, n3 = cfg.quadratic
        return "quadratic", QuadraticIrrational(n1, n2, n3, cfg.branch)
    a = parse_real(cfg.real)
    if isinstance(a, sympy.Basic) and not a.is_Rational:
        try:
            return "quadratic", QuadraticIrrational.from_expr(a)
        except DiophantineError:
            pass
    return "real", a


def process(cfg: Any) -> Tuple[bool, str]:
    try:
        kind, a = _source(cfg)
    except DiophantineError as e:
        raise ConfigError(str(e)) from e
    if kind == "quadratic":
        print(f"📋 a = {a.exact}, d = {a.d}", file=sys.stderr)
        report = quadratic_report(a, cfg.j, cfg.j_max, cfg.k_max)
    else:
        print(f"📋 a = {a} (no quadratic structure used)", file=sys.stderr)
        report = real_report(a, cfg.k_max)
    return True, format_json({"params": cfg.header(), "kind": kind, **report})
