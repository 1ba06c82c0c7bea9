"""Arithmetic of the rank-two lattice alpha*Z + omega*Z.

Exact inputs (sympy expressions, or strings such as ``"sqrt2"``, ``"golden"``,
``"3/2"``) are classified exactly; plain floats fall back to a bounded
denominator search and are labelled heuristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import mpmath
import numpy as np
import sympy as sp

from .core import Params
from .errors import InfimumZero, Infeasible, NotFound, ValidationError

Number = Union[float, int, sp.Expr, str]

DENOMINATOR_CAP = 10**6
INT64_MAX = 2**63 - 1
SEARCH_BOUND_CAP = 10**8
_DPS = 60

_NAMED = {
    "sqrt2": sp.sqrt(2),
    "sqrt3": sp.sqrt(3),
    "sqrt5": sp.sqrt(5),
    "golden": (1 + sp.sqrt(5)) / 2,
    "pi": sp.pi,
    "e": sp.E,
}


def parse_number(value: Number) -> Union[float, sp.Expr]:
    """Strings and sympy objects become exact expressions; numbers stay floats."""
    if isinstance(value, sp.Basic):
        return value
    if isinstance(value, str):
        text = value.strip().lower()
        if text in _NAMED:
            return _NAMED[text]
        try:
            expr = sp.sympify(text.replace("^", "**"), rational=True)
        except (sp.SympifyError, TypeError, SyntaxError) as exc:
            raise ValidationError(f"cannot parse ratio {value!r}") from exc
        if not expr.is_number:
            raise ValidationError(f"ratio {value!r} is not a number")
        return expr
    if isinstance(value, (int, np.integer)):
        return sp.Integer(int(value))
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    return float(value)


def is_exact(value) -> bool:
    return isinstance(value, sp.Basic)


@lru_cache(maxsize=256)
def _exact_digits(value: sp.Expr, dps: int) -> str:
    return str(sp.N(value, dps + 10))


def to_mpf(value, dps: int = _DPS):
    if is_exact(value):
        return mpmath.mpf(_exact_digits(value, dps))
    return mpmath.mpf(value)


def _positive(value, name):
    v = float(value)
    if not (np.isfinite(v) and v > 0):
        raise ValidationError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class Witness:
    k: int
    ell: int
    value: float


@dataclass(frozen=True)
class RatioClass:
    """Either ``rational`` with coprime ``c/d`` equal to alpha/omega, or an
    irrational ratio carrying lattice witnesses ``k*alpha + ell*omega`` of
    strictly decreasing modulus."""

    variant: str
    c: Optional[int] = None
    d: Optional[int] = None
    convergents: Tuple[Witness, ...] = ()
    heuristic: bool = False

    @property
    def is_rational(self) -> bool:
        return self.variant == "rational"

    def to_dict(self) -> dict:
        if self.is_rational:
            out = {"rational": {"c": self.c, "d": self.d}}
        else:
            out = {"irrational": {"witnesses": [[w.k, w.ell, w.value] for w in self.convergents]}}
        out["heuristic"] = self.heuristic
        return out


# --- continued fractions ----------------------------------------------------

def continued_fraction(x, max_terms: int = 64, dps: int = _DPS) -> List[int]:
    """Partial quotients of ``x``; stops when precision or 64-bit range runs out."""
    with mpmath.workdps(dps):
        y = to_mpf(x, dps) if not isinstance(x, mpmath.mpf) else x
        tol = mpmath.mpf(10) ** (-(dps // 2))
        terms: List[int] = []
        for _ in range(max_terms):
            a = int(mpmath.floor(y))
            terms.append(a)
            frac = y - a
            if abs(frac) < tol:
                break
            y = 1 / frac
    return terms


def convergents(terms: List[int]) -> List[Tuple[int, int]]:
    """(p, q) pairs of the convergents; truncated before 64-bit overflow."""
    out = []
    p_prev, p = 1, terms[0]
    q_prev, q = 0, 1
    out.append((p, q))
    for a in terms[1:]:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        if abs(p) > INT64_MAX or q > INT64_MAX:
            break
        out.append((p, q))
    return out


def _exact_ratio(alpha, omega):
    if is_exact(alpha) and is_exact(omega):
        return sp.nsimplify(sp.simplify(alpha / omega))
    return None


def lattice_value(k: int, ell: int, alpha, omega) -> float:
    """k*alpha + ell*omega evaluated without cancellation loss."""
    with mpmath.workdps(_DPS):
        return float(k * to_mpf(alpha) + ell * to_mpf(omega))


def classify_ratio(alpha: Number, omega: Number, denominator_cap: int = DENOMINATOR_CAP,
                   n_witnesses: int = 10) -> RatioClass:
    """Classify alpha/omega as rational ``c/d`` or irrational with witnesses."""
    alpha, omega = parse_number(alpha), parse_number(omega)
    _positive(alpha, "alpha")
    _positive(omega, "omega")
    exact = _exact_ratio(alpha, omega)
    heuristic = exact is None or exact.is_rational is None
    if exact is not None and exact.is_rational:
        r = sp.Rational(exact)
        return RatioClass("rational", c=int(r.p), d=int(r.q))
    if heuristic:
        x = float(alpha) / float(omega)
        frac = Fraction(x).limit_denominator(denominator_cap)
        if abs(float(frac) - x) <= 1e-13 * max(1.0, x):
            return RatioClass("rational", c=frac.numerator, d=frac.denominator, heuristic=True)
    ratio = exact if exact is not None else float(alpha) / float(omega)
    terms = continued_fraction(ratio, max_terms=n_witnesses + 2,
                               dps=_DPS if not heuristic else 17)
    wits: List[Witness] = []
    for p, q in convergents(terms):
        # q*alpha - p*omega = omega*(q*r - p)
        val = lattice_value(q, -p, alpha, omega)
        if val == 0.0 or (wits and abs(val) >= abs(wits[-1].value)):
            continue
        wits.append(Witness(q, -p, val))
        if len(wits) >= n_witnesses:
            break
    return RatioClass("irrational", convergents=tuple(wits), heuristic=heuristic)


# --- lattice operations -----------------------------------------------------

def dist_to_lattice(s: float, omega: float) -> float:
    """min over integers k of |s - omega*k|."""
    _positive(omega, "omega")
    s = float(s)
    omega = float(omega)
    return abs(s - omega * round(s / omega))


def min_positive_element(ratio: RatioClass, omega: float) -> float:
    """Smallest positive element of alpha*Z + omega*Z, equal to omega/d."""
    _positive(omega, "omega")
    if not ratio.is_rational:
        raise InfimumZero("the ratio alpha/omega is irrational, so positive lattice "
                          "elements accumulate at zero; use approx_below for witnesses")
    return float(omega) / ratio.d


def approx_below(alpha: Number, omega: Number, epsilon: float, k_bound: int) -> Tuple[int, int, float]:
    """Integers (k, ell) with 0 < k*alpha + ell*omega < epsilon and |k| <= k_bound.

    Scans the convergents p/q of alpha/omega that lie above the ratio, which
    give positive values p*omega - q*alpha, and returns the first one below
    ``epsilon``.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    alpha, omega = parse_number(alpha), parse_number(omega)
    _positive(alpha, "alpha")
    _positive(omega, "omega")
    exact = _exact_ratio(alpha, omega)
    ratio = exact if exact is not None else float(alpha) / float(omega)
    terms = continued_fraction(ratio, max_terms=200)
    with mpmath.workdps(_DPS):
        r = to_mpf(ratio)
        for p, q in convergents(terms):
            if q > k_bound:
                break
            if mpmath.mpf(p) / q <= r:
                continue
            val = lattice_value(-q, p, alpha, omega)
            if 0 < val < epsilon:
                return -q, p, val
    raise NotFound(f"no positive lattice element below {epsilon} with |k| <= {k_bound}; "
                   "the ratio may be rational or the bound too small")


def _has_odd(lmin: np.ndarray, lmax: np.ndarray) -> np.ndarray:
    """Whether [lmin, lmax] contains an odd integer."""
    return (np.floor_divide(lmax + 1, 2) - np.floor_divide(lmin, 2)) > 0


def _min_mod_hit(a: int, m: int, lo: int, hi: int) -> Optional[int]:
    """Smallest x >= 0 with lo <= (a*x mod m) <= hi, for 0 <= lo <= hi < m.

    Euclid-like recursion on (a, m); depth is logarithmic in m.
    """
    a %= m
    if lo == 0:
        return 0
    if a == 0:
        return None
    x = -(-lo // a)
    if a * x <= hi:
        return x
    # a*x - m*y in [lo, hi] needs (m*y mod a) in [(-hi) mod a, (-lo) mod a]
    y = _min_mod_hit(m % a, a, (-hi) % a, (-lo) % a)
    if y is None:
        return None
    x = -(-(m * y + lo) // a)
    return x if a * x - m * y <= hi else None


_SCALE = 10**40


def _first_rotation_hit(beta, gamma, delta) -> Optional[int]:
    """Smallest k >= 0 with frac(k*beta + gamma) in [0, delta] (scaled integers)."""
    a = int(mpmath.nint(beta * _SCALE)) % _SCALE
    g = int(mpmath.nint(gamma * _SCALE)) % _SCALE
    d = int(mpmath.floor(delta * _SCALE))
    lo = (-g) % _SCALE
    hi = lo + d
    if hi < _SCALE:
        return _min_mod_hit(a, _SCALE, lo, hi)
    hits = [_min_mod_hit(a, _SCALE, lo, _SCALE - 1), _min_mod_hit(a, _SCALE, 0, hi - _SCALE)]
    hits = [h for h in hits if h is not None]
    return min(hits) if hits else None


def _odd_ell_for(k: int, a_mp, w_mp, lo_mp, hi_mp) -> Optional[int]:
    lo_ell = int(mpmath.ceil((lo_mp - k * a_mp) / w_mp))
    hi_ell = int(mpmath.floor((hi_mp - k * a_mp) / w_mp))
    odds = [e for e in range(lo_ell, hi_ell + 1) if e % 2]
    return min(odds, key=abs) if odds else None


def _odd_combination_fast(alpha, omega, lo, hi, bound):
    """Narrow windows (hi - lo < 2 omega): at most one odd ell per k, so the
    search reduces to first hits of the rotation k -> frac(k alpha/(2 omega))."""
    with mpmath.workdps(_DPS):
        a_mp, w_mp = to_mpf(alpha), to_mpf(omega)
        lo_mp, hi_mp = mpmath.mpf(lo), mpmath.mpf(hi)
        beta = a_mp / (2 * w_mp)
        # k alpha + (2j+1) omega in [lo, hi]  <=>  frac((k alpha + omega - lo)/(2 omega)) in [0, delta]
        gamma = (w_mp - lo_mp) / (2 * w_mp)
        delta = (hi_mp - lo_mp) / (2 * w_mp)
        best = None
        for sign in (1, -1):
            start = 0
            for _ in range(8):
                shift = gamma + sign * start * beta
                x = _first_rotation_hit(sign * beta, shift - mpmath.floor(shift), delta)
                if x is None:
                    break
                k = sign * (start + x)
                if abs(k) > bound:
                    break
                ell = _odd_ell_for(k, a_mp, w_mp, lo_mp, hi_mp)
                if ell is not None:
                    cand = (abs(k), abs(ell), k < 0, k, ell)
                    if best is None or cand < best:
                        best = cand
                    break
                # scaled rounding produced a spurious edge hit; resume after it
                start += x + 1
        if best is None:
            return "none"
        if best[1] > bound:
            # every hit has |ell| >= (|k| alpha - hi)/omega >= (|k*| alpha - hi)/omega
            if (best[0] * a_mp - hi_mp) / w_mp > bound:
                return "none"
            return "ell_over"
        k, ell = best[3], best[4]
        return k, ell, float(k * a_mp + ell * w_mp)


def odd_combination_in(alpha: Number, omega: Number, lo: float, hi: float,
                       bound: int) -> Tuple[int, int, float]:
    """(k, ell) with ell odd and lo <= k*alpha + ell*omega <= hi.

    Exhaustive over |k|, |ell| <= bound; ties resolve to smallest |k|, then
    smallest |ell|, then positive k.  Float hits are confirmed in extended
    precision.
    """
    if not (0 <= lo < hi):
        raise ValidationError(f"need 0 <= lo < hi, got [{lo}, {hi}]")
    alpha, omega = parse_number(alpha), parse_number(omega)
    _positive(alpha, "alpha")
    _positive(omega, "omega")
    bound = int(bound)
    if hi - lo < 2 * float(omega):
        hit = _odd_combination_fast(alpha, omega, lo, hi, bound)
        if hit == "none":
            raise NotFound(f"no odd combination in [{lo}, {hi}] with |k|, |ell| <= {bound}")
        if hit != "ell_over":
            return hit
    return _odd_combination_scan(alpha, omega, lo, hi, bound)


def _odd_combination_scan(alpha, omega, lo, hi, bound):
    a, w = float(alpha), float(omega)
    slack = 1e-9
    with mpmath.workdps(_DPS):
        a_mp, w_mp = to_mpf(alpha), to_mpf(omega)
        lo_mp, hi_mp = mpmath.mpf(lo), mpmath.mpf(hi)

        def check(k, ell):
            v = k * a_mp + ell * w_mp
            return lo_mp <= v <= hi_mp, v

        start, chunk = 0, 1024
        while start <= bound:
            stop = min(bound, start + chunk - 1)
            mags = np.arange(start, stop + 1, dtype=np.int64)
            ks = np.stack([mags, -mags], axis=1).ravel()  # +k before -k at each |k|
            lmin = np.ceil((lo - ks * a) / w - slack).astype(np.int64)
            lmax = np.floor((hi - ks * a) / w + slack).astype(np.int64)
            hit = np.nonzero(_has_odd(lmin, lmax))[0]
            best = None
            for idx in hit:
                k = int(ks[idx])
                if best is not None and abs(k) > abs(best[0]):
                    break
                lo_ell, hi_ell = int(lmin[idx]), int(lmax[idx])
                odds = [e for e in range(lo_ell, hi_ell + 1) if e % 2 and abs(e) <= bound]
                for e in sorted(odds, key=abs):
                    ok, v = check(k, e)
                    if ok:
                        key = (abs(k), abs(e), k < 0)
                        if best is None or key < best[3]:
                            best = (k, e, float(v), key)
                        break
            if best is not None:
                return best[0], best[1], best[2]
            start = stop + 1
            chunk = min(chunk * 2, 1 << 20)
    raise NotFound(f"no odd combination in [{lo}, {hi}] with |k|, |ell| <= {bound}")


def odd_combination_growing(alpha, omega, lo, hi, bound: int = 64,
                            cap: int = SEARCH_BOUND_CAP) -> Tuple[int, int, float, int]:
    """Double the search bound until a hit or ``cap``; returns the final bound too."""
    while True:
        try:
            return (*odd_combination_in(alpha, omega, lo, hi, bound), bound)
        except NotFound:
            if bound >= cap:
                raise
            bound = min(cap, 2 * bound)


# --- smallness conditions ---------------------------------------------------

@dataclass(frozen=True)
class EstimateConfig:
    theta: float = 1.0
    omega_max: float = 1.0
    kappa: float = 1.0
    rho: float = 1.0
    lambda_max: float = 1.0

    def __post_init__(self):
        for name in ("theta", "omega_max", "kappa", "rho", "lambda_max"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.rho > 1:
            raise ValidationError("rho must not exceed 1")

    def check_rho(self, q: float):
        low = (3 * q - 3) / q
        if not (low < self.rho <= 1):
            raise ValidationError(f"rho must lie in ({low:.6g}, 1] for q = {q}")


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    rhs: float
    passed: bool

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "pass": self.passed}


@dataclass(frozen=True)
class SmallnessReport:
    mode: str
    conditions: Tuple[Condition, ...]
    min_positive: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def to_dict(self):
        out = {"mode": self.mode, "pass": self.passed,
               "conditions": [c.to_dict() for c in self.conditions]}
        if self.min_positive is not None:
            out["min_positive"] = self.min_positive
        return out


def gap_excluding_self(s: float, omega: float) -> float:
    """min |s - omega*k| over k with s != omega*k."""
    d = dist_to_lattice(s, omega)
    return float(omega) if d == 0 else d


def check_smallness(params: Params, config: EstimateConfig, mode: str,
                    ratio: Optional[RatioClass] = None) -> SmallnessReport:
    """Feasibility of the smallness hypotheses for ``mode`` in
    {"resolvent", "tp", "nonlinear"}.

    ``ratio`` overrides the classification of (2 pi / period) / omega, which
    otherwise is taken from the float parameters (heuristic).
    """
    conds = [Condition("omega <= omega_max", params.omega, config.omega_max,
                       params.omega <= config.omega_max)]
    lam2 = params.lam ** 2
    if mode == "resolvent":
        rhs = config.theta * gap_excluding_self(params.s, params.omega)
        conds.append(Condition("lambda^2 <= theta * gap(s)", lam2, rhs, lam2 <= rhs))
        return SmallnessReport(mode, tuple(conds))
    if mode not in ("tp", "nonlinear"):
        raise ValidationError(f"unknown mode {mode!r}")
    if ratio is None:
        ratio = classify_ratio(params.alpha, params.omega)
    if not ratio.is_rational:
        raise InfimumZero("an irrational ratio of time frequency to angular speed makes the "
                          "positive lattice elements accumulate at zero, so no lambda > 0 "
                          "satisfies the condition")
    mp = min_positive_element(ratio, params.omega)
    rhs = config.theta * mp
    conds.append(Condition("lambda^2 <= theta * min_positive", lam2, rhs, lam2 <= rhs))
    if mode == "nonlinear":
        conds.append(Condition("lambda <= lambda_max", params.lam, config.lambda_max,
                               params.lam <= config.lambda_max))
        cap = config.kappa * params.lam ** config.rho
        conds.append(Condition("omega <= kappa * lambda^rho", params.omega, cap, params.omega <= cap))
    return SmallnessReport(mode, tuple(conds), min_positive=mp)


def select_nonlinear_params(period: float, config: EstimateConfig, d: int,
                            lam: float) -> Tuple[int, float]:
    """Smallest c coprime to d with lambda^2/theta <= alpha/c and
    omega = alpha*d/c <= kappa*lambda^rho, where alpha = 2 pi / period."""
    _positive(period, "period")
    _positive(lam, "lambda")
    if int(d) != d or d < 1:
        raise ValidationError("d must be a positive integer")
    if lam > config.lambda_max:
        raise Infeasible(f"lambda = {lam} exceeds lambda_max = {config.lambda_max}",
                         clause="lambda <= lambda_max")
    alpha = 2 * math.pi / period
    # alpha*d/c <= kappa*lam^rho  <=>  c >= alpha*d/(kappa*lam^rho)
    c_lo = math.ceil(alpha * d / (config.kappa * lam ** config.rho) * (1 - 1e-12))
    c_hi = math.floor(alpha * config.theta / lam ** 2 * (1 + 1e-12))
    c = max(1, c_lo)
    while c <= c_hi:
        if math.gcd(c, d) == 1:
            return c, alpha * d / c
        c += 1
    clause = "omega <= kappa * lambda^rho" if c_lo > c_hi else "lambda^2 <= theta * min_positive"
    raise Infeasible(f"no integer c coprime to {d} in [{c_lo}, {c_hi}]; lambda = {lam} is too large",
                     clause=clause)
