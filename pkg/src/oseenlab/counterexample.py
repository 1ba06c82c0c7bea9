"""Resonant right-hand sides whose rotating resolvent solutions blow up.

For an irrational ratio alpha/omega the lattice alpha*Z + omega*(2Z+1) is
dense, so for each n there are (k_n, ell_n) with ell_n odd and
sigma_n = alpha k_n + omega ell_n just above 1/n.  The data

    G_n(xi) = n^{3/2} 1_{I_n}(xi) (0, xi_3, -xi_2) / |xi'|

live on the thin slab I_n = (1/(2 lam n), 1/(lam n)) x {|xi'| < 1/n, xi_3 > 0}.
Averaging its rotated copies against exp(i omega ell_n t) gives g_n, whose
solution v_n at s_n = alpha k_n satisfies i s_n v_n + omega rot(v_n) =
i sigma_n v_n.  The ratio of that term to |g_n| grows like sqrt(n).
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import integrate, special

from .core import ClosedFormField, rotation_matrix
from .errors import NotFound, SmallS, ValidationError
from .resonance import (
    Number,
    classify_ratio,
    lattice_value,
    odd_combination_growing,
    parse_number,
)

log = logging.getLogger(__name__)

WINDOWS = ("resonant", "wide")


@dataclass(frozen=True)
class IndicatorRegion:
    """I_n: slab in xi_1 times the upper half disc of radius 1/n in xi'."""

    lam: float
    n: int

    @property
    def xi1_lo(self) -> float:
        return 1.0 / (2 * self.lam * self.n)

    @property
    def xi1_hi(self) -> float:
        return 1.0 / (self.lam * self.n)

    @property
    def radial_hi(self) -> float:
        return 1.0 / self.n

    @property
    def volume(self) -> float:
        return math.pi / (4 * self.lam * self.n ** 3)

    def slab(self, xi1) -> np.ndarray:
        xi1 = np.asarray(xi1, dtype=float)
        return (xi1 > self.xi1_lo) & (xi1 < self.xi1_hi)

    def disc(self, xi) -> np.ndarray:
        r = np.hypot(xi[..., 1], xi[..., 2])
        return (r > 0) & (r < self.radial_hi)

    def contains(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        r = np.hypot(xi[..., 1], xi[..., 2])
        return self.slab(xi[..., 0]) & (r < self.radial_hi) & (xi[..., 2] > 0)


@dataclass(frozen=True)
class CounterexampleItem:
    n: int
    alpha: object
    omega: object
    lam: float
    k_n: int
    ell_n: int
    sigma_n: float
    s_n: float
    window: str = "resonant"
    search_bound: int = 0

    @property
    def region(self) -> IndicatorRegion:
        return IndicatorRegion(self.lam, self.n)

    @property
    def omega_f(self) -> float:
        return float(self.omega)

    @property
    def alpha_f(self) -> float:
        return float(self.alpha)

    def to_dict(self) -> dict:
        return {"n": self.n, "k_n": self.k_n, "ell_n": self.ell_n, "sigma_n": self.sigma_n,
                "s_n": self.s_n, "lambda": self.lam, "window": self.window}


def sigma_window(n: int, window: str = "resonant"):
    """Admissible interval for sigma_n.

    "wide" is [1/n, 2/n]; "resonant" is the sub-interval [1/n, 1/n + 1/n^2],
    narrow enough that the slab denominators stay comparable to 1/n and the
    blow-up ratio keeps its sqrt(n) growth.
    """
    if window == "wide":
        return 1.0 / n, 2.0 / n
    if window == "resonant":
        return 1.0 / n, 1.0 / n + 1.0 / n ** 2
    raise ValidationError(f"unknown window {window!r}; choose from {WINDOWS}")


def build_item(n: int, alpha: Number = "sqrt2", omega: Number = 1, lam: float = 1.0,
               bound: int = 64, window: str = "resonant") -> CounterexampleItem:
    """Resonant triple (sigma_n, k_n, ell_n) for index n.

    Raises SmallS when |s_n| = |alpha k_n| < 1/n, which happens only for
    small n.
    """
    n = int(n)
    if n < 1:
        raise ValidationError("n must be at least 1")
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    a, w = parse_number(alpha), parse_number(omega)
    ratio = classify_ratio(a, w)
    if ratio.is_rational:
        raise ValidationError("the construction needs an irrational ratio alpha/omega; "
                              f"got {ratio.c}/{ratio.d}")
    lo, hi = sigma_window(n, window)
    k, ell, sigma, used = odd_combination_growing(a, w, lo, hi, bound)
    s_n = lattice_value(k, 0, a, w)
    if abs(s_n) < 1.0 / n:
        raise SmallS(f"n = {n}: |s_n| = {abs(s_n):.6g} < 1/n; the index is too small for the construction")
    return CounterexampleItem(n, a, w, float(lam), k, ell, sigma, s_n, window, used)


# --- profiles ---------------------------------------------------------------

def _swirl(xi):
    """(0, xi_3, -xi_2)/|xi'|, zero on the axis."""
    r = np.hypot(xi[..., 1], xi[..., 2])
    inv = np.divide(1.0, r, out=np.zeros_like(r), where=r > 0)
    return np.stack([np.zeros_like(r), xi[..., 2] * inv, -xi[..., 1] * inv])


def swirl_data_profile(item: CounterexampleItem) -> ClosedFormField:
    reg = item.region
    amp = item.n ** 1.5

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        return (amp * reg.contains(xi) * _swirl(xi)).astype(complex)

    return ClosedFormField(f, 3, name="swirl_data", args={"n": item.n, "lambda": item.lam},
                           l2_sq=math.pi / (4 * item.lam), singular="xi' = 0")


def _averaged_amplitude(item: CounterexampleItem, xi: np.ndarray) -> np.ndarray:
    """n^{3/2} (-i e^{i ell theta} / (pi ell)) on slab x {0 < |xi'| < 1/n}."""
    reg = item.region
    ell = item.ell_n
    theta = np.arctan2(xi[..., 2], xi[..., 1])
    support = reg.slab(xi[..., 0]) & reg.disc(xi)
    return item.n ** 1.5 * support * (-1j * np.exp(1j * ell * theta) / (math.pi * ell))


def gn_profile(item: CounterexampleItem) -> ClosedFormField:
    """Time average of the rotated copies Q(t) G_n(Q(t)^T xi) exp(i omega ell_n t)."""

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        return _averaged_amplitude(item, xi) * _swirl(xi)

    return ClosedFormField(f, 3, name="averaged_forcing", args={"n": item.n, "lambda": item.lam},
                           bandwidth=abs(item.ell_n) + 1, l2_sq=forcing_norm_sq(item),
                           singular="xi' = 0")


def vn_profile(item: CounterexampleItem) -> ClosedFormField:
    """g_n / (i sigma_n + |xi|^2 - i lam xi_1)."""

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        d = 1j * (item.sigma_n - item.lam * xi[..., 0]) + np.sum(xi * xi, axis=-1)
        return _averaged_amplitude(item, xi) * _swirl(xi) / d

    return ClosedFormField(f, 3, name="resonant_solution", args={"n": item.n, "lambda": item.lam},
                           bandwidth=abs(item.ell_n) + 1, singular="xi' = 0")


# --- norms ------------------------------------------------------------------

def forcing_norm_sq(item: CounterexampleItem) -> float:
    return 1.0 / (2 * item.lam * math.pi * item.ell_n ** 2)


def closed_form_norms(item: CounterexampleItem) -> dict:
    return {"normG_sq": math.pi / (4 * item.lam), "normg_sq": forcing_norm_sq(item)}


@lru_cache(maxsize=32)
def _gauss_legendre(order: int):
    return special.roots_legendre(order)


def _gauss_sq(profile: ClosedFormField, reg: IndicatorRegion, half: bool, order: int) -> float:
    """Tensor Gauss-Legendre rule over slab x (half) disc, with xi_2 = r sin(phi)
    so the curved xi_3 limits carry no endpoint singularity."""
    x, w = _gauss_legendre(order)

    def mapped(lo, hi):
        return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w

    rh = reg.radial_hi
    x1, w1 = mapped(reg.xi1_lo, reg.xi1_hi)
    phi, wphi = mapped(-math.pi / 2, math.pi / 2)
    x2 = rh * np.sin(phi)
    jac2 = rh * np.cos(phi) * wphi
    top = rh * np.cos(phi)
    bottom = np.zeros_like(top) if half else -top
    # third coordinate: per-phi mapping of [bottom, top]
    x3 = 0.5 * (top - bottom)[:, None] * x[None, :] + 0.5 * (top + bottom)[:, None]
    w3 = 0.5 * (top - bottom)[:, None] * w[None, :]
    pts = np.empty((order, order, order, 3))
    pts[..., 0] = x1[:, None, None]
    pts[..., 1] = x2[None, :, None]
    pts[..., 2] = x3[None, :, :]
    vals = np.sum(np.abs(profile(pts)) ** 2, axis=0)
    weights = w1[:, None, None] * jac2[None, :, None] * w3[None, :, :]
    return float(np.sum(vals * weights))


def quadrature_norms(item: CounterexampleItem, order: int = 48) -> dict:
    """Squared L2 norms of G_n and g_n by 3-D Gauss-Legendre quadrature over their supports."""
    reg = item.region
    return {"normG_sq": _gauss_sq(swirl_data_profile(item), reg, True, order),
            "normg_sq": _gauss_sq(gn_profile(item), reg, False, order)}


# --- time-mean identity ---------------------------------------------------

def _arc(theta: float, omega: float):
    """t-interval on which Q(t) xi has positive third component."""
    return -theta / omega, (math.pi - theta) / omega


def time_mean_identity_check(item: CounterexampleItem, xi, n_time_nodes: int = 4096,
                             split: bool = True) -> dict:
    """|mean over a period of 1_{I_n}(Q(t) xi) exp(i omega ell_n t)|^2 against
    its closed form 1/(pi ell_n)^2 on the slab times the open disc."""
    if n_time_nodes < 1024:
        raise ValidationError("n_time_nodes must be at least 1024")
    xi = np.asarray(xi, dtype=float)
    om = item.omega_f
    ell = item.ell_n
    reg = item.region
    period = 2 * math.pi / om
    t = period * np.arange(n_time_nodes) / n_time_nodes
    rots = rotation_matrix(t, om)
    pts = rots @ xi
    ind = reg.contains(pts)
    trap = complex(np.mean(ind * np.exp(1j * om * ell * t)))
    r = math.hypot(xi[1], xi[2])
    inside = bool(reg.slab(xi[0])) and 0 < r < reg.radial_hi
    predicted = 1.0 / (math.pi * ell) ** 2 if inside else 0.0
    out = {"quadrature_value": abs(trap) ** 2, "predicted": predicted}
    if split:
        if inside:
            a, b = _arc(math.atan2(xi[2], xi[1]), om)
            nodes, weights = _gauss_legendre(max(64, 2 * abs(ell) + 32))
            tt = 0.5 * (b - a) * nodes + 0.5 * (b + a)
            integral = 0.5 * (b - a) * np.sum(weights * np.exp(1j * om * ell * tt))
            out["split_value"] = abs(integral / period) ** 2
        else:
            out["split_value"] = 0.0
    return out


# --- blow-up ratio --------------------------------------------------------

def certified_constant(lam: float) -> float:
    return (2 + 2 / lam ** 4) ** -0.25


def certification_threshold(lam: float) -> float:
    return 4 * math.sqrt(2 + 2 / lam ** 4)


@dataclass(frozen=True)
class BlowupResult:
    lhs_norm: float
    rhs_norm: float
    ratio: float
    certified_lower: float
    threshold_met: bool
    constant: float

    @property
    def passed(self) -> bool:
        return self.threshold_met and self.ratio >= self.certified_lower

    def to_dict(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def slab_integral(item: CounterexampleItem, epsrel: float = 1e-12) -> float:
    """int over the slab of (pi/b)[atan((x^2 + 1/n^2)/b) - atan(x^2/b)] dx,
    b = sigma_n - lam x: the disc integral of 1/|i sigma + |xi|^2 - i lam xi_1|^2
    done in closed form."""
    reg = item.region
    sig, lam, rn2 = item.sigma_n, item.lam, 1.0 / item.n ** 2

    def f(x):
        b = sig - lam * x
        if abs(b) < 1e-12 * max(sig, 1.0):
            # b -> 0 limit: the radial integral of 1/(xi_1^2 + r^2)^2
            return math.pi * (1 / (x * x) - 1 / (x * x + rn2))
        return math.pi / b * (math.atan((x * x + rn2) / b) - math.atan(x * x / b))

    val, _ = integrate.quad(f, reg.xi1_lo, reg.xi1_hi, epsabs=0.0, epsrel=epsrel, limit=200)
    return val


def blowup_ratio(item: CounterexampleItem, epsrel: float = 1e-12) -> BlowupResult:
    """|i s_n v_n + omega rot(v_n)|_2 / |g_n|_2 with the certified lower bound.

    The left side equals sigma_n |v_n|_2, integrated over the disc in closed
    form and over the slab by adaptive quadrature.
    """
    n, ell = item.n, item.ell_n
    lhs_sq = item.sigma_n ** 2 * n ** 3 / (math.pi ** 2 * ell ** 2) * slab_integral(item, epsrel)
    rhs_sq = forcing_norm_sq(item)
    c = certified_constant(item.lam)
    met = n >= certification_threshold(item.lam)
    lhs, rhs = math.sqrt(lhs_sq), math.sqrt(rhs_sq)
    return BlowupResult(lhs, rhs, lhs / rhs, c * math.sqrt(n), met, c)


# --- divergence probe -----------------------------------------------------

@dataclass
class DivergenceRow:
    n: int
    skipped: bool
    k_n: Optional[int] = None
    ell_n: Optional[int] = None
    sigma_n: Optional[float] = None
    s_n: Optional[float] = None
    ratio: Optional[float] = None
    certified_term: float = 0.0
    direct_term: float = 0.0
    certified_sum: float = 0.0
    direct_sum: float = 0.0


@dataclass
class DivergenceTable:
    variant: str
    constant: float
    rows: List[DivergenceRow] = field(default_factory=list)

    @property
    def certified_sum(self) -> float:
        return self.rows[-1].certified_sum if self.rows else 0.0

    @property
    def direct_sum(self) -> float:
        return self.rows[-1].direct_sum if self.rows else 0.0

    def partial(self, n: int) -> DivergenceRow:
        return self.rows[n - 1]


def divergence_probe(alpha: Number = "sqrt2", omega: Number = 1, lam: float = 1.0,
                     n_max: int = 100, variant: str = "A_norm",
                     window: str = "resonant") -> DivergenceTable:
    """Partial sums of the two divergent series behind non-existence.

    A_norm renormalises |g_n|_2 = n^{-3/2}: certified terms C/n, direct terms
    ratio_n n^{-3/2}.  L2_norm renormalises |g_n|_2 = 1/n and sums squares:
    certified terms C^2/n, direct terms ratio_n^2 n^{-2}.  Certified terms are
    the lower-bound arithmetic for every n; direct terms come from built items
    and skip indices rejected as too small.
    """
    if variant not in ("A_norm", "L2_norm"):
        raise ValidationError("variant must be A_norm or L2_norm")
    c = certified_constant(lam)
    table = DivergenceTable(variant, c)
    cert = direct = 0.0
    for n in range(1, int(n_max) + 1):
        cert += (c if variant == "A_norm" else c * c) / n
        try:
            item = build_item(n, alpha, omega, lam, window=window)
        except SmallS as exc:
            log.info("skipping index %d: %s", n, exc)
            table.rows.append(DivergenceRow(n, True, certified_term=cert - table.certified_sum,
                                            certified_sum=cert, direct_sum=direct))
            continue
        r = blowup_ratio(item).ratio
        term = r * n ** -1.5 if variant == "A_norm" else r * r / n ** 2
        direct += term
        table.rows.append(DivergenceRow(n, False, item.k_n, item.ell_n, item.sigma_n, item.s_n, r,
                                        certified_term=cert - table.certified_sum, direct_term=term,
                                        certified_sum=cert, direct_sum=direct))
    return table
