"""Norm reports for the a priori resolvent and time-periodic estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    GridField,
    Params,
    PhysicalBox,
    SpectralField,
    SpectralGrid,
    TPSeries,
    apply_resolvent_operator,
    as_grid,
    inverse_transform,
    leray_project,
    rotation_term,
)
from .errors import ValidationError
from .resonance import dist_to_lattice

# --- exponents ----------------------------------------------------------------


@dataclass(frozen=True)
class ExponentPair:
    n: int
    q: Fraction
    s1: Optional[Fraction]
    s2: Optional[Fraction]

    @property
    def s1_valid(self) -> bool:
        return self.s1 is not None

    @property
    def s2_valid(self) -> bool:
        return self.s2 is not None


def as_fraction(q) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, str):
        return Fraction(q)
    return Fraction(q).limit_denominator(10**6)


def sobolev_exponents(n: int, q) -> ExponentPair:
    """s1 = (n+1)q/(n+1-q) for q < n+1 and s2 = (n+1)q/(n+1-2q) for q < (n+1)/2;
    out-of-range exponents are reported as None."""
    q = as_fraction(q)
    if not q > 1:
        raise ValidationError("q must exceed 1")
    if int(n) != n or n < 2:
        raise ValidationError("dimension must be an integer >= 2")
    m = n + 1
    s1 = m * q / (m - q) if q < m else None
    s2 = m * q / (m - 2 * q) if 2 * q < m else None
    return ExponentPair(int(n), q, s1, s2)


# --- Fourier-side field algebra ------------------------------------------------

def _xi(grid: SpectralGrid) -> np.ndarray:
    return np.moveaxis(grid.points(), -1, 0)


def _grad_values(vals: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return (1j * xi[None] * vals[:, None]).reshape((-1,) + vals.shape[1:])


def _hess_values(vals: np.ndarray, xi: np.ndarray) -> np.ndarray:
    prod = -xi[:, None] * xi[None, :]
    return (prod[None] * vals[:, None, None]).reshape((-1,) + vals.shape[1:])


def field_norm(values: np.ndarray, r: float, grid: SpectralGrid, box: Optional[PhysicalBox]) -> float:
    """L^r norm of the physical field whose transform is sampled in ``values``."""
    if r == 2:
        return math.sqrt(float(np.sum(np.abs(values) ** 2)) * grid.spacing ** 3)
    if box is None:
        raise ValidationError("exponents other than 2 need a physical box")
    phys = inverse_transform(GridField(grid, values), box)
    mod = np.sqrt(np.sum(np.abs(phys) ** 2, axis=0))
    return (float(np.sum(mod ** r)) * box.spacing ** 3) ** (1.0 / r)


# --- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class NormEntry:
    label: str
    exponent: float
    value: float


@dataclass
class NormReport:
    entries: List[NormEntry] = field(default_factory=list)

    def add(self, label: str, exponent: float, value: float):
        if not (np.isfinite(value) and value >= 0):
            raise ValidationError(f"norm entry {label} is not a finite non-negative number")
        self.entries.append(NormEntry(label, float(exponent), float(value)))

    @property
    def total(self) -> float:
        return float(sum(e.value for e in self.entries))

    def value(self, label: str) -> float:
        for e in self.entries:
            if e.label == label:
                return e.value
        raise KeyError(label)

    def to_list(self) -> list:
        return [{"label": e.label, "exponent": e.exponent, "value": e.value} for e in self.entries]


def cubic_growth(theta: float) -> float:
    return (1 + theta) ** 3


def predicted_constant(params: Params, c0: float) -> float:
    """C0 (1 + lam^2/omega)^3 when s lies on omega*Z, else C0 (1 + lam^2/dist(s, omega*Z))^3."""
    d = dist_to_lattice(params.s, params.omega)
    gap = params.omega if d == 0 else d
    return c0 * cubic_growth(params.lam ** 2 / gap)


@dataclass
class EstimateReport:
    terms: NormReport
    rhs_norm: float
    predicted_constant: float
    c0: float
    q: float
    l2_only: bool = False
    box: Optional[PhysicalBox] = None
    c0_label: str = "fitted"

    @property
    def ratio(self) -> float:
        if self.rhs_norm == 0:
            return 0.0 if self.terms.total == 0 else math.inf
        return self.terms.total / self.rhs_norm

    def to_dict(self) -> dict:
        return {"terms": self.terms.to_list(), "rhs_norm": self.rhs_norm, "ratio": self.ratio,
                "predicted_constant": self.predicted_constant, "c0": self.c0,
                "c0_label": self.c0_label, "q": self.q, "l2_only": self.l2_only,
                "box": None if self.box is None else self.box.to_dict()}


def _check_q(q: float) -> bool:
    """True when only the L2 terms are meaningful (q = 2)."""
    if q == 2:
        return True
    if not 1 < q < 2:
        raise ValidationError(f"the estimate needs q in (1, 2), got {q}")
    return False


def _fill_terms(rep: NormReport, v: SpectralField, p: SpectralField, s: float, params: Params,
                grid: SpectralGrid, box, q: float, l2_only: bool, with_dist: bool,
                time_symbol: Optional[float] = None):
    """Add every left-hand term for one mode; ``time_symbol`` replaces s in the
    rotation entry for time-periodic modes."""
    xi = _xi(grid)
    vg = as_grid(v, grid)
    pg = as_grid(p, grid)
    rot = rotation_term(v, grid)
    # nodes whose finite-difference stencil leaves the grid are dropped
    mask = rot.valid & vg.valid
    vv = np.where(mask, vg.values, 0)
    rv = np.where(mask, rot.values, 0)
    freq = s if time_symbol is None else time_symbol
    lam = params.lam
    if with_dist:
        rep.add("dist(s,wZ)|v|_q", q, dist_to_lattice(s, params.omega) * field_norm(vv, q, grid, box))
    rep.add("|isv+w rot v|_q", q, field_norm(1j * freq * vv + params.omega * rv, q, grid, box))
    rep.add("|grad^2 v|_q", q, field_norm(_hess_values(vv, xi), q, grid, box))
    rep.add("lam|d1 v|_q", q, lam * field_norm(1j * xi[0] * vv, q, grid, box))
    rep.add("|grad p|_q", q, field_norm(_grad_values(pg.values, xi), q, grid, box))
    if l2_only:
        return
    r1, r2, r3 = 4 * q / (4 - q), 2 * q / (2 - q), 3 * q / (3 - q)
    rep.add("lam^(1/4)|grad v|_(4q/(4-q))", r1, lam ** 0.25 * field_norm(_grad_values(vv, xi), r1, grid, box))
    rep.add("lam^(1/2)|v|_(2q/(2-q))", r2, lam ** 0.5 * field_norm(vv, r2, grid, box))
    rep.add("|p|_(3q/(3-q))", r3, field_norm(pg.values, r3, grid, box))


def resolvent_estimate_report(v: SpectralField, p: SpectralField, g: SpectralField, params: Params,
                              grid: SpectralGrid, box: Optional[PhysicalBox] = None,
                              c0: float = 1.0, c0_label: str = "fitted") -> EstimateReport:
    """Every left-hand term of the resolvent estimate against |g|_q.

    q = params.q must lie in (1, 2); q = 2 keeps only the L2 terms.
    """
    q = params.q
    l2_only = _check_q(q)
    if not l2_only and box is None:
        box = PhysicalBox.reciprocal(grid)
    rep = NormReport()
    _fill_terms(rep, v, p, params.s, params, grid, box, q, l2_only, with_dist=True)
    rhs = field_norm(as_grid(g, grid).values, q, grid, box)
    return EstimateReport(rep, rhs, predicted_constant(params, c0), c0, q, l2_only,
                          None if l2_only else box, c0_label)


def tp_estimate_report(u: TPSeries, p: TPSeries, f: TPSeries, params: Params, grid: SpectralGrid,
                       box: Optional[PhysicalBox] = None) -> EstimateReport:
    """Time-periodic estimate terms as sums over modes of per-mode norms."""
    q = params.q
    l2_only = _check_q(q)
    if not l2_only and box is None:
        box = PhysicalBox.reciprocal(grid)
    alpha = 2 * math.pi / u.period
    per_mode = {}
    for k in u.modes:
        rep = NormReport()
        _fill_terms(rep, u.modes[k], p.modes[k], alpha * k, params, grid, box, q, l2_only,
                    with_dist=False)
        per_mode[k] = rep
    total = NormReport()
    if per_mode:
        for i, e in enumerate(next(iter(per_mode.values())).entries):
            total.add(e.label.replace("isv", "d_t u").replace("v", "u"), e.exponent,
                      sum(r.entries[i].value for r in per_mode.values()))
    rhs = f.a_norm(lambda fk: field_norm(as_grid(fk, grid).values, q, grid, box))
    return EstimateReport(total, rhs, math.nan, math.nan, q, l2_only, None if l2_only else box,
                          "not fitted")


# --- probes and sweeps ----------------------------------------------------------

@dataclass
class EmbeddingRow:
    lam: float
    grad_lhs: float
    fct_lhs: Optional[float]
    rhs: float
    grad_ratio: float
    fct_ratio: Optional[float]
    degenerate: bool = False


@dataclass
class EmbeddingTable:
    q: Fraction
    exponents: ExponentPair
    rows: List[EmbeddingRow]
    box: PhysicalBox

    @property
    def max_grad_ratio(self) -> float:
        return max(r.grad_ratio for r in self.rows if not r.degenerate)

    @property
    def max_fct_ratio(self) -> Optional[float]:
        vals = [r.fct_ratio for r in self.rows if not r.degenerate and r.fct_ratio is not None]
        return max(vals) if vals else None

    def variation(self, which: str = "grad") -> float:
        vals = [getattr(r, f"{which}_ratio") for r in self.rows if not r.degenerate]
        vals = [x for x in vals if x is not None]
        return max(vals) / min(vals)


def embedding_probe(v: SpectralField, lambda_sweep: Sequence[float], q, grid: SpectralGrid,
                    box: Optional[PhysicalBox] = None, n: int = 3) -> EmbeddingTable:
    """lam^{1/(n+1)} |grad v|_{s1} and lam^{2/(n+1)} |v|_{s2} against
    |Lap v + lam d_1 v|_q across ``lambda_sweep``."""
    if n != 3:
        raise ValidationError("fields live in three dimensions")
    ex = sobolev_exponents(n, q)
    if ex.s1 is None:
        raise ValidationError(f"q = {q} is outside the range of the gradient inequality")
    box = box or PhysicalBox.reciprocal(grid)
    qf, s1 = float(ex.q), float(ex.s1)
    xi = _xi(grid)
    vals = as_grid(v, grid).values
    r2 = np.sum(xi * xi, axis=0)
    grad_n = field_norm(_grad_values(vals, xi), s1, grid, box)
    fct_n = None if ex.s2 is None else field_norm(vals, float(ex.s2), grid, box)
    rows = []
    for lam in lambda_sweep:
        if not lam > 0:
            raise ValidationError("lambda values must be positive")
        rhs = field_norm((-r2 + 1j * lam * xi[0]) * vals, qf, grid, box)
        gl = lam ** (1 / (n + 1)) * grad_n
        fl = None if fct_n is None else lam ** (2 / (n + 1)) * fct_n
        if rhs == 0:
            rows.append(EmbeddingRow(lam, gl, fl, rhs, math.nan, None if fl is None else math.nan, True))
            continue
        rows.append(EmbeddingRow(lam, gl, fl, rhs, gl / rhs, None if fl is None else fl / rhs))
    return EmbeddingTable(ex.q, ex, rows, box)


def fit_embedding_constants(fields: Sequence[SpectralField], lambda_sweep: Sequence[float], q,
                            grid: SpectralGrid, box: Optional[PhysicalBox] = None,
                            n: int = 3) -> Tuple[float, Optional[float]]:
    """Largest gradient and function ratios over a calibration family."""
    if not fields:
        raise ValidationError("need at least one calibration field")
    tabs = [embedding_probe(f, lambda_sweep, q, grid, box, n) for f in fields]
    fct = [t.max_fct_ratio for t in tabs if t.max_fct_ratio is not None]
    return max(t.max_grad_ratio for t in tabs), (max(fct) if fct else None)


def fit_c0(params: Params, grid: SpectralGrid, n_instances: int = 50, seed: int = 0,
           box: Optional[PhysicalBox] = None) -> Tuple[float, List[float]]:
    """Least C0 for which every manufactured solution in a seeded calibration
    suite obeys ratio <= C0 (1 + theta)^3; returns C0 and the suite ratios."""
    from .profiles import gaussian_poly, radial_scalar

    rng = np.random.default_rng(seed)
    scaled = []
    for i in range(n_instances):
        v = leray_project(gaussian_poly(int(rng.integers(2**31)), degree=int(rng.integers(0, 3)),
                                        width=float(rng.uniform(0.6, 1.4))))
        p = radial_scalar(width=float(rng.uniform(0.6, 1.4)))
        pr = Params(params.lam, params.omega, s=float(rng.uniform(-3, 3)), q=params.q)
        g = apply_resolvent_operator(v, p, pr, grid).field
        rep = resolvent_estimate_report(v, p, g, pr, grid, box, c0=1.0)
        scaled.append(rep.ratio / rep.predicted_constant)
    return float(max(scaled)), scaled


@dataclass
class SweepRow:
    s: float
    dist: float
    observed_ratio: float
    predicted_ceiling: float


def constant_sweep(g: SpectralField, lam: float, omega: float, s_list: Iterable[float],
                   grid: SpectralGrid, n_time_nodes: int, c0: float = 1.0,
                   q: float = 2.0, box: Optional[PhysicalBox] = None) -> List[SweepRow]:
    """Observed estimate ratio and the ceiling C0 (1 + lam^2/dist)^3 as s nears omega*Z."""
    from .solver import solve_resolvent_rotating

    rows = []
    for s in s_list:
        d = dist_to_lattice(s, omega)
        if d == 0:
            raise ValidationError(f"s = {s} lies on omega*Z; the sweep needs s off the lattice")
        pr = Params(lam, omega, s=float(s), q=q)
        sol = solve_resolvent_rotating(g, pr, n_time_nodes, grid, check_residual=False)
        rep = resolvent_estimate_report(sol.velocity, sol.pressure, g, pr, grid, box, c0=c0)
        rows.append(SweepRow(float(s), d, rep.ratio, rep.predicted_constant))
    return rows


@dataclass
class FamilyRow:
    n: int
    dist: float
    observed_ratio: float
    certified_lower: float
    predicted_ceiling: float


def counterexample_sweep(ns: Iterable[int], lam: float = 1.0, alpha="sqrt2", omega=1,
                         c0: float = 1.0, window: str = "resonant") -> List[FamilyRow]:
    """The resonant family as an s-source: the rotation-term ratio against
    dist(s_n, omega Z) and the cubic ceiling at that distance."""
    from .counterexample import blowup_ratio, build_item

    rows = []
    for n in ns:
        item = build_item(n, alpha, omega, lam, window=window)
        res = blowup_ratio(item)
        d = dist_to_lattice(item.s_n, item.omega_f)
        pr = Params(lam, item.omega_f, s=item.s_n)
        rows.append(FamilyRow(n, d, res.ratio, res.certified_lower, predicted_constant(pr, c0)))
    return rows
