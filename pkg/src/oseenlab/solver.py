"""Fourier-multiplier solvers for the rotating Oseen resolvent problem.

The rotating solve removes the rotation term by a change to the co-rotating
frame: along the orbit tau -> Q(tau) xi the field
w(tau) = Q(tau)^T v(Q(tau) xi) obeys a scalar ODE in tau whose time modes are
solved by the plain Oseen multiplier.  Only the value at tau = 0 is needed,
so the chain collapses to

    v(xi) = P(xi) sum_k h_k(xi) / D_k(xi),   h(tau) = Q(tau)^T g(Q(tau) xi),

with D_k = i(s + omega k - lam xi_1) + |xi|^2 and P the Leray projector.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, stats

from .core import (
    ClosedFormField,
    GridField,
    Params,
    SpectralField,
    SpectralGrid,
    TPSeries,
    apply_resolvent_operator,
    as_grid,
    leray_apply,
    rotation_matrix,
)
from .errors import (
    BandwidthUnknown,
    IrrationalRatio,
    SingularPoint,
    ValidationError,
)
from .resonance import RatioClass, classify_ratio

log = logging.getLogger(__name__)

_CHUNK = 1 << 14


# --- symbols ----------------------------------------------------------------

@dataclass(frozen=True)
class SymbolPoint:
    """Evaluation point for the per-mode symbols; ``k`` may be a real ``eta``."""

    k: float
    xi: Tuple[float, float, float]
    params: Params


def denominator(s: float, omega: float, lam: float, k, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return 1j * (s + omega * np.asarray(k) - lam * xi[..., 0]) + np.sum(xi * xi, axis=-1)


def eval_symbol(point: SymbolPoint, which: Union[str, Tuple[str, int, int]]) -> complex:
    """Value of m, m0, m1, m2 or ("mjl", j, l) (1-based j, l) at ``point``."""
    p = point.params
    xi = np.asarray(point.xi, dtype=float)
    d = complex(denominator(p.s, p.omega, p.lam, point.k, xi))
    if d == 0:
        raise SingularPoint("the symbol denominator vanishes: xi = 0 and s + omega*k = 0")
    if isinstance(which, tuple):
        name, j, l = which
        if name != "mjl" or j not in (1, 2, 3) or l not in (1, 2, 3):
            raise ValidationError(f"unknown symbol {which!r}")
        return -xi[j - 1] * xi[l - 1] / d
    nums = {
        "m": 1.0,
        "m0": 1j * p.s,
        "m1": 1j * p.omega * point.k,
        "m2": 1j * p.lam * xi[0],
    }
    if which not in nums:
        raise ValidationError(f"unknown symbol {which!r}")
    return nums[which] / d


def _is_kernel_shift(shift: float, scale: float) -> bool:
    return abs(shift) <= 1e-13 * max(1.0, scale)


def _inverse_denominator(shift: float, lam: float, pts: np.ndarray) -> Tuple[np.ndarray, bool]:
    """1/D at ``pts`` with the kernel node (xi = 0, shift = 0) set to zero."""
    r2 = np.sum(pts * pts, axis=-1)
    d = 1j * (shift - lam * pts[..., 0]) + r2
    dead = (d == 0) | ((r2 == 0) & _is_kernel_shift(shift, 1.0))
    inv = np.divide(1.0, d, out=np.zeros_like(d), where=~dead)
    return inv, bool(np.any(dead))


def pressure_from_rhs(xi: np.ndarray, g_vals: np.ndarray) -> np.ndarray:
    """-i xi.g / |xi|^2, zero at xi = 0."""
    xi_c = np.moveaxis(np.asarray(xi, float), -1, 0)
    r2 = np.sum(xi_c * xi_c, axis=0)
    dot = np.sum(xi_c * g_vals, axis=0)
    out = np.divide(-1j * dot, r2, out=np.zeros_like(dot, dtype=complex), where=r2 > 0)
    return out[None]


# --- single-mode auxiliary solve ---------------------------------------------

class AuxSolution(tuple):
    """``(velocity, pressure)`` pair that also carries the kernel flag."""

    def __new__(cls, velocity, pressure, kernel_mode_dropped: bool):
        obj = super().__new__(cls, (velocity, pressure))
        obj.kernel_mode_dropped = kernel_mode_dropped
        return obj

    @property
    def velocity(self):
        return self[0]

    @property
    def pressure(self):
        return self[1]


def solve_aux_mode(g_hat: SpectralField, k: int, params: Params,
                   grid: Optional[SpectralGrid] = None) -> AuxSolution:
    """Velocity and pressure of mode ``k`` of the non-rotating auxiliary system

        (i s + i omega k - i lam xi_1 + |xi|^2) u + i xi p = g.

    Closed-form input gives closed-form output; grid input stays on its grid.
    """
    if g_hat.components != 3:
        raise ValidationError("right-hand side must be a vector field")
    shift = params.s + params.omega * k
    kernel = _is_kernel_shift(shift, abs(params.s) + abs(params.omega * k))
    lam = params.lam

    def vel(xi, vals):
        inv, _ = _inverse_denominator(0.0 if kernel else shift, lam, xi)
        return leray_apply(xi, vals) * inv

    if isinstance(g_hat, ClosedFormField):
        u = g_hat.derive(lambda xi: vel(np.asarray(xi, float), g_hat(xi)), name=f"u_{k}",
                         singular="xi = 0" if kernel else None)
        p = ClosedFormField(lambda xi: pressure_from_rhs(xi, g_hat(xi)), 1, name=f"p_{k}",
                            bandwidth=None if g_hat.bandwidth is None else g_hat.bandwidth + 1)
        return AuxSolution(u, p, kernel)
    g = as_grid(g_hat, grid)
    pts = g.grid.points()
    u = GridField(g.grid, vel(pts, g.values), bandwidth=g.bandwidth)
    p = GridField(g.grid, pressure_from_rhs(pts, g.values))
    return AuxSolution(u, p, kernel)


# --- rotating resolvent -------------------------------------------------------

@dataclass
class SolveReport:
    velocity: SpectralField
    pressure: SpectralField
    kernel_mode_dropped: bool
    boundary_layer_excluded: bool
    residual_interior: float
    quadrature_error: Optional[float] = None
    n_time_nodes: int = 0

    @property
    def flags(self) -> dict:
        return {"kernel_mode_dropped": self.kernel_mode_dropped,
                "boundary_layer_excluded": self.boundary_layer_excluded}


def _time_modes(n_nodes: int) -> np.ndarray:
    return np.fft.fftfreq(n_nodes, 1.0 / n_nodes)


def _orbit_kernel(params: Params, n_nodes: int, pts: np.ndarray) -> Tuple[np.ndarray, bool]:
    """K_j(xi) = (1/N) sum_k exp(-2 pi i j k / N) / D_k(xi), shape (N, ...)."""
    modes = _time_modes(n_nodes)
    inv = np.empty((n_nodes,) + pts.shape[:-1], dtype=complex)
    dropped = False
    for m, k in enumerate(modes):
        shift = params.s + params.omega * k
        if _is_kernel_shift(shift, abs(params.s) + abs(params.omega * k)):
            shift = 0.0
        inv[m], hit = _inverse_denominator(shift, params.lam, pts)
        dropped |= hit
    return np.fft.fft(inv, axis=0) / n_nodes, dropped


def _orbit_samples(g, pts: np.ndarray, n_nodes: int, omega: float) -> np.ndarray:
    """h_j = Q(tau_j)^T g(Q(tau_j) xi), shape (N, 3, P) for flat ``pts``."""
    taus = 2 * math.pi * np.arange(n_nodes) / (omega * n_nodes)
    rots = rotation_matrix(taus, omega)
    out = np.empty((n_nodes, 3, pts.shape[0]), dtype=complex)
    for j, q in enumerate(rots):
        vals = g(pts @ q.T)
        out[j] = q.T @ vals
    return out


def _rotating_velocity(g, params: Params, n_nodes: int, xi: np.ndarray) -> Tuple[np.ndarray, bool]:
    xi = np.asarray(xi, dtype=float)
    flat = xi.reshape(-1, 3)
    out = np.empty((3, flat.shape[0]), dtype=complex)
    dropped = False
    for a in range(0, flat.shape[0], _CHUNK):
        pts = flat[a:a + _CHUNK]
        h = _orbit_samples(g, pts, n_nodes, params.omega)
        kern, hit = _orbit_kernel(params, n_nodes, pts)
        dropped |= hit
        acc = np.einsum("jp,jcp->cp", kern, h)
        out[:, a:a + _CHUNK] = leray_apply(pts, acc)
    return out.reshape((3,) + xi.shape[:-1]), dropped


def _residual(v: SpectralField, p: SpectralField, g: SpectralField, params: Params,
              grid: SpectralGrid, kernel: bool) -> Tuple[float, bool]:
    res = apply_resolvent_operator(v, p, params, grid)
    gv = as_grid(g, grid).values
    mask = res.field.valid.copy()
    if kernel:
        mask[grid.center_index] = False
    diff = np.abs(res.field.values - gv)[:, mask]
    scale = float(np.max(np.abs(gv)[:, mask])) if mask.any() else 0.0
    worst = float(np.max(diff)) if diff.size else 0.0
    return (worst / scale if scale > 0 else worst), res.boundary_layer_excluded


def solve_resolvent_rotating(g: SpectralField, params: Params, n_time_nodes: int,
                             grid: Optional[SpectralGrid] = None,
                             check_residual: bool = True) -> SolveReport:
    """Solve i s v + omega(e1^x.grad v - e1^v) - Lap v - lam d_1 v + grad p = g.

    Closed-form ``g`` with a declared angular bandwidth M is solved exactly
    (trapezoid in the orbit angle with ``n_time_nodes >= 4(M+2)``) and the
    result is a lazily evaluated closed-form field.  Grid input, or input
    without a bandwidth, is solved on ``grid`` with a BandwidthUnknown warning
    and an error estimate from halving the node count.
    """
    if g.components != 3:
        raise ValidationError("right-hand side must be a vector field")
    n_time_nodes = int(n_time_nodes)
    bw = g.bandwidth
    if bw is not None and n_time_nodes < 4 * (bw + 2):
        raise ValidationError(f"n_time_nodes = {n_time_nodes} is below 4*(bandwidth+2) = {4 * (bw + 2)}")
    if n_time_nodes < 2:
        raise ValidationError("n_time_nodes must be at least 2")
    kernel_any = any(
        _is_kernel_shift(params.s + params.omega * k, abs(params.s) + abs(params.omega * k))
        for k in _time_modes(n_time_nodes))

    if isinstance(g, ClosedFormField) and bw is not None:
        v = ClosedFormField(lambda xi: _rotating_velocity(g, params, n_time_nodes, xi)[0], 3,
                            name=f"v[{g.name}]", args=dict(g.args), bandwidth=bw + 2,
                            singular="xi = 0" if kernel_any else None)
        p = ClosedFormField(lambda xi: pressure_from_rhs(xi, g(xi)), 1, name=f"p[{g.name}]",
                            bandwidth=bw + 1)
        resid, excluded = (0.0, False)
        if check_residual and grid is not None:
            resid, excluded = _residual(v, p, g, params, grid, kernel_any)
        return SolveReport(v, p, kernel_any, excluded, resid, quadrature_error=0.0,
                           n_time_nodes=n_time_nodes)

    if grid is None:
        if isinstance(g, GridField):
            grid = g.grid
        else:
            raise ValidationError("a grid is required without a declared bandwidth")
    if bw is None:
        warnings.warn("no angular bandwidth declared; the orbit quadrature is not exact",
                      BandwidthUnknown, stacklevel=2)
    pts = grid.points()
    src = g if isinstance(g, ClosedFormField) else as_grid(g, None)
    vals, kernel_hit = _rotating_velocity(src, params, n_time_nodes, pts)
    err = None
    if bw is None and n_time_nodes >= 4:
        coarse, _ = _rotating_velocity(src, params, n_time_nodes // 2, pts)
        scale = float(np.max(np.abs(vals))) or 1.0
        err = float(np.max(np.abs(vals - coarse))) / scale
    v = GridField(grid, vals, bandwidth=None if bw is None else bw + 2)
    gg = as_grid(g, grid)
    p = GridField(grid, pressure_from_rhs(pts, gg.values))
    resid, excluded = (0.0, False)
    if check_residual:
        resid, excluded = _residual(v, p, gg, params, grid, kernel_hit)
    return SolveReport(v, p, kernel_hit, excluded, resid, quadrature_error=err,
                       n_time_nodes=n_time_nodes)


# --- multiplier probe ---------------------------------------------------------

def smoothstep_cutoff(x) -> np.ndarray:
    """0 for |x| <= 1/2, 1 for |x| >= 1, quintic smoothstep in between."""
    t = np.clip(2 * np.abs(np.asarray(x, dtype=float)) - 1, 0.0, 1.0)
    return t ** 3 * (10 - 15 * t + 6 * t * t)


def reduce_s(s: float, omega: float) -> float:
    """Representative of s modulo omega*Z in [-omega/2, omega/2]."""
    return s - omega * round(s / omega)


@dataclass(frozen=True)
class ProbeBox:
    eta_max: float = 1e3
    xi_max: float = 1e3
    n_points: int = 100_000
    n_derivative_points: int = 20_000
    seed: int = 0


@dataclass
class ProbeReport:
    s_reduced: float
    sup_ratio: float
    sup_ratio_refined: float
    argmax: Tuple[float, float, float, float]
    sup_derivatives: float
    ceiling_linear: float
    ceiling_cubic: float
    fitted_c_linear: float
    fitted_c_cubic: float
    n_points: int

    def to_dict(self) -> dict:
        return dict(self.__dict__, argmax=list(self.argmax))


def _log_signed(u: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Map u in [0,1) to a signed log-uniform value with |x| in [lo, hi]."""
    sign = np.where(u < 0.5, -1.0, 1.0)
    w = np.abs(2 * u - 1)
    return sign * lo * (hi / lo) ** w


def _probe_points(s_t: float, params: Params, box: ProbeBox, n: int, seed_offset: int = 0) -> np.ndarray:
    eng = stats.qmc.Sobol(d=4, scramble=True, seed=box.seed + seed_offset)
    # draw the enclosing power of two and keep the first n to preserve balance
    u = eng.random_base2(max(0, math.ceil(math.log2(n))))[:n]
    lo_eta = 1e-3 * abs(s_t) / params.omega
    lo_xi = 1e-3 * min(abs(s_t) / params.lam, math.sqrt(abs(s_t)))
    eta = _log_signed(u[:, 0], lo_eta, box.eta_max)
    xi = np.stack([_log_signed(u[:, c], lo_xi, box.xi_max / math.sqrt(3)) for c in (1, 2, 3)], axis=-1)
    return np.column_stack([eta, xi])


def _n_symbol(s_t, params, eta, xi):
    return 1j * (s_t + params.omega * eta - params.lam * xi[..., 0]) + np.sum(xi * xi, axis=-1)


def _ratio_a(s_t, params, z):
    eta, xi = z[..., 0], z[..., 1:]
    num = abs(s_t) + np.abs(params.omega * eta) + np.abs(params.lam * xi[..., 0])
    admissible = np.abs(s_t + params.omega * eta) >= abs(s_t) / 2
    return np.where(admissible, num / np.abs(_n_symbol(s_t, params, eta, xi)), 0.0)


def cutoff_symbol(s_t: float, params: Params, z: np.ndarray) -> np.ndarray:
    """i lam xi_1 chi(1 + omega eta / s) / N(eta, xi)."""
    eta, xi = z[..., 0], z[..., 1:]
    chi = smoothstep_cutoff(1 + params.omega * eta / s_t)
    nval = _n_symbol(s_t, params, eta, xi)
    out = np.zeros(np.shape(eta), dtype=complex)
    np.divide(1j * params.lam * xi[..., 0] * chi, nval, out=out, where=chi > 0)
    return out


def _mixed_derivative_sup(s_t: float, params: Params, z: np.ndarray, rel_step: float = 2e-3) -> float:
    """sup of |eta^a xi^b d^a d^b M| over a in {0,1}, b in {0,1}^3 by central differences."""
    scale = np.array([abs(s_t) / params.omega] + [math.sqrt(abs(s_t))] * 3)
    steps = rel_step * np.maximum(np.abs(z), 1e-3 * scale)
    best = 0.0
    for mask in range(16):
        dirs = [c for c in range(4) if mask >> c & 1]
        acc = np.zeros(z.shape[0], dtype=complex)
        for signs in range(1 << len(dirs)):
            shifted = z.copy()
            sgn = 1.0
            for b, c in enumerate(dirs):
                e = 1.0 if signs >> b & 1 else -1.0
                shifted[:, c] += e * steps[:, c]
                sgn *= e
            acc += sgn * cutoff_symbol(s_t, params, shifted)
        weight = np.ones(z.shape[0])
        for c in dirs:
            weight *= np.abs(z[:, c]) / (2 * steps[:, c])
        best = max(best, float(np.max(np.abs(acc) * weight)))
    return best


def marcinkiewicz_probe(params: Params, box: ProbeBox = ProbeBox(), refine: bool = True) -> ProbeReport:
    """Sampled suprema of the multiplier bound quantities at the reduced s.

    (a) (|s| + |omega eta| + |lam xi_1|) / |N(eta, xi)| on |s + omega eta| >= |s|/2,
    (b) the Marcinkiewicz mixed-derivative quantities of the cut-off symbol,
    together with ceilings C (1 + lam^2/|s|) and C (1 + lam^2/|s|)^3, C fitted.
    """
    s_t = reduce_s(params.s, params.omega)
    if s_t == 0:
        raise SingularPoint("s lies on omega*Z; the probe needs a reduced s different from zero")
    z = _probe_points(s_t, params, box, box.n_points)
    ratios = _ratio_a(s_t, params, z)
    i_max = int(np.argmax(ratios))
    sup_a = float(ratios[i_max])
    refined = sup_a
    arg = z[i_max]
    if refine:
        order = np.argsort(ratios)[::-1][:8]
        for idx in order:
            res = optimize.minimize(lambda w: -float(_ratio_a(s_t, params, w[None])[0]), z[idx],
                                    method="Nelder-Mead",
                                    options={"xatol": 1e-12, "fatol": 1e-12, "maxiter": 4000})
            if -res.fun > refined:
                refined, arg = float(-res.fun), res.x
    zd = _probe_points(s_t, params, box, box.n_derivative_points, seed_offset=1)
    sup_b = _mixed_derivative_sup(s_t, params, zd)
    base = 1 + params.lam ** 2 / abs(s_t)
    c_lin = refined / base
    c_cub = sup_b / base ** 3
    return ProbeReport(s_t, sup_a, refined, tuple(float(a) for a in arg), sup_b,
                       c_lin * base, c_cub * base ** 3, c_lin, c_cub, box.n_points)


# --- time-periodic assembly ---------------------------------------------------

def mode_frequency_ratio(period: float, omega: float,
                         ratio: Optional[RatioClass] = None) -> RatioClass:
    return ratio if ratio is not None else classify_ratio(2 * math.pi / period, omega)


def split_modes(u: TPSeries, omega: float, ratio: Optional[RatioClass] = None) -> Tuple[TPSeries, TPSeries]:
    """Modes with (2 pi / T) k in omega*Z, and the rest.

    With (2 pi / T) / omega = c/d in lowest terms, k qualifies iff d divides k.
    """
    ratio = mode_frequency_ratio(u.period, omega, ratio)
    if not ratio.is_rational:
        raise IrrationalRatio("the mode split needs a rational ratio of time frequency to angular speed")
    first = {k: f for k, f in u.modes.items() if k % ratio.d == 0}
    second = {k: f for k, f in u.modes.items() if k % ratio.d != 0}
    return TPSeries(u.period, first), TPSeries(u.period, second)


@dataclass
class TPResult:
    velocity: TPSeries
    pressure: TPSeries
    report: "object"
    mode_reports: Dict[int, SolveReport] = field(default_factory=dict)

    def __iter__(self):
        return iter((self.velocity, self.pressure, self.report))

    @property
    def max_residual(self) -> float:
        return max((r.residual_interior for r in self.mode_reports.values()), default=0.0)


def assemble_tp(f: TPSeries, params: Params, grid: SpectralGrid, n_time_nodes: int,
                ratio: Optional[RatioClass] = None, box=None) -> TPResult:
    """Per-mode rotating resolvent solves with s = (2 pi / T) k.

    Refuses an irrational ratio of time frequency to angular speed, since the
    per-mode constants then have no common bound.
    """
    ratio = mode_frequency_ratio(f.period, params.omega, ratio)
    if not ratio.is_rational:
        raise IrrationalRatio("time-periodic solutions need (2 pi / T) / omega rational; "
                              "for an irrational ratio the lattice gaps accumulate at zero")
    from .estimates import tp_estimate_report

    alpha = 2 * math.pi / f.period
    u_modes, p_modes, reports = {}, {}, {}
    for k, fk in f.modes.items():
        rep = solve_resolvent_rotating(fk, params.with_s(alpha * k), n_time_nodes, grid)
        u_modes[k], p_modes[k], reports[k] = rep.velocity, rep.pressure, rep
    u = TPSeries(f.period, u_modes)
    p = TPSeries(f.period, p_modes)
    report = tp_estimate_report(u, p, f, params, grid, box=box)
    return TPResult(u, p, report, reports)
