"""Spectral fields, norms, the Leray projector and the rotation action.

Conventions
-----------
Fourier transform with symmetric normalisation,

    f^(xi) = (2 pi)^(-3/2) * int f(x) exp(-i x.xi) dx,

so Plancherel holds with constant one.  Vector fields carry their components
on the leading axis; a ``GridField`` stores ``values[c, i1, i2, i3]`` with
``i1`` indexing xi_1.  The grid samples continuum xi-space (it is *not* a DFT
lattice), so every symbol is evaluated at true xi values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Union

import numpy as np
from scipy import ndimage

from .errors import ValidationError

# e1 ^ x as a matrix
E1_CROSS = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class Params:
    """Physical parameters: translation speed ``lam``, angular speed ``omega``,
    resolvent parameter ``s``, time period and Lebesgue exponent ``q``."""

    lam: float
    omega: float
    s: float = 0.0
    period: float = 2 * math.pi
    q: float = 2.0

    def __post_init__(self):
        for name in ("lam", "omega", "period"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValidationError(f"{name} must be positive and finite, got {val!r}")
        if not np.isfinite(self.s):
            raise ValidationError(f"s must be finite, got {self.s!r}")
        if not self.q > 1:
            raise ValidationError(f"q must exceed 1, got {self.q!r}")

    @property
    def alpha(self) -> float:
        """Angular frequency 2 pi / T of the time period."""
        return 2 * math.pi / self.period

    def with_s(self, s: float) -> "Params":
        return replace(self, s=float(s))

    def require_q_below(self, bound: float, what: str = "this operation"):
        if not self.q < bound:
            raise ValidationError(f"{what} requires q < {bound}, got q = {self.q}")


@dataclass(frozen=True)
class SpectralGrid:
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValidationError("grid half_width must be positive")
        n = self.points_per_axis
        if int(n) != n or n < 3 or n % 2 == 0:
            raise ValidationError(f"points_per_axis must be an odd integer >= 3, got {n!r}")

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / (self.points_per_axis - 1)

    @property
    def axis(self) -> np.ndarray:
        n = self.points_per_axis
        # exact symmetry and an exact zero at the centre
        return (np.arange(n) - (n - 1) // 2) * self.spacing

    @property
    def shape(self) -> tuple:
        n = self.points_per_axis
        return (n, n, n)

    @property
    def center_index(self) -> tuple:
        c = (self.points_per_axis - 1) // 2
        return (c, c, c)

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(N, N, N, 3)``."""
        ax = self.axis
        return np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)

    def interior_mask(self, layers: int = 1) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        sl = slice(layers, self.points_per_axis - layers)
        mask[sl, sl, sl] = True
        return mask


@dataclass(frozen=True)
class PhysicalBox:
    """Symmetric sampling box ``[-half_width, half_width]^3`` in x-space."""

    half_width: float
    samples: int

    def __post_init__(self):
        if not self.half_width > 0 or int(self.samples) != self.samples or self.samples < 2:
            raise ValidationError("physical box needs half_width > 0 and samples >= 2")

    @classmethod
    def reciprocal(cls, grid: SpectralGrid) -> "PhysicalBox":
        """Box on which the discrete inverse transform is an isometry."""
        n = grid.points_per_axis
        dx = 2 * math.pi / (n * grid.spacing)
        return cls(half_width=dx * (n - 1) / 2, samples=n)

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / (self.samples - 1)

    @property
    def axis(self) -> np.ndarray:
        m = self.samples
        return (np.arange(m) - (m - 1) / 2) * self.spacing

    def to_dict(self) -> dict:
        return {"half_width": self.half_width, "samples": self.samples}


class GridField:
    """Spectral field sampled on a ``SpectralGrid``.

    ``valid`` marks nodes whose values are trustworthy (finite-difference
    stencils near the boundary are flagged invalid).
    """

    kind = "grid"

    def __init__(self, grid: SpectralGrid, values, valid: Optional[np.ndarray] = None,
                 bandwidth: Optional[int] = None):
        values = np.asarray(values, dtype=complex)
        if values.ndim == 3:
            values = values[None]
        if values.shape[1:] != grid.shape or values.shape[0] not in (1, 3, 9, 27):
            raise ValidationError(f"values of shape {values.shape} do not fit grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("grid values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.valid = np.ones(grid.shape, dtype=bool) if valid is None else np.asarray(valid, bool)
        self.bandwidth = bandwidth

    @property
    def components(self) -> int:
        return self.values.shape[0]

    def sample(self, grid: SpectralGrid) -> "GridField":
        if grid != self.grid:
            return GridField(grid, self(grid.points()))
        return self

    def __call__(self, xi) -> np.ndarray:
        """Trilinear interpolation, zero outside the box."""
        xi = np.asarray(xi, dtype=float)
        coords = (xi + self.grid.half_width) / self.grid.spacing
        coords = np.moveaxis(coords, -1, 0).reshape(3, -1)
        out = np.empty((self.components, coords.shape[1]), dtype=complex)
        for c in range(self.components):
            re = ndimage.map_coordinates(self.values[c].real, coords, order=1, mode="constant", cval=0.0)
            im = ndimage.map_coordinates(self.values[c].imag, coords, order=1, mode="constant", cval=0.0)
            out[c] = re + 1j * im
        return out.reshape((self.components,) + xi.shape[:-1])

    def __repr__(self):
        return f"GridField(components={self.components}, grid={self.grid})"


@dataclass(frozen=True, eq=False)
class ClosedFormField:
    """Analytic profile evaluable at arbitrary xi.

    ``func`` maps points of shape ``(..., 3)`` to values of shape
    ``(components, ...)``.  ``bandwidth`` is the largest angular Fourier mode
    (about e1) of any Cartesian component; ``l2_sq`` is the exact squared L2
    norm when known.
    """

    func: Callable[[np.ndarray], np.ndarray]
    components: int
    name: str = "closed_form"
    args: Mapping = field(default_factory=dict)
    bandwidth: Optional[int] = None
    l2_sq: Optional[float] = None
    singular: Optional[str] = None

    kind = "closed_form"

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        out = np.asarray(self.func(xi), dtype=complex)
        expected = (self.components,) + xi.shape[:-1]
        if out.shape != expected:
            out = np.broadcast_to(out, expected).copy()
        return out

    def sample(self, grid: SpectralGrid) -> GridField:
        return GridField(grid, self(grid.points()), bandwidth=self.bandwidth)

    def derive(self, func, components=None, name=None, keep_bandwidth=True, **kw) -> "ClosedFormField":
        return ClosedFormField(
            func=func,
            components=self.components if components is None else components,
            name=name or self.name,
            args=self.args,
            bandwidth=self.bandwidth if keep_bandwidth else None,
            **kw,
        )


SpectralField = Union[GridField, ClosedFormField]


def zero_field(components: int = 3) -> ClosedFormField:
    def f(xi):
        return np.zeros((components,) + np.shape(xi)[:-1], dtype=complex)

    return ClosedFormField(f, components, name="zero", bandwidth=0, l2_sq=0.0)


def as_grid(f: SpectralField, grid: Optional[SpectralGrid]) -> GridField:
    if isinstance(f, GridField) and (grid is None or grid == f.grid):
        return f
    if grid is None:
        raise ValidationError("a grid is required to sample a closed-form field")
    return f.sample(grid)


def _map_values(f: SpectralField, op, components=None, keep_bandwidth=True, name=None):
    """Apply a pointwise map ``op(xi, values) -> values`` to either kind."""
    if isinstance(f, GridField):
        out = op(f.grid.points(), f.values)
        return GridField(f.grid, out, valid=f.valid,
                         bandwidth=f.bandwidth if keep_bandwidth else None)
    return f.derive(lambda xi: op(xi, f(xi)), components=components,
                    keep_bandwidth=keep_bandwidth, name=name)


# --- Leray projection -------------------------------------------------------

def leray_apply(xi: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """(I - xi xi^T / |xi|^2) vec, identity at xi = 0."""
    xi = np.moveaxis(np.asarray(xi, dtype=float), -1, 0)
    # normalise first so tiny |xi| neither underflows nor overflows
    scale = np.max(np.abs(xi), axis=0)
    unit = np.divide(xi, scale, out=np.zeros_like(xi), where=scale > 0)
    r2 = np.sum(unit * unit, axis=0)
    dot = np.sum(unit * vec, axis=0)
    coef = np.divide(dot, r2, out=np.zeros_like(dot, dtype=complex), where=r2 > 0)
    return vec - unit * coef


def leray_project(f: SpectralField) -> SpectralField:
    if f.components != 3:
        raise ValidationError("leray_project needs a 3-component field")
    # entries of xi xi^T / |xi|^2 carry angular modes up to 2 in Cartesian components
    out = _map_values(f, leray_apply, name=f"leray({getattr(f, 'name', 'grid')})")
    if f.bandwidth is None:
        return out
    if isinstance(out, GridField):
        out.bandwidth = f.bandwidth + 2
        return out
    return replace(out, bandwidth=f.bandwidth + 2)


# --- rotations --------------------------------------------------------------

def rotation_matrix(t, omega: float = 1.0) -> np.ndarray:
    """Rotation by the angle ``omega * t`` about e1; vectorised over ``t``."""
    ang = omega * np.asarray(t, dtype=float)
    c, s = np.cos(ang), np.sin(ang)
    out = np.zeros(ang.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = c
    out[..., 1, 2] = -s
    out[..., 2, 1] = s
    out[..., 2, 2] = c
    return out


def _apply_matrix(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    # vec has components on axis 0
    return np.einsum("ab,b...->a...", mat, vec)


def rotate_spectral(f: SpectralField, t: float, omega: float,
                    grid: Optional[SpectralGrid] = None) -> SpectralField:
    """xi -> Q f(Q^T xi) with Q = rotation_matrix(t, omega).

    Closed-form input is rotated exactly; grid input is interpolated
    trilinearly at the rotated nodes (zero outside the box).
    """
    q = rotation_matrix(t, omega)

    def rotated(values_at):
        return _apply_matrix(q, values_at) if values_at.shape[0] == 3 else values_at

    if isinstance(f, ClosedFormField):
        return f.derive(lambda xi: rotated(f(np.asarray(xi, float) @ q)),
                        name=f"rot({f.name})", l2_sq=f.l2_sq, singular=f.singular)
    g = f if grid is None else as_grid(f, grid)
    pts = g.grid.points()
    # rows of pts times Q give Q^T xi
    return GridField(g.grid, rotated(g(pts @ q)), bandwidth=g.bandwidth)


# --- physical-space transforms and norms ------------------------------------

@dataclass(frozen=True)
class NormResult:
    value: float
    q: float
    truncated: bool = False
    box: Optional[PhysicalBox] = None


def inverse_transform(f: GridField, box: PhysicalBox) -> np.ndarray:
    """Riemann-sum inverse transform sampled on ``box``, shape ``(c, M, M, M)``.

    The sum is separable, so it is applied one axis at a time.
    """
    grid = f.grid
    xs = box.axis
    kern = np.exp(1j * np.outer(xs, grid.axis))  # (M, N)
    out = f.values
    for ax in (1, 2, 3):
        out = np.moveaxis(np.tensordot(kern, out, axes=([1], [ax])), 0, ax)
    return out * (grid.spacing ** 3 / (2 * math.pi) ** 1.5)


def _pointwise_modulus(values: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=0))


def lq_norm(f: SpectralField, q: float, grid: Optional[SpectralGrid] = None,
            box: Optional[PhysicalBox] = None) -> NormResult:
    """L^q norm of the physical-space field whose transform is ``f``.

    q = 2 is evaluated in Fourier space (exactly for profiles that declare
    ``l2_sq``); other exponents go through ``inverse_transform`` on ``box`` and
    are flagged as truncated.
    """
    if not q > 1:
        raise ValidationError(f"q must exceed 1, got {q}")
    if q == 2:
        if isinstance(f, ClosedFormField) and f.l2_sq is not None:
            return NormResult(math.sqrt(f.l2_sq), 2.0)
        g = as_grid(f, grid)
        mod2 = np.sum(np.abs(g.values) ** 2, axis=0)
        return NormResult(math.sqrt(float(np.sum(mod2)) * g.grid.spacing ** 3), 2.0)
    if box is None:
        raise ValidationError("q != 2 norms need a physical box")
    g = as_grid(f, grid)
    phys = _pointwise_modulus(inverse_transform(g, box))
    val = (float(np.sum(phys ** q)) * box.spacing ** 3) ** (1.0 / q)
    return NormResult(val, float(q), truncated=True, box=box)


def physical_l2(f: GridField, box: PhysicalBox) -> float:
    phys = inverse_transform(f, box)
    return math.sqrt(float(np.sum(np.abs(phys) ** 2)) * box.spacing ** 3)


# --- differential operators in Fourier space --------------------------------

def _orbit_points(pts: np.ndarray, angles: np.ndarray) -> np.ndarray:
    rot = rotation_matrix(angles, 1.0)  # (J, 3, 3)
    return np.einsum("jab,...b->j...a", rot, pts)


def angular_derivative_at(f: SpectralField, pts: np.ndarray, step: float = 2e-3) -> np.ndarray:
    """(e1 ^ xi) . grad_xi f at ``pts`` by differentiating along the rotation orbit.

    Bandlimited profiles are differentiated spectrally (exact); others use a
    fourth-order central difference in the rotation angle.
    """
    pts = np.asarray(pts, dtype=float)
    bw = getattr(f, "bandwidth", None)
    if bw is not None:
        nang = 2 * int(bw) + 3
        ang = 2 * math.pi * np.arange(nang) / nang
        vals = f(_orbit_points(pts, ang))  # (c, J, ...)
        coef = np.fft.fft(vals, axis=1)
        modes = np.fft.fftfreq(nang, 1.0 / nang)
        shape = (1, nang) + (1,) * (vals.ndim - 2)
        return np.sum(1j * modes.reshape(shape) * coef, axis=1) / nang
    ang = np.array([-2 * step, -step, step, 2 * step])
    vals = f(_orbit_points(pts, ang))
    return (vals[:, 0] - 8 * vals[:, 1] + 8 * vals[:, 2] - vals[:, 3]) / (12 * step)


def angular_derivative(f: SpectralField, grid: Optional[SpectralGrid] = None) -> GridField:
    """(e1 ^ xi) . grad_xi f on the grid.

    Grid input: second-order centred differences, one-sided at the boundary;
    boundary nodes are marked invalid.  Closed-form input: orbit derivative at
    the nodes, all valid.
    """
    if isinstance(f, ClosedFormField):
        if grid is None:
            raise ValidationError("closed-form fields need a grid")
        return GridField(grid, angular_derivative_at(f, grid.points()), bandwidth=f.bandwidth)
    g = f if grid is None else as_grid(f, grid)
    h = g.grid.spacing
    pts = g.grid.points()
    d2 = np.gradient(g.values, h, axis=2, edge_order=2)
    d3 = np.gradient(g.values, h, axis=3, edge_order=2)
    out = -pts[..., 2] * d2 + pts[..., 1] * d3
    return GridField(g.grid, out, valid=g.valid & g.grid.interior_mask())


def rotation_term(f: SpectralField, grid: Optional[SpectralGrid] = None) -> GridField:
    """Fourier image of e1^x.grad v - e1^v."""
    d = angular_derivative(f, grid)
    v = as_grid(f, d.grid)
    return GridField(d.grid, d.values - _apply_matrix(E1_CROSS, v.values), valid=d.valid)


def oseen_symbol(xi: np.ndarray, s: float, lam: float) -> np.ndarray:
    """is + |xi|^2 - i lam xi_1."""
    xi = np.asarray(xi, dtype=float)
    return 1j * s + np.sum(xi * xi, axis=-1) - 1j * lam * xi[..., 0]


@dataclass(frozen=True)
class OperatorResult:
    field: GridField
    boundary_layer_excluded: bool


def apply_resolvent_operator(v: SpectralField, p: SpectralField, params: Params,
                             grid: SpectralGrid) -> OperatorResult:
    """Forward map (v, p) -> g of the rotating Oseen resolvent system in Fourier space:

        g^ = (is + |xi|^2 - i lam xi_1) v^ + omega ((e1^xi).grad v^ - e1^v^) + i xi p^
    """
    if grid.points_per_axis < 3:
        raise ValidationError("grid too small")
    if v.components != 3 or p.components != 1:
        raise ValidationError("need a vector velocity and a scalar pressure")
    pts = grid.points()
    vg = as_grid(v, grid)
    pg = as_grid(p, grid)
    rot = rotation_term(v, grid)
    sym = oseen_symbol(pts, params.s, params.lam)
    grad_p = 1j * np.moveaxis(pts, -1, 0) * pg.values[0]
    out = sym * vg.values + params.omega * rot.values + grad_p
    excluded = not bool(np.all(rot.valid))
    return OperatorResult(GridField(grid, out, valid=rot.valid & vg.valid), excluded)


def resolvent_operator_field(v: ClosedFormField, p: ClosedFormField, params: Params) -> ClosedFormField:
    """Pointwise version of ``apply_resolvent_operator`` for bandlimited closed forms."""
    if v.components != 3 or p.components != 1:
        raise ValidationError("need a vector velocity and a scalar pressure")
    if v.bandwidth is None or p.bandwidth is None:
        raise ValidationError("the pointwise operator needs declared angular bandwidths")

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        vals = v(xi)
        rot = angular_derivative_at(v, xi) - _apply_matrix(E1_CROSS, vals)
        grad_p = 1j * np.moveaxis(xi, -1, 0) * p(xi)[0]
        return oseen_symbol(xi, params.s, params.lam) * vals + params.omega * rot + grad_p

    # xi p raises the pressure bandwidth by one
    return ClosedFormField(f, 3, name=f"op[{v.name}]", bandwidth=max(v.bandwidth, p.bandwidth + 1))


def spectral_multiply(f: SpectralField, mult: Callable[[np.ndarray], np.ndarray],
                      components: int, name: str = "product") -> SpectralField:
    """Apply a multiplier ``mult(xi, values) -> values`` (same as ``_map_values``)."""
    return _map_values(f, mult, components=components, name=name)


def gradient(f: SpectralField) -> SpectralField:
    """Fourier image of grad f; components ordered (d_1 f_c, d_2 f_c, d_3 f_c) per c."""
    def op(xi, vals):
        xi_c = np.moveaxis(np.asarray(xi, float), -1, 0)
        return (1j * xi_c[None] * vals[:, None]).reshape((-1,) + vals.shape[1:])

    return _map_values(f, op, components=3 * f.components, keep_bandwidth=False, name="grad")


def hessian(f: SpectralField) -> SpectralField:
    def op(xi, vals):
        xi_c = np.moveaxis(np.asarray(xi, float), -1, 0)
        prod = -xi_c[:, None] * xi_c[None, :]
        return (prod[None] * vals[:, None, None]).reshape((-1,) + vals.shape[1:])

    return _map_values(f, op, components=9 * f.components, keep_bandwidth=False, name="hess")


@dataclass(frozen=True)
class TPSeries:
    """Time-periodic field as a finite map from time mode k to its coefficient
    field; the time dependence is sum_k f_k exp(2 pi i k t / period)."""

    period: float
    modes: Mapping[int, SpectralField]

    def __post_init__(self):
        if not self.period > 0:
            raise ValidationError("period must be positive")
        for k in self.modes:
            if int(k) != k:
                raise ValidationError(f"mode index {k!r} is not an integer")
        object.__setattr__(self, "modes", {int(k): self.modes[k] for k in sorted(self.modes)})

    @property
    def indices(self) -> list:
        return list(self.modes)

    def a_norm(self, per_mode: Callable[[SpectralField], float]) -> float:
        """Sum over modes of ``per_mode(f_k)``."""
        return float(sum(per_mode(f) for f in self.modes.values()))
