"""Smooth closed-form test profiles with declared angular bandwidth."""

from __future__ import annotations

import itertools
import math
from typing import Optional

import numpy as np

from .core import ClosedFormField, leray_apply


def _monomials(degree: int):
    return [e for e in itertools.product(range(degree + 1), repeat=3) if sum(e) <= degree]


def gaussian_poly(seed: int, degree: int = 2, width: float = 1.0, solenoidal: bool = False,
                  shift: float = 0.0) -> ClosedFormField:
    """exp(-|xi - shift e1|^2 / (2 width^2)) times a random complex polynomial.

    The angular bandwidth about e1 is the polynomial degree, since powers of
    xi_2, xi_3 up to ``degree`` carry angular modes up to ``degree``; the
    solenoidal projection adds two.
    """
    rng = np.random.default_rng(seed)
    mons = _monomials(degree)
    coef = rng.standard_normal((3, len(mons))) + 1j * rng.standard_normal((3, len(mons)))
    exps = np.array(mons)

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        env = np.exp(-((xi[..., 0] - shift) ** 2 + xi[..., 1] ** 2 + xi[..., 2] ** 2) / (2 * width ** 2))
        basis = np.stack([xi[..., 0] ** a * xi[..., 1] ** b * xi[..., 2] ** c for a, b, c in exps], axis=0)
        vals = np.tensordot(coef, basis, axes=([1], [0])) * env
        return leray_apply(xi, vals) if solenoidal else vals

    return ClosedFormField(f, 3, name="gaussian_poly",
                           args={"seed": seed, "degree": degree, "width": width,
                                 "solenoidal": solenoidal, "shift": shift},
                           bandwidth=degree + 2 if solenoidal else degree)


def axial_gaussian(width: float = 1.0, amplitude: complex = 1.0) -> ClosedFormField:
    """e1-directed field with a radial Gaussian profile; invariant under rotation about e1."""

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        env = amplitude * np.exp(-np.sum(xi * xi, axis=-1) / (2 * width ** 2))
        out = np.zeros((3,) + env.shape, dtype=complex)
        out[0] = env
        return out

    l2 = abs(amplitude) ** 2 * (math.pi * width ** 2) ** 1.5
    return ClosedFormField(f, 3, name="axial_gaussian", args={"width": width},
                           bandwidth=0, l2_sq=l2)


def radial_scalar(width: float = 1.0) -> ClosedFormField:
    def f(xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-np.sum(xi * xi, axis=-1) / (2 * width ** 2))[None]

    return ClosedFormField(f, 1, name="radial_scalar", args={"width": width}, bandwidth=0)


def swirl_gaussian(width: float = 1.0, scale: float = 1.0) -> ClosedFormField:
    """Solenoidal field (0, -xi_3, xi_2) exp(-|xi|^2/(2 width^2)) scaled by ``scale``."""

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        env = scale * np.exp(-np.sum(xi * xi, axis=-1) / (2 * width ** 2))
        return np.stack([np.zeros_like(env), -xi[..., 2] * env, xi[..., 1] * env]).astype(complex)

    return ClosedFormField(f, 3, name="swirl_gaussian", args={"width": width, "scale": scale},
                           bandwidth=1)


def gradient_field(phi: Optional[ClosedFormField] = None) -> ClosedFormField:
    """xi * phi(xi) for a scalar phi; the Fourier image of a gradient up to i."""
    phi = phi or radial_scalar()

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        return np.moveaxis(xi, -1, 0) * phi(xi)[0]

    return ClosedFormField(f, 3, name="gradient_field", bandwidth=(phi.bandwidth or 0) + 1)
