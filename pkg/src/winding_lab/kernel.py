"""Correlation kernel and one-point density of the bridges at an intermediate time.

K_n(phi, theta; t) = (n / 2 pi) sum_{j<n} S_{j,T-t}(phi) S_{j,t}(-theta) / h_j

with the auxiliary sums

S_{j,a}(phi) = (1/n) sum_{x in L} p_j(x) exp(-(a n/2)(x^2 - 2 i mu x)) exp(i phi n x).

The phase merges into the Gaussian: the summand is a lattice Gaussian of
width a centred at i(mu + phi/a), so the exact Poisson-summed rule of the
orthogonal polynomial module applies unchanged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, lattice_points
from .orthopoly import OPSystem, build_op_system, eval_all, gaussian_rule

log = logging.getLogger(__name__)

# below this |imag| the diagonal of the kernel is treated as real
IMAG_CLAMP = 1e-8


@dataclass(frozen=True)
class KernelContext:
    """Orthogonal polynomials of degree < n at one parameter point and an observation time t."""

    sys: OPSystem
    params: ModelParams
    t: float

    @classmethod
    def build(cls, params: ModelParams, t: float, method: str = "gaussian") -> "KernelContext":
        if not 0.0 < t < params.T:
            raise ValueError(f"t must lie in (0, T), got {t!r}")
        sys = build_op_system(params, params.n - 1, method=method)
        return cls(sys, params, float(t))


def _check_degree(ctx: KernelContext, j: int):
    if not 0 <= j < ctx.params.n:
        raise ValueError(f"degree {j} outside 0..{ctx.params.n - 1}")


def S_values(ctx: KernelContext, a: float, phi: float, degree: int | None = None) -> np.ndarray:
    """S_{j,a}(phi) for j = 0..degree (default n-1), by the exact Gaussian rule."""
    p = ctx.params
    d = p.n - 1 if degree is None else degree
    rule = gaussian_rule(p.n, a, p.mu + phi / a, d)
    vals = eval_all(ctx.sys, rule.nodes, d)
    return rule.apply(vals, p.tau)


def S_sum(ctx: KernelContext, j: int, a: float, phi: float) -> complex:
    """Auxiliary sum S_{j,a}(phi)."""
    _check_degree(ctx, j)
    return complex(S_values(ctx, a, phi, j)[j])


def S_sum_lattice(ctx: KernelContext, j: int, a: float, phi: float, eps: float = 1e-16) -> complex:
    """S_{j,a}(phi) summed directly over the truncated lattice (reference path)."""
    _check_degree(ctx, j)
    p = ctx.params
    # the envelope is exp(-a n x^2/2), so truncate as for return time a
    x = lattice_points(ModelParams(p.n, a, p.mu, p.tau), eps).points
    w = np.exp(-0.5 * a * p.n * x * x + 1j * p.n * (a * p.mu + phi) * x)
    return complex(np.sum(eval_all(ctx.sys, x, j)[j] * w) / p.n)


def correlation_kernel(ctx: KernelContext, phi: float, theta: float) -> complex:
    """K_n(phi, theta; t)."""
    p = ctx.params
    left = S_values(ctx, p.T - ctx.t, phi)
    right = S_values(ctx, ctx.t, -theta)
    return complex(p.n / (2 * math.pi) * np.sum(left * right / ctx.sys.h[:p.n]))


@dataclass
class DensityProfile:
    """One-point function on a grid of angles with the size of the discarded imaginary part."""

    grid: np.ndarray
    density: np.ndarray
    max_imag: float

    def total(self) -> float:
        """Integral over the circle by the trapezoid rule (grid assumed uniform on [-pi, pi))."""
        return float(np.sum(self.density) * 2 * math.pi / len(self.grid))


def density_profile(ctx: KernelContext, grid) -> DensityProfile:
    """K_n(theta, theta; t) at each angle of the grid."""
    grid = np.asarray(grid, dtype=float)
    vals = np.array([correlation_kernel(ctx, th, th) for th in grid])
    max_imag = float(np.max(np.abs(vals.imag))) if len(vals) else 0.0
    if max_imag > IMAG_CLAMP:
        log.warning("density has imaginary part %.3g (tau = %g is not the physical phase?)",
                    max_imag, ctx.params.tau)
    return DensityProfile(grid, vals.real.copy(), max_imag)


def uniform_grid(m: int = 512) -> np.ndarray:
    """m equispaced angles on [-pi, pi)."""
    if m < 1:
        raise ValueError("m must be positive")
    return -math.pi + 2 * math.pi * np.arange(m) / m


def semicircle_overlay(grid, n: int, T: float, t: float) -> np.ndarray:
    """n times the semicircle density of radius 2 sqrt(t (T - t)/T), centred at 0.

    Qualitative comparison only: this is the Brownian-bridge rescaling of the
    band semicircle, exact as n grows only at zero drift and without wrapping.
    """
    r = 2 * math.sqrt(t * (T - t) / T)
    x = np.asarray(grid, dtype=float)
    return n * 2 / (math.pi * r * r) * np.sqrt(np.maximum(r * r - x * x, 0.0))
