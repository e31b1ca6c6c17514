"""Closed-form large-n objects: critical drift, g-function, phase function and predictions.

Every square root and logarithm is taken in the band frame w = z - i mu, where
the band is the real segment [-2/sqrt(T), 2/sqrt(T)].  Boundary values on the
band are obtained by passing a point whose imaginary part is a signed zero
(+0.0 for the upper side, -0.0 for the lower side); numpy's principal
branches honour the sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_hermite, gammaln

from .errors import BandPoint, NearBandEdge, NotInWindow, OutOfBand, OutOfRegime, OutsideDisk, RegionAmbiguous
from .winding import WindingDistribution

PI2 = math.pi ** 2


def _check_T(T):
    if not 0 < T < PI2:
        raise OutOfRegime(f"need 0 < T < pi^2, got T={T}")


def mu_crit(T: float) -> float:
    """Critical drift at which nonzero winding switches on."""
    _check_T(T)
    s = math.sqrt(PI2 - T)
    return s / T - math.log(T) / (2 * math.pi) + math.log(math.pi - s) / math.pi


def delta(T: float, mu: float) -> float:
    """Depth of the horizontal line R - i*delta through the critical point."""
    return -mu + 2 * math.sqrt(PI2 - T) / T


def z_tilde_c(T: float, mu: float) -> complex:
    """Birth point of the outlying zeros on the imaginary axis."""
    return 1j * mu - 2j * math.sqrt(PI2 - T) / T


def band_endpoints(T: float, mu: float):
    c = 2 / math.sqrt(T)
    return complex(-c, mu), complex(c, mu)


def _frame(z, T, mu, side=None):
    """Band-frame coordinate; raises on the open band unless a side is chosen."""
    w = np.asarray(z, dtype=complex) - 1j * mu
    c = 2 / math.sqrt(T)
    on_band = (np.abs(w.imag) < 1e-14) & (np.abs(w.real) <= c)
    if side is None:
        if np.any(on_band):
            raise BandPoint("point on the band [a, b]; pass side=+1 or side=-1 for boundary values")
    else:
        zero = 0.0 if side > 0 else -0.0
        w = np.where(on_band, w.real + 1j * zero, w)
        # np.where loses the signed zero; rebuild explicitly
        w = np.array([complex(v.real, zero) if b else v for v, b in zip(np.ravel(w), np.ravel(on_band))]).reshape(w.shape)
    return w, c


def _unwrap(v):
    return v if np.ndim(v) else complex(v)


def R_fn(z, T: float, mu: float, side=None):
    """sqrt((z-a)(z-b)) with cut [a, b] and R ~ z at infinity."""
    w, c = _frame(z, T, mu, side)
    return _unwrap(np.sqrt(w - c) * np.sqrt(w + c))


def g_fn(z, T: float, mu: float, side=None):
    """g(z) = g0(z - i mu), g0(w) = (T/4) w (w - R) - log(w - R) - 1/2 + log(2/T)."""
    w, c = _frame(z, T, mu, side)
    r = np.sqrt(w - c) * np.sqrt(w + c)
    return _unwrap(0.25 * T * w * (w - r) - np.log(w - r) - 0.5 + math.log(2 / T))


def ell_const(T: float, mu: float) -> float:
    return -1 - math.log(T) - 0.5 * T * mu * mu


def gamma_fn(z, T: float, mu: float, side=None):
    """((z-a)/(z-b))^(1/4) with gamma(inf) = 1."""
    w, c = _frame(z, T, mu, side)
    return _unwrap((w + c) ** 0.25 / (w - c) ** 0.25)


def semicircle_density(x, T: float):
    """(T/2 pi) sqrt(4/T - x^2) on |x| <= 2/sqrt(T)."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 2 / math.sqrt(T) * (1 + 1e-15)):
        raise OutOfBand("abscissa outside the band")
    out = T / (2 * math.pi) * np.sqrt(np.maximum(4 / T - x * x, 0.0))
    return out if out.ndim else float(out)


def semicircle_cdf(x, T: float) -> float:
    """nu([-c, x]) for the semicircle law of half-width c = 2/sqrt(T)."""
    c = 2 / math.sqrt(T)
    u = min(max(x / c, -1.0), 1.0)
    return 0.5 + (u * math.sqrt(1 - u * u) + math.asin(u)) / math.pi


def potential(z, T: float, mu: float):
    """V(z) = T z^2/2 - i T mu z."""
    z = np.asarray(z, dtype=complex)
    return _unwrap(0.5 * T * z * z - 1j * T * mu * z)


def phi_fn(z, T: float, mu: float, side=None):
    """Phase function 2g - V - ell - 2 pi i z."""
    z = np.asarray(z, dtype=complex)
    g = np.asarray(g_fn(z, T, mu, side))
    return _unwrap(2 * g - potential(z, T, mu) - ell_const(T, mu) - 2j * math.pi * z)


def phi_closed_form(T: float, mu: float) -> complex:
    """phi(-i delta) in closed form."""
    s = math.sqrt(PI2 - T)
    return complex(-2 * math.pi * s / T + 2 * math.pi * mu + math.log(T) - 2 * math.log(math.pi - s), -math.pi)


def D_fn(z, T: float, mu: float, side=None):
    """D(z) = (sqrt(T)/(2i)) (z - i mu + R(z))."""
    w, c = _frame(z, T, mu, side)
    r = np.sqrt(w - c) * np.sqrt(w + c)
    return _unwrap(math.sqrt(T) / 2j * (w + r))


def alpha_fn(z, T: float, mu: float, side=None):
    """alpha(z) = i (D(zc) - D(z)) / (1 + D(zc) D(z))."""
    dc = D_fn(z_tilde_c(T, mu), T, mu)
    d = np.asarray(D_fn(z, T, mu, side))
    return _unwrap(1j * (dc - d) / (1 + dc * d))


def alpha_inf_const(T: float) -> complex:
    """Limit of alpha(z) at infinity, -i/D(zc) = i (pi - sqrt(pi^2 - T))/sqrt(T)."""
    _check_T(T)
    return 1j * (math.pi - math.sqrt(PI2 - T)) / math.sqrt(T)


def lambda_const(T: float) -> complex:
    """i (pi + s + i sqrt(T)) / (pi - s - i sqrt(T)),  s = sqrt(pi^2 - T)."""
    _check_T(T)
    s, r = math.sqrt(PI2 - T), math.sqrt(T)
    return 1j * complex(math.pi + s, r) / complex(math.pi - s, -r)


def lambda_simplified(T: float) -> float:
    """The same constant reduced to -sqrt(T)/(pi - sqrt(pi^2 - T))."""
    return -math.sqrt(T) / (math.pi - math.sqrt(PI2 - T))


def W1_const(T: float) -> float:
    """Derivative of the local coordinate at the critical point."""
    _check_T(T)
    return math.sqrt(T / (2 * math.pi)) * (PI2 - T) ** 0.25


def disk_radius(T: float, mu: float) -> float:
    return min(delta(T, mu) / 2, 0.5)


def W_local(z, T: float, mu: float, radius: float | None = None):
    """Local coordinate with phi = -i pi + c - W^2, real and increasing on R - i delta."""
    zc = z_tilde_c(T, mu)
    rad = disk_radius(T, mu) if radius is None else radius
    z = np.asarray(z, dtype=complex)
    d = z - zc
    if np.any(np.abs(d) > rad):
        raise OutsideDisk(f"point farther than {rad} from the critical point")
    cc = 2 * math.pi * (mu - mu_crit(T))
    u = -1j * math.pi + cc - np.asarray(phi_fn(z, T, mu))
    with np.errstate(all="ignore"):
        out = np.where(d == 0, 0.0, d * np.sqrt(u / np.where(d == 0, 1.0, d * d)))
    return _unwrap(out)


def kappa(k: int) -> float:
    """Leading coefficient of the orthonormal Hermite polynomial."""
    return math.exp(0.5 * k * math.log(2) - 0.25 * math.log(math.pi) - 0.5 * gammaln(k + 1))


def hermite_orthonormal(k: int, zeta):
    """Hermite polynomial of degree k, orthonormal for exp(-zeta^2) on R."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    norm = math.exp(0.5 * (k * math.log(2) + gammaln(k + 1)) + 0.25 * math.log(math.pi))
    out = eval_hermite(k, np.asarray(zeta)) / norm
    return out if np.ndim(out) else out.item()


def F_coeff(j: int, T: float, mu: float, nval: int) -> float:
    """Winding odds scale F_j; F_{-1} = 0."""
    if j == -1:
        return 0.0
    if j < -1:
        raise ValueError("j must be >= -1")
    _check_T(T)
    base = T / ((2 * math.pi) ** 1.5 * (PI2 - T) ** 0.25)
    logf = (gammaln(j + 1) - (j + 1) * math.log(2) - 0.5 * math.log(math.pi) + (2 * j + 1) * math.log(base)
            + 2 * math.pi * nval * (mu - mu_crit(T)) - (j + 0.5) * math.log(nval))
    return math.exp(logf)


def G_coeff(j: int, T: float, mu: float, tau: float, nval: int) -> complex:
    return (-1) ** (nval + 1) * F_coeff(j, T, mu, nval) * complex(math.cos(2 * math.pi * tau), math.sin(2 * math.pi * tau))


def hermite_window_k(nval: int, T: float, mu: float) -> int:
    """k >= 0 with mu_c + (k - 1/2) L < mu <= mu_c + (k + 1/2) L, L = log n/(2 pi n)."""
    if nval < 2:
        raise ValueError("n must be at least 2")
    step = math.log(nval) / (2 * math.pi * nval)
    x = (mu - mu_crit(T)) / step
    if x <= -0.5:
        raise NotInWindow(f"mu = {mu} lies below the first Hermite window")
    return max(0, math.ceil(x - 0.5))


@dataclass(frozen=True)
class AsymptoticContext:
    """Cached analytic constants for one (T, mu)."""

    T: float
    mu: float
    a: complex
    b: complex
    mu_c: float
    delta: float
    z_tilde_c: complex
    alpha_inf: complex
    lam: complex
    ell: float
    W1: float

    @classmethod
    def build(cls, T: float, mu: float) -> "AsymptoticContext":
        _check_T(T)
        a, b = band_endpoints(T, mu)
        return cls(T, mu, a, b, mu_crit(T), delta(T, mu), z_tilde_c(T, mu), alpha_inf_const(T),
                   lambda_const(T), ell_const(T, mu), W1_const(T))


def classify(z: complex, T: float, mu: float, margin: float = 0.1) -> str:
    """'outer', 'band' or 'disk' for the asymptotic formulas; raises in margins."""
    w = complex(z) - 1j * mu
    c = 2 / math.sqrt(T)
    if min(abs(w - c), abs(w + c)) < margin:
        raise NearBandEdge(f"z = {z} within {margin} of a band endpoint")
    zc = z_tilde_c(T, mu)
    rad = disk_radius(T, mu)
    if abs(z - zc) < rad:
        return "disk"
    if abs(w.imag) < 1e-14 and abs(w.real) < c:
        return "band"
    dist = abs(w.imag) if abs(w.real) <= c else min(abs(w - c), abs(w + c))
    if dist < margin:
        raise RegionAmbiguous(f"z = {z} within {margin} of the band")
    if abs(z - zc) < rad + margin:
        raise RegionAmbiguous(f"z = {z} on the edge of the critical disk")
    return "outer"


def _boundary_sum(z, T, mu, nval, k=0):
    total = 0j
    ainf = alpha_inf_const(T)
    for side in (+1, -1):
        g = g_fn(z, T, mu, side)
        gm = gamma_fn(z, T, mu, side)
        term = np.exp(nval * g) * (gm + 1 / gm) / 2
        if k:
            term *= (alpha_fn(z, T, mu, side) / ainf) ** k
        total += term
    return complex(total)


def predict_poly_subcritical(z: complex, nval: int, T: float, mu: float, margin: float = 0.1) -> complex:
    """Leading-order p_{n,n}(z) for |mu| < mu_c."""
    _check_T(T)
    if abs(mu) >= mu_crit(T):
        raise OutOfRegime("subcritical formulas need |mu| < mu_c")
    w = complex(z) - 1j * mu
    c = 2 / math.sqrt(T)
    if min(abs(w - c), abs(w + c)) < margin:
        raise NearBandEdge(f"z = {z} within {margin} of a band endpoint")
    if abs(w.imag) < 1e-14 and abs(w.real) < c:
        return _boundary_sum(z, T, mu, nval)
    dist = abs(w.imag) if abs(w.real) <= c else min(abs(w - c), abs(w + c))
    if dist < margin:
        raise RegionAmbiguous(f"z = {z} within {margin} of the band")
    gm = gamma_fn(z, T, mu)
    return complex(np.exp(nval * g_fn(z, T, mu)) * (gm + 1 / gm) / 2)


def predict_poly_hermite(z: complex, nval: int, T: float, mu: float, k: int | None = None,
                         margin: float = 0.1) -> complex:
    """Leading-order p_{n,n}(z) in the k-th Hermite window."""
    kk = hermite_window_k(nval, T, mu)
    if k is not None and k != kk:
        raise OutOfRegime(f"mu lies in window {kk}, not {k}")
    k = kk
    region = classify(z, T, mu, margin)
    if region == "band":
        return _boundary_sum(z, T, mu, nval, k)
    g = g_fn(z, T, mu)
    gm = gamma_fn(z, T, mu)
    base = np.exp(nval * g) * (gm + 1 / gm) / 2
    ratio = alpha_fn(z, T, mu) / alpha_inf_const(T)
    if region == "outer":
        return complex(base * ratio ** k)
    W = W_local(z, T, mu)
    if k == 0:
        return complex(base)
    herm = hermite_orthonormal(k, math.sqrt(nval) * W) if np.isreal(W) else _hermite_complex(k, math.sqrt(nval) * W)
    return complex(base * (ratio / W) ** k * herm / (kappa(k) * nval ** (k / 2)))


def _hermite_complex(k, zeta):
    """Orthonormal Hermite polynomial at a complex argument (three-term recurrence)."""
    h_prev, h = 0j, complex(math.pi ** -0.25)
    for j in range(k):
        h, h_prev = (math.sqrt(2 / (j + 1)) * zeta * h - math.sqrt(j / (j + 1)) * h_prev), h
    return h


@dataclass(frozen=True)
class NormPrediction:
    h_nn: complex
    inv_h_nnm1: complex
    beta: complex
    gamma_sq: complex

    @property
    def log_abs_h_nn(self) -> float:
        return math.log(abs(self.h_nn))


def _sub_h(nval, T, mu):
    e = nval * (0.5 * T * mu * mu + 1)
    h = 2 * math.pi * math.exp(-(nval + 0.5) * math.log(T) - e)
    inv = math.exp((nval - 0.5) * math.log(T) + e) / (2 * math.pi)
    return h, inv


def predict_norms_subcritical(nval: int, T: float, mu: float) -> NormPrediction:
    _check_T(T)
    if abs(mu) >= mu_crit(T):
        raise OutOfRegime("subcritical formulas need |mu| < mu_c")
    h, inv = _sub_h(nval, T, mu)
    return NormPrediction(complex(h), complex(inv), 1j * mu, complex(1 / T))


def predict_norms_hermite(nval: int, T: float, mu: float, tau: float, k: int | None = None) -> NormPrediction:
    kk = hermite_window_k(nval, T, mu)
    if k is not None and k != kk:
        raise OutOfRegime(f"mu lies in window {kk}, not {k}")
    k = kk
    h, inv = _sub_h(nval, T, mu)
    lam = lambda_const(T)
    ainf = alpha_inf_const(T)
    pref = 2 * math.pi / math.sqrt(T)
    gk = G_coeff(k, T, mu, tau, nval)
    up = gk / (1 + gk)
    down = 0j
    if k > 0:
        ginv = 1 / G_coeff(k - 1, T, mu, tau, nval)
        down = ginv / (1 + ginv)
    h_nn = h * (1 + pref * up * lam + pref * down / lam) * ainf ** (-2 * k)
    inv_h = inv * (1 + pref * up / lam + pref * down * lam) * ainf ** (2 * k)
    g2 = (1 + pref * (up + down) * (lam + 1 / lam) + pref ** 2 * (up ** 2 + down ** 2)) / T
    return NormPrediction(complex(h_nn), complex(inv_h), complex("nan"), complex(g2))


def predict_winding_hermite(nval: int, T: float, mu: float, k: int | None = None) -> WindingDistribution:
    kk = hermite_window_k(nval, T, mu)
    if k is not None and k != kk:
        raise OutOfRegime(f"mu lies in window {kk}, not {k}")
    k = kk
    fk = F_coeff(k, T, mu, nval)
    fkm = F_coeff(k - 1, T, mu, nval)
    inv = 1 / fkm if fkm > 0 else 0.0
    z = 1 + fk + inv
    probs = {k: 1 / z, k + 1: fk / z}
    if k > 0:
        probs[k - 1] = inv / z
    return WindingDistribution(dict(sorted(probs.items())), 0.0, 0)


def sigchart_grid(T: float, mu: float, x_range, y_range, resolution: int = 201):
    """Re phi on a rectangular grid; returns (x, y, re_phi) arrays, NaN on the band."""
    xs = np.linspace(x_range[0], x_range[1], resolution)
    ys = np.linspace(y_range[0], y_range[1], resolution)
    X, Y = np.meshgrid(xs, ys)
    Z = X + 1j * Y
    w = Z - 1j * mu
    c = 2 / math.sqrt(T)
    near = (np.abs(w.imag) < 1e-6) & (np.abs(w.real) <= c + 1e-6)
    Zs = np.where(near, Z + 1j, Z)
    vals = np.asarray(phi_fn(Zs, T, mu)).real
    vals[near] = np.nan
    return X, Y, vals


def count_zeros_in_disk(f, centre: complex, radius: float, samples: int = 2048) -> int:
    """Argument-principle zero count of an analytic f inside a circle."""
    theta = np.linspace(0, 2 * math.pi, samples, endpoint=False)
    vals = np.array([f(centre + radius * np.exp(1j * t)) for t in theta])
    steps = np.angle(np.roll(vals, -1) / vals)
    return int(round(steps.sum() / (2 * math.pi)))
