"""Discrete orthogonal polynomials for the complex Gaussian weight on a shifted lattice.

The bilinear functional is

    <f, g> = (1/n) sum_{x in L} f(x) g(x) exp(-(nT/2)(x^2 - 2 i mu x)),
    L = {(k + tau)/n : k integer},

with no complex conjugation.  Evaluated term by term on the real lattice this
sum cancels catastrophically once mu is not small: the summands are larger
than the result by roughly exp(n * c(T, mu)) with c(1, 1) ~ 2.

The production path therefore uses the Poisson-summed form of the same
functional.  For a polynomial f,

    (1/n) sum_x f(x) exp(-(a n/2)(x^2 - 2 i nu x))
        = sum_w exp(2 pi i w tau) exp(-a n nu_w^2/2) int f(x) exp(-a n (x - i nu_w)^2/2) dx,

    nu_w = nu - 2 pi w / a,

and each Gaussian integral is reproduced exactly by a Gauss-Hermite rule
centred at i nu_w.  Only a handful of clusters w contribute, the nodes do not
depend on tau and nothing cancels, so the Stieltjes recursion runs in plain
double precision.  The literal lattice recursion is kept (in double or at
arbitrary precision through mpmath) as an independent reference.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermitenorm

from .errors import Breakdown, NearPole
from .model import ModelParams, lattice_points, weight

BREAKDOWN_FLOOR = 1e-280
# |h_j| below this fraction of sum |w p_j^2| means h_j is numerically zero
CANCELLATION_FLOOR = 1e-13
# Poisson clusters whose weight bound falls this far (in log) below the leading one are dropped
CLUSTER_LOG_MARGIN = 60.0


@lru_cache(maxsize=None)
def _hermite_rule(k: int):
    """Gauss-Hermite nodes and weights for exp(-y^2/2)."""
    y, w = roots_hermitenorm(k)
    # outermost weights underflow for large k; they carry no mass in double
    keep = w > 0
    return y[keep], w[keep]


@dataclass(frozen=True)
class GaussianRule:
    """Node/weight form of f -> (1/n) sum_{x in L} f(x) exp(-(a n/2)(x^2 - 2 i nu x)).

    Exact for polynomials of degree <= ``degree``.  Weights are stored as
    logs relative to ``log_scale`` together with the Poisson index of the
    cluster each node belongs to; the tau dependence is the phase
    exp(2 pi i w tau).
    """

    nodes: np.ndarray
    log_weights: np.ndarray
    windings: np.ndarray
    log_scale: float
    degree: int

    def weights(self, tau):
        """Relative weights; shape (N,) for scalar tau, (M, N) for an array."""
        tau = np.asarray(tau, dtype=float)
        phase = np.exp(2j * math.pi * np.multiply.outer(tau, self.windings))
        return np.exp(self.log_weights) * phase

    def apply(self, values, tau):
        """Apply the functional to node values; result includes the scale."""
        return np.sum(self.weights(tau) * values, axis=-1) * math.exp(self.log_scale)


def gaussian_rule(n: int, a: float, nu: float, degree: int) -> GaussianRule:
    """Exact quadrature for the lattice Gaussian sum with width a and centre i*nu."""
    an = a * n
    k = degree // 2 + 2
    y, w = _hermite_rule(k)
    radius = float(np.max(np.abs(y))) / math.sqrt(an)
    w0 = round(a * nu / (2 * math.pi))

    band = 2.0 / math.sqrt(a)

    # crude upper bound on the log size of a cluster's contribution for
    # polynomials whose zeros sit near the band through i*nu
    def bound(om):
        nu_w = nu - 2 * math.pi * om / a
        return -0.5 * an * nu_w ** 2 + degree * math.log(abs(nu_w - nu) + radius + band + 1.0)

    # the smallest norms involved are of order (band/4)^degree times the leading Gaussian factor
    nu0 = nu - 2 * math.pi * w0 / a
    floor = -0.5 * an * nu0 ** 2 + degree * math.log(band / 4.0) - CLUSTER_LOG_MARGIN
    lo = hi = w0
    while bound(lo - 1) >= floor or bound(lo - 1) > bound(lo):
        lo -= 1
    while bound(hi + 1) >= floor or bound(hi + 1) > bound(hi):
        hi += 1
    oms = np.arange(lo, hi + 1)
    nus = nu - 2 * math.pi * oms / a
    log_pref = -0.5 * an * nus ** 2 - 0.5 * math.log(an)
    nodes = (1j * nus[:, None] + y[None, :] / math.sqrt(an)).ravel()
    logw = (log_pref[:, None] + np.log(w)[None, :]).ravel()
    scale = float(logw.max())
    return GaussianRule(nodes, logw - scale, np.repeat(oms, len(y)), scale, degree)


@dataclass(frozen=True)
class OPSystem:
    """Monic orthogonal polynomials p_0..p_d with norms and recurrence coefficients.

    x p_j = p_{j+1} + beta_j p_j + gamma_sq_j p_{j-1},  gamma_sq_j = h_j / h_{j-1}.
    ``log_h`` carries log h_j (complex) so that products of many norms never
    have to be formed explicitly.
    """

    params: ModelParams
    max_degree: int
    beta: np.ndarray
    gamma_sq: np.ndarray
    h: np.ndarray
    log_h: np.ndarray
    breakdown: int | None = None
    method: str = "gaussian"
    monic_coeffs: list = field(default_factory=list, repr=False)

    def coeff(self, k: int, j: int) -> complex:
        """Coefficient of x^j in p_k."""
        c = self.monic_coeffs[k]
        return complex(c[j]) if j < len(c) else 0j


def _stieltjes(x, w, max_degree):
    """Batched bilinear Stieltjes recursion on a discrete measure.

    x has shape (N,) or (M, N), w has shape (M, N).  Returns beta, h (both
    (M, max_degree + 1)) and the first breakdown degree per row (-1 if none).
    """
    w = np.atleast_2d(w)
    m = w.shape[0]
    x = np.broadcast_to(x, w.shape)
    beta = np.full((m, max_degree + 1), np.nan + 0j)
    h = np.full((m, max_degree + 1), np.nan + 0j)
    broke = np.full(m, -1)
    p_prev = np.zeros(w.shape, complex)
    p = np.ones(w.shape, complex)
    absw = np.abs(w)
    with np.errstate(all="ignore"):
        for j in range(max_degree + 1):
            wp2 = w * p * p
            hj = wp2.sum(axis=1)
            mag = (absw * np.abs(p) ** 2).sum(axis=1)
            bad = ~(np.abs(hj) > CANCELLATION_FLOOR * mag)
            if j > 0:
                bad |= ~(np.abs(hj) > BREAKDOWN_FLOOR * np.abs(h[:, 0]))
            bad &= broke < 0
            broke[bad] = j
            h[:, j] = hj
            beta[:, j] = (wp2 * x).sum(axis=1) / hj
            if j == max_degree:
                break
            g2 = hj / h[:, j - 1] if j > 0 else np.zeros(m)
            p, p_prev = (x - beta[:, j, None]) * p - g2[:, None] * p_prev, p
    return beta, h, broke


def gaussian_recurrence(n: int, T: float, mu: float, taus, max_degree: int):
    """Recurrence data for many tau at once through the exact Gaussian rule.

    Returns beta (M, d+1), log_h (M, d+1) and breakdown degree per tau.
    """
    rule = gaussian_rule(n, T, mu, 2 * max_degree + 1)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    beta, h_rel, broke = _stieltjes(rule.nodes, rule.weights(taus), max_degree)
    with np.errstate(all="ignore"):
        log_h = np.log(h_rel) + rule.log_scale
    return beta, log_h, broke


def _lattice_nodes(params: ModelParams, degree: int, eps: float = 1e-16):
    """Lattice window wide enough that x^degree times the weight is also negligible."""
    nT = params.n * params.T
    half = math.sqrt(2 * math.log(1 / eps) / nT)
    for _ in range(30):
        half = math.sqrt(2 * (math.log(1 / eps) + degree * math.log1p(half)) / nT)
    k_lo = math.ceil(-(half + 2 / params.n) * params.n - params.tau)
    k_hi = math.floor((half + 2 / params.n) * params.n - params.tau)
    return (np.arange(k_lo, k_hi + 1) + params.tau) / params.n


def _lattice_recurrence_mp(params: ModelParams, max_degree: int, dps: int):
    import mpmath

    with mpmath.workdps(dps):
        eps = mpmath.mpf(10) ** (-dps)
        n, T, mu = params.n, mpmath.mpf(params.T), mpmath.mpf(params.mu)
        tau = mpmath.mpf(params.tau)
        half = mpmath.sqrt(2 * mpmath.log(1 / eps) / (n * T))
        for _ in range(30):
            half = mpmath.sqrt(2 * (mpmath.log(1 / eps) + 2 * max_degree * mpmath.log(1 + half)) / (n * T))
        k_lo = int(mpmath.ceil(-(half + mpmath.mpf(2) / n) * n - tau))
        k_hi = int(mpmath.floor((half + mpmath.mpf(2) / n) * n - tau))
        xs = [(k + tau) / n for k in range(k_lo, k_hi + 1)]
        ws = [mpmath.exp(-n * T * (x * x - 2j * mu * x) / 2) / n for x in xs]
        p_prev = [mpmath.mpc(0)] * len(xs)
        p = [mpmath.mpc(1)] * len(xs)
        beta, h = [], []
        broke = -1
        for j in range(max_degree + 1):
            hj = mpmath.fsum(wi * pi * pi for wi, pi in zip(ws, p))
            if hj == 0 or (j > 0 and abs(hj) < BREAKDOWN_FLOOR * abs(h[0])):
                broke = j
                break
            bj = mpmath.fsum(wi * pi * pi * xi for wi, pi, xi in zip(ws, p, xs)) / hj
            h.append(hj)
            beta.append(bj)
            if j == max_degree:
                break
            g2 = hj / h[j - 1] if j > 0 else 0
            p, p_prev = [(xi - bj) * pi - g2 * qi for xi, pi, qi in zip(xs, p, p_prev)], p
        d = max_degree + 1
        beta_out = np.full(d, np.nan + 0j)
        logh_out = np.full(d, np.nan + 0j)
        beta_out[:len(beta)] = [complex(b) for b in beta]
        logh_out[:len(h)] = [complex(mpmath.log(v)) for v in h]
    return beta_out[None], logh_out[None], np.array([broke])


def _coefficients(beta, gamma_sq, degree):
    coeffs = [np.array([1.0 + 0j])]
    if degree >= 1:
        coeffs.append(np.array([-beta[0], 1.0 + 0j]))
    for j in range(1, degree):
        nxt = np.zeros(j + 2, complex)
        nxt[1:] += coeffs[j]
        nxt[:j + 1] -= beta[j] * coeffs[j]
        nxt[:j] -= gamma_sq[j] * coeffs[j - 1]
        coeffs.append(nxt)
    return coeffs


def build_op_system(params: ModelParams, max_degree: int, method: str = "gaussian",
                    dps: int = 32, strict: bool = True) -> OPSystem:
    """Monic orthogonal polynomials up to ``max_degree`` for one parameter point.

    method:
      "gaussian"  exact Poisson-summed Gaussian rule in double precision (default)
      "lattice"   Stieltjes recursion directly on the lattice nodes in double precision
      "mp"        lattice recursion in mpmath at ``dps`` significant digits

    With ``strict`` a breakdown raises :class:`Breakdown`; otherwise the system is
    truncated just below the failing degree and ``breakdown`` records it.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be nonnegative")
    if method == "gaussian":
        beta, log_h, broke = gaussian_recurrence(params.n, params.T, params.mu, [params.tau], max_degree)
    elif method == "lattice":
        x = _lattice_nodes(params, 2 * max_degree + 1)
        if max_degree > len(x) - 1:
            raise ValueError("max_degree exceeds the number of lattice points minus one")
        beta, h, broke = _stieltjes(x, (weight(x, params) / params.n)[None], max_degree)
        with np.errstate(all="ignore"):
            log_h = np.log(h)
    elif method == "mp":
        beta, log_h, broke = _lattice_recurrence_mp(params, max_degree, dps)
    else:
        raise ValueError(f"unknown method {method!r}")
    beta, log_h, broke = beta[0], log_h[0], int(broke[0])
    top = max_degree
    breakdown = None
    if broke >= 0:
        if strict:
            raise Breakdown(broke)
        breakdown = broke
        top = broke - 1
    beta, log_h = beta[:top + 1], log_h[:top + 1]
    h = np.exp(log_h)
    gamma_sq = np.zeros(top + 1, complex)
    gamma_sq[1:] = np.exp(log_h[1:] - log_h[:-1])
    return OPSystem(params, top, beta, gamma_sq, h, log_h, breakdown, method,
                    _coefficients(beta, gamma_sq, top))


def eval_all(sys: OPSystem, z, degree: int | None = None):
    """Values p_0(z)..p_degree(z) from the three-term recurrence; shape (degree+1, *z.shape)."""
    d = sys.max_degree if degree is None else degree
    if d > sys.max_degree:
        raise ValueError(f"degree {d} exceeds max_degree {sys.max_degree}")
    z = np.asarray(z, dtype=complex)
    out = np.empty((d + 1,) + z.shape, complex)
    out[0] = 1.0
    if d >= 1:
        out[1] = z - sys.beta[0]
    for j in range(1, d):
        out[j + 1] = (z - sys.beta[j]) * out[j] - sys.gamma_sq[j] * out[j - 1]
    return out


def eval_poly(sys: OPSystem, j: int, z):
    """p_j(z) by the stored recurrence."""
    v = eval_all(sys, z, j)[j]
    return v if v.ndim else complex(v)


def bilinear_inner(f, g, params: ModelParams, eps: float = 1e-16) -> complex:
    """(1/n) sum over the lattice window of f(x) g(x) w(x); f, g ascending coefficient vectors."""
    from numpy.polynomial import polynomial as P

    x = lattice_points(params, eps).points
    fx = P.polyval(x, np.asarray(f, dtype=complex))
    gx = P.polyval(x, np.asarray(g, dtype=complex))
    return complex(np.sum(fx * gx * weight(x, params)) / params.n)


def moments(params: ModelParams, j_max: int, eps: float = 1e-16) -> np.ndarray:
    """Lattice moments m_j = (1/n) sum x^j w(x), j = 0..j_max."""
    x = _lattice_nodes(params, j_max, eps)
    w = weight(x, params) / params.n
    return np.array([np.sum(w * x ** j) for j in range(j_max + 1)])


def hankel_direct(params: ModelParams, size: int) -> complex:
    """Determinant of the size x size moment matrix (small sizes only)."""
    if not 1 <= size <= 10:
        raise ValueError("hankel_direct is limited to sizes 1..10")
    m = moments(params, 2 * size - 2)
    mat = np.array([[m[i + j] for j in range(size)] for i in range(size)])
    cond = np.linalg.cond(mat)
    if cond > 1e12:
        warnings.warn(f"moment matrix condition number {cond:.3g} exceeds 1e12", RuntimeWarning)
    return complex(np.linalg.det(mat))


def log_hankel_from_norms(sys: OPSystem, size: int) -> complex:
    """log of prod_{j<size} h_j (branch of the sum of logs)."""
    if size > sys.max_degree + 1:
        if sys.breakdown is not None:
            raise Breakdown(sys.breakdown)
        raise ValueError(f"size {size} exceeds max_degree + 1 = {sys.max_degree + 1}")
    return complex(np.sum(sys.log_h[:size]))


def hankel_from_norms(sys: OPSystem, size: int) -> complex:
    """prod_{j<size} h_j."""
    return complex(np.exp(log_hankel_from_norms(sys, size)))


def cauchy_transform(sys: OPSystem, j: int, z: complex, eps: float = 1e-16) -> complex:
    """(1/n) sum_x p_j(x) w(x)/(z - x), summed directly over the lattice."""
    params = sys.params
    x = _lattice_nodes(params, j + 1, eps)
    if np.min(np.abs(z - x)) < 1e-8:
        raise NearPole(f"z = {z} lies within 1e-8 of a lattice node")
    pj = eval_all(sys, x, j)[j]
    return complex(np.sum(pj * weight(x, params) / (z - x)) / params.n)


def orthogonality_residual(sys: OPSystem, dps: int | None = None) -> float:
    """max over j != k of |<p_j, p_k>| / max(|h_j|, |h_k|) on the literal lattice.

    The Gram sums cancel heavily for large drift.  By default the sums are
    formed in double precision when their rounding-error bound allows a
    1e-12 verdict, and otherwise in mpmath with enough digits to absorb the
    cancellation.  An explicit ``dps`` forces mpmath at that precision.
    Polynomial values always come from the stored recurrence coefficients.
    """
    params, d = sys.params, sys.max_degree
    scale = np.abs(sys.h)
    if dps is None:
        x = _lattice_nodes(params, 2 * d)
        vals = eval_all(sys, x) * np.sqrt(weight(x, params) / params.n)
        gram = vals @ vals.T
        mags = np.abs(vals)
        bound = (mags @ mags.T) * np.finfo(float).eps * len(x)
        ratio = float(np.max(bound / np.maximum.outer(scale, scale)))
        if ratio > 1e-12:
            dps = 30 + int(math.ceil(math.log10(ratio / 1e-12)))
    if dps is not None:
        import mpmath

        with mpmath.workdps(dps):
            gram = _mp_gram(sys, dps)
    worst = 0.0
    for j in range(d + 1):
        for k in range(j):
            worst = max(worst, abs(gram[j, k]) / max(scale[j], scale[k]))
    return float(worst)


def _mp_gram(sys: OPSystem, dps: int):
    import mpmath

    params, d = sys.params, sys.max_degree
    n, T, mu, tau = params.n, mpmath.mpf(params.T), mpmath.mpf(params.mu), mpmath.mpf(params.tau)
    eps = mpmath.mpf(10) ** (-dps)
    half = mpmath.sqrt(2 * mpmath.log(1 / eps) / (n * T))
    for _ in range(30):
        half = mpmath.sqrt(2 * (mpmath.log(1 / eps) + 2 * d * mpmath.log(1 + half)) / (n * T))
    k_lo = int(mpmath.ceil(-(half + mpmath.mpf(2) / n) * n - tau))
    k_hi = int(mpmath.floor((half + mpmath.mpf(2) / n) * n - tau))
    beta = [mpmath.mpc(b) for b in sys.beta]
    g2 = [mpmath.mpc(g) for g in sys.gamma_sq]
    gram = [[mpmath.mpc(0)] * (d + 1) for _ in range(d + 1)]
    for k in range(k_lo, k_hi + 1):
        x = (k + tau) / n
        w = mpmath.exp(-n * T * (x * x - 2j * mu * x) / 2) / n
        p = [mpmath.mpc(1)]
        if d >= 1:
            p.append(x - beta[0])
        for j in range(1, d):
            p.append((x - beta[j]) * p[j] - g2[j] * p[j - 1])
        for j in range(d + 1):
            for i in range(j):
                gram[j][i] += w * p[j] * p[i]
    out = np.zeros((d + 1, d + 1), complex)
    for j in range(d + 1):
        for i in range(j):
            out[j, i] = complex(gram[j][i])
    return out
