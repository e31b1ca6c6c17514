"""Exact finite-n distribution of the total winding number.

P(W = w) = exp(2 pi i w s) * int_0^1 H_n(tau)/H_n(s) exp(-2 pi i w tau) dtau,  s = sigma_shift(n),

where H_n(tau) = prod_{j<n} h_j(tau) is the Hankel determinant of the lattice
functional.  The integral is a Fourier coefficient of a trigonometric
polynomial-like function and is taken with the periodic trapezoid rule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Breakdown, NonConvergence
from .model import ModelParams
from .orthopoly import _lattice_recurrence_mp, gaussian_recurrence

log = logging.getLogger(__name__)


def sigma_shift(n: int) -> float:
    """0 for odd n, 1/2 for even n."""
    return 0.5 if n % 2 == 0 else 0.0


@dataclass
class WindingDistribution:
    """Probabilities of each total winding number with quadrature diagnostics."""

    probs: dict
    imag_residue: float = 0.0
    quadrature_nodes: int = 0
    clamped: float = 0.0
    breakdown_events: list = field(default_factory=list)
    tail_mass: float = 0.0

    def __getitem__(self, omega: int) -> float:
        return self.probs.get(omega, 0.0)

    @property
    def omegas(self):
        return sorted(self.probs)

    @property
    def total(self) -> float:
        return float(sum(self.probs.values()))

    def mode(self) -> int:
        return max(self.probs, key=self.probs.get)


def _log_norms(n, T, mu, taus, degree, method="gaussian", dps=32):
    """Recurrence data at each phase; method "gaussian" (double) or "mp" (lattice in mpmath)."""
    if method == "gaussian":
        return gaussian_recurrence(n, T, mu, taus, degree)
    if method != "mp":
        raise ValueError(f"unknown method {method!r}")
    rows = [_lattice_recurrence_mp(ModelParams(n, T, mu, float(t) % 1.0), degree, dps) for t in np.ravel(taus)]
    return tuple(np.concatenate(parts) for parts in zip(*rows))


def hankel_ratio(nval: int, T: float, mu: float, tau) -> complex:
    """prod_{j<n} h_j(tau)/h_j(s), formed from per-degree ratios."""
    taus = np.atleast_1d(np.asarray(tau, dtype=float)) % 1.0
    s = sigma_shift(nval)
    _, log_h, broke = _log_norms(nval, T, mu, np.append(taus, s), nval - 1)
    if np.any(broke >= 0):
        raise Breakdown(int(broke[broke >= 0][0]))
    out = np.exp(np.sum(log_h[:-1] - log_h[-1], axis=1))
    return out if np.ndim(tau) else complex(out[0])


def dlog_hankel(nval: int, T: float, mu: float, tau) -> complex:
    """d/dtau log H_n = i n T mu + T c_{n,n-1}, with c_{n,n-1} = -sum_{j<n} beta_j."""
    taus = np.atleast_1d(np.asarray(tau, dtype=float)) % 1.0
    beta, _, broke = _log_norms(nval, T, mu, taus, nval - 1)
    if np.any(broke >= 0):
        raise Breakdown(int(broke[broke >= 0][0]))
    out = 1j * nval * T * mu - T * np.sum(beta[:, :nval], axis=1)
    return out if np.ndim(tau) else complex(out[0])


def _fourier_coefficients(nval, T, mu, m, offset, method="gaussian", dps=32):
    """Trapezoid Fourier coefficients of H_n(tau)/H_n(s) on m nodes.

    Returns (coefficients indexed by omega in [-m/2, m/2), broken node count).
    If the recursion breaks down at the reference phase itself (an intermediate
    Hankel determinant vanishes there although H_n does not), the nodes are
    normalised by the best-conditioned grid node and H_n(s) is recovered from
    the Fourier series.
    """
    s = sigma_shift(nval)
    taus = (np.arange(m) + offset) / m
    _, log_h, broke = _log_norms(nval, T, mu, np.append(taus, s), nval - 1, method, dps)
    bad = broke[:-1] >= 0
    if np.any(bad):
        return None, int(bad.sum())
    log_hn = np.sum(log_h, axis=1)
    omegas = np.arange(-m // 2, m // 2)
    phase = np.exp(-2j * math.pi * np.outer(omegas, taus))
    shift = np.exp(2j * math.pi * omegas * s)
    if broke[-1] < 0:
        coef = phase @ np.exp(log_hn[:-1] - log_hn[-1]) / m * shift
    else:
        ref = int(np.argmax(log_hn[:-1].real))
        coef = phase @ np.exp(log_hn[:-1] - log_hn[ref]) / m * shift
        coef = coef / coef.sum()
    return dict(zip(omegas.tolist(), coef.tolist())), 0


def winding_distribution(nval: int, T: float, mu: float, M_init: int = 128, tol: float = 1e-9,
                         tail_tol: float = 1e-10, max_doublings: int = 4, method: str = "gaussian",
                         dps: int = 32) -> WindingDistribution:
    """Exact distribution of the total winding number of n bridges.

    ``method`` selects how the norms are computed at each phase: "gaussian"
    (exact Poisson-summed rule in double precision) or "mp" (lattice sums in
    mpmath at ``dps`` digits).
    """
    if M_init < 8 or M_init & (M_init - 1):
        raise ValueError("M_init must be a power of two >= 8")
    events = []

    def coefficients(m):
        for offset in (0.0, 0.5, 0.25):
            coef, nbad = _fourier_coefficients(nval, T, mu, m, offset, method, dps)
            if coef is not None:
                return coef
            events.append({"M": m, "offset": offset, "broken_nodes": nbad})
            log.info("breakdown at %d tau nodes (M=%d, offset %.2f); shifting grid", nbad, m, offset)
        raise Breakdown(-1, f"breakdown persists on shifted grids with M={m}")

    m = M_init
    prev = coefficients(m)
    for _ in range(max_doublings):
        m *= 2
        cur = coefficients(m)
        if max(abs(cur[w] - prev.get(w, 0.0)) for w in cur) < tol:
            break
        prev = cur
    else:
        raise NonConvergence(f"winding distribution not stable after {m} tau nodes")

    # widen [-2, n+2] towards the heavier side until the mass outside is below tail_tol
    lo, hi = -2, nval + 2
    wmin, wmax = min(cur), max(cur)

    def outside(a, b):
        return float(sum(abs(c) for w, c in cur.items() if w < a or w > b))

    tail = outside(lo, hi)
    while tail > tail_tol and (lo > wmin or hi < wmax):
        left, right = abs(cur.get(lo - 1, 0.0)), abs(cur.get(hi + 1, 0.0))
        if (left >= right and lo > wmin) or hi >= wmax:
            lo -= 1
        else:
            hi += 1
        tail = outside(lo, hi)
    if tail > tail_tol:
        raise NonConvergence(f"tail mass {tail:.3g} outside the reported range")
    reported = {w: cur[w] for w in range(lo, hi + 1) if w in cur}
    imag = max(abs(c.imag) for c in reported.values())
    clamped = -min(0.0, min(c.real for c in reported.values()))
    if clamped > 0:
        log.debug("clamped negative probability of size %.3g", clamped)
    probs = {w: max(c.real, 0.0) for w, c in reported.items()}
    return WindingDistribution(probs, float(imag), m, float(clamped), events, tail)


def winding_n1_closed_form(T: float, mu: float) -> WindingDistribution:
    """One bridge: P(w) proportional to exp(-(T mu - 2 pi w)^2 / (2T))."""
    centre = T * mu / (2 * math.pi)
    spread = math.sqrt(2 * T * 45.0) / (2 * math.pi)
    w = np.arange(math.floor(centre - spread) - 2, math.ceil(centre + spread) + 3)
    logp = -((T * mu - 2 * math.pi * w) ** 2) / (2 * T)
    p = np.exp(logp - logp.max())
    p /= p.sum()
    return WindingDistribution({int(k): float(v) for k, v in zip(w, p)}, 0.0, 0)


def expected_winding(dist: WindingDistribution) -> float:
    return float(sum(w * p for w, p in dist.probs.items()))


def tilt_distribution(dist: WindingDistribution, nval: int, dmu: float) -> dict:
    """Log-probabilities of the law at drift mu + dmu from the law at mu.

    A drift change is an exact exponential tilt: P_{mu+d}(w) ~ P_mu(w) exp(2 pi n d w).
    """
    logs = {w: math.log(p) + 2 * math.pi * nval * dmu * w for w, p in dist.probs.items() if p > 0}
    top = max(logs.values())
    lz = top + math.log(sum(math.exp(v - top) for v in logs.values()))
    return {w: v - lz for w, v in logs.items()}


def winding_log_odds(nval: int, T: float, mu: float, k: int, floor: float = 1e-8,
                     max_steps: int = 60) -> float:
    """log P(W = k+1)/P(W = k) at drift mu, resolved to full relative accuracy.

    The ratio is evaluated at an auxiliary drift where both masses are
    well above the quadrature noise and carried back with the exact tilt
    factor exp(2 pi n (mu - mu')).
    """
    def resolved(m):
        d = winding_distribution(nval, T, m)
        return d, d[k] >= floor and d[k + 1] >= floor

    d, ok = resolved(mu)
    if ok:
        return math.log(d[k + 1] / d[k])
    # at mu' = 2 pi j/T the law is the mu'=0 law shifted by n*j
    period = 2 * math.pi / T
    j = math.floor(k / nval)
    lo, hi = period * (j - 1), period * (j + 1)
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        d, ok = resolved(mid)
        if ok:
            return math.log(d[k + 1] / d[k]) + 2 * math.pi * nval * (mu - mid)
        if d.mode() <= k:
            lo = mid
        else:
            hi = mid
    raise NonConvergence(f"could not resolve the ({k}, {k + 1}) odds")


def resolved_winding_distribution(nval: int, T: float, mu: float, lo: int, hi: int) -> dict:
    """Log-probabilities for w in [lo, hi] with tails resolved far below machine epsilon.

    Anchored at the mode of the direct computation, then chained through
    resolved adjacent log-odds.  Returns {w: log P(w)}.
    """
    base = winding_distribution(nval, T, mu)
    mode = base.mode()
    lo, hi = min(lo, mode), max(hi, mode)
    logs = {mode: math.log(base[mode])}
    for w in range(mode, hi):
        logs[w + 1] = logs[w] + winding_log_odds(nval, T, mu, w)
    for w in range(mode, lo, -1):
        logs[w - 1] = logs[w] - winding_log_odds(nval, T, mu, w - 1)
    return dict(sorted(logs.items()))
