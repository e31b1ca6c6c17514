"""Model parameters, the shifted lattice, the complex weight and the circular heat kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence

# terms of theta-type sums are dropped below this fraction of the largest one
THETA_CUTOFF = 1e-18


@dataclass(frozen=True)
class ModelParams:
    """Universal parameter record (n, T, mu, tau).

    ``n`` is the number of walkers (and the lattice density), ``T`` the return
    time, ``mu`` the drift and ``tau`` the lattice phase in [0, 1).
    """

    n: int
    T: float
    mu: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if not 0.0 <= self.tau < 1.0:
            raise ValueError(f"tau must lie in [0, 1), got {self.tau!r}")
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "tau", float(self.tau))

    def with_tau(self, tau: float) -> "ModelParams":
        return ModelParams(self.n, self.T, self.mu, float(tau) % 1.0)


@dataclass(frozen=True)
class LatticeWindow:
    """Truncated piece of the lattice {(k + tau)/n : k integer}."""

    points: np.ndarray
    k_min: int
    k_max: int
    truncation_epsilon: float


def lattice_points(params: ModelParams, eps: float = 1e-16) -> LatticeWindow:
    """All lattice points with |x| <= sqrt(2 ln(1/eps)/(nT)) + 2/n."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    n, tau = params.n, params.tau
    half_width = math.sqrt(2.0 * math.log(1.0 / eps) / (n * params.T)) + 2.0 / n
    k_min = math.ceil(-half_width * n - tau)
    k_max = math.floor(half_width * n - tau)
    k = np.arange(k_min, k_max + 1)
    return LatticeWindow((k + tau) / n, k_min, k_max, eps)


def weight(x, params: ModelParams):
    """Complex Gaussian weight exp(-(nT/2)(x^2 - 2 i mu x))."""
    x = np.asarray(x, dtype=float)
    nT = params.n * params.T
    w = np.exp(-0.5 * nT * x * x) * np.exp(1j * nT * params.mu * x)
    return w if w.ndim else complex(w)


def _theta_terms(phi, theta, t, params: ModelParams):
    """Winding indices k and Gaussian terms of the circular heat kernel."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    n = params.n
    d = theta - phi - t * params.mu
    k0 = round(-d / (2 * math.pi))
    spread = math.sqrt(2.0 * t * math.log(1.0 / THETA_CUTOFF) / n) / (2 * math.pi)
    k = np.arange(k0 - math.ceil(spread) - 2, k0 + math.ceil(spread) + 3)
    terms = np.exp(-n * (d + 2 * math.pi * k) ** 2 / (2.0 * t))
    keep = terms >= THETA_CUTOFF * terms.max()
    return k[keep], terms[keep]


def transition_density(phi: float, theta: float, t: float, params: ModelParams) -> complex:
    """tau-deformed single-walker heat kernel on the circle with drift.

    sqrt(n/(2 pi t)) * sum_k exp(-n (theta - phi - t mu + 2 k pi)^2/(2t) + 2 pi i k tau)
    """
    k, terms = _theta_terms(phi, theta, t, params)
    phase = np.exp(2j * math.pi * k * params.tau)
    return complex(math.sqrt(params.n / (2 * math.pi * t)) * np.sum(terms * phase))


def single_offset_distribution(phi: float, theta: float, t: float, params: ModelParams,
                               m_init: int = 64, tol: float = 1e-12, max_doublings: int = 4) -> dict:
    """Probability that a single bridge from phi to theta winds omega times.

    Obtained by Fourier inversion in tau of the deformed heat kernel, using the
    periodic trapezoid rule with automatic doubling.
    """
    k, _ = _theta_terms(phi, theta, t, params)
    omegas = range(int(k.min()), int(k.max()) + 1)
    norm = transition_density(phi, theta, t, params.with_tau(0.0)).real

    def invert(m):
        taus = np.arange(m) / m
        vals = np.array([transition_density(phi, theta, t, params.with_tau(s)) for s in taus])
        return {w: float((np.mean(vals * np.exp(-2j * math.pi * w * taus))).real / norm)
                for w in omegas}

    m = m_init
    prev = invert(m)
    for _ in range(max_doublings):
        m *= 2
        cur = invert(m)
        if max(abs(cur[w] - prev[w]) for w in omegas) < tol:
            return {w: max(p, 0.0) for w, p in cur.items()}
        prev = cur
    raise NonConvergence(f"offset distribution not stable after {m} nodes")
