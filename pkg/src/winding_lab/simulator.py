"""Nonintersecting random-walk bridges on a discrete circle.

Walkers perform +-1 steps on Z/LZ with a common bias b, start on the sites
0, 2, ..., 2(n-1) and must return to the same set of sites, possibly
cyclically relabelled.  Because all walkers share the parity of their
position, two paths can only swap order by visiting the same site, so the
Lindstrom-Gessel-Viennot determinant counts nonintersecting families.

On the circle the determinant is taken with the twisted kernel

    K_m(x -> y) = sum_k exp(2 pi i s k) P_m(y + k L - x),   s = 0 (n odd), 1/2 (n even),

where P_m is the m-step transition probability.  The twist cancels the sign
of the cyclic relabelling, so h_t(x) = Re det[K_{N-t}(x_i -> b_j)] is the
probability that walkers at x after t steps complete a nonintersecting
bridge.  The default sampler draws each step from the Doob transform by h,
which produces exact samples without rejection.  A plain rejection sampler
is kept as an independent cross-check for small configurations.

Calibration to the continuum model with diffusion n^{-1/2}:

    T_eff  = n N (2 pi / L)^2
    mu_eff = atanh(b) L / (2 pi n)

The bias enters the path weight only through the total displacement, which
is L times the total winding, so the drift calibration is exact; the time
calibration carries the usual discretisation error.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom, binomtest

from .errors import RejectionBudgetExceeded
from .winding import WindingDistribution, sigma_shift

log = logging.getLogger(__name__)

MAX_WALKERS = 6
DEFAULT_BUDGET = 10 ** 7
# samples simulated together in one vectorised batch
CHUNK = 4096


@dataclass(frozen=True)
class SimConfig:
    """Discrete bridge ensemble: walkers, steps, ring size, per-step bias and seed."""

    n_walkers: int
    n_steps: int
    lattice_size: int
    drift_bias: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_walkers < 1:
            raise ValueError("n_walkers must be at least 1")
        if self.n_walkers > MAX_WALKERS:
            raise ValueError(f"at most {MAX_WALKERS} walkers are supported")
        if self.lattice_size % 2 or self.lattice_size < 4 * self.n_walkers:
            raise ValueError("lattice_size must be even and at least 4 n_walkers")
        if self.n_steps < 0 or self.n_steps % 2:
            raise ValueError("n_steps must be even and nonnegative")
        if not -1.0 < self.drift_bias < 1.0:
            raise ValueError("drift_bias must lie in (-1, 1)")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def T_eff(self) -> float:
        """Continuum return time matched by the step variance."""
        return self.n_walkers * self.n_steps * (2 * math.pi / self.lattice_size) ** 2

    @property
    def mu_eff(self) -> float:
        """Continuum drift producing the same exponential tilt of the winding law."""
        return math.atanh(self.drift_bias) * self.lattice_size / (2 * math.pi * self.n_walkers)

    @classmethod
    def from_continuum(cls, n: int, T: float, mu: float, lattice_size: int, seed: int = 0) -> "SimConfig":
        """Configuration whose calibrated (T_eff, mu_eff) approximates (T, mu).

        n_steps is rounded to the nearest even integer, so T_eff differs from T
        by at most n (2 pi/L)^2.
        """
        steps = T * lattice_size ** 2 / (n * 4 * math.pi ** 2)
        steps = max(2, 2 * round(steps / 2))
        bias = math.tanh(2 * math.pi * n * mu / lattice_size)
        return cls(n, steps, lattice_size, bias, seed)

    def metadata(self) -> dict:
        return {
            "n_walkers": self.n_walkers, "n_steps": self.n_steps, "lattice_size": self.lattice_size,
            "drift_bias": self.drift_bias, "seed": self.seed, "T_eff": self.T_eff, "mu_eff": self.mu_eff,
            "calibration": "T_eff = n N (2 pi/L)^2, mu_eff = atanh(b) L/(2 pi n)",
        }


@dataclass
class BridgeEnsemble:
    """Unwrapped site paths (n_walkers x (n_steps + 1)) and per-walker windings."""

    paths: np.ndarray
    windings: np.ndarray
    lattice_size: int

    def check(self):
        """Raise AssertionError unless the bridge and nonintersection constraints hold."""
        L = self.lattice_size
        start, end = self.paths[:, 0], self.paths[:, -1]
        assert sorted(start % L) == sorted(end % L), "end sites are not the start sites"
        assert np.all(np.abs(np.diff(self.paths, axis=1)) == 1), "steps must be +-1"
        for col in (self.paths % L).T:
            assert len(set(col.tolist())) == len(col), "two walkers share a site"
        assert total_winding(self) * L == int(np.sum(end - start)), "windings inconsistent"


def start_sites(n: int) -> np.ndarray:
    return 2 * np.arange(n)


def total_winding(ens: BridgeEnsemble) -> int:
    """Sum of per-walker windings."""
    return int(np.sum(ens.windings))


def _walker_windings(disp, L):
    # each walker ends on one of the start sites, so disp/L is within (n-1)*2/L of an integer
    return np.rint(disp / L).astype(np.int64)


class _TwistedKernel:
    """Twisted ring kernel K_m(d), d = target - source (unwrapped), for one step count m."""

    def __init__(self, m: int, L: int, bias: float, twist: float):
        p = 0.5 * (1 + bias)
        r = np.arange(L)
        kmax = m // L + 2
        ks = np.arange(-kmax, kmax + 1)
        d = r[None, :] + ks[:, None] * L
        ok = (np.abs(d) <= m) & ((d + m) % 2 == 0)
        vals = np.where(ok, binom.pmf((m + d) // 2, m, p), 0.0)
        self.table = np.sum(vals * np.exp(2j * math.pi * twist * ks)[:, None], axis=0)
        self.L = L
        self.twist = twist

    def __call__(self, d):
        q, r = np.divmod(d, self.L)
        return self.table[r] * np.exp(-2j * math.pi * self.twist * q)


def _h(kern: _TwistedKernel, x, targets):
    """Re det K(targets_j - x_i) over the last axis of x (sorted label order)."""
    mat = kern(targets[None, :] - x[..., :, None])
    return np.linalg.det(mat).real


def _moves(n):
    grid = np.array(np.meshgrid(*([[-1, 1]] * n), indexing="ij")).reshape(n, -1).T
    return grid


def _distinct_mod(x, L):
    """True where all walkers of a configuration occupy distinct sites of the ring."""
    s = np.sort(x % L, axis=-1)
    return np.all(np.diff(s, axis=-1) > 0, axis=-1)


def _doob_batch(cfg: SimConfig, rng: np.random.Generator, size: int, keep_paths: bool):
    n, N, L, b = cfg.n_walkers, cfg.n_steps, cfg.lattice_size, cfg.drift_bias
    twist = sigma_shift(n)
    targets = start_sites(n)
    moves = _moves(n)
    up = (moves > 0).sum(axis=1)
    log_step = up * math.log1p(b) + (n - up) * math.log1p(-b)
    x = np.broadcast_to(targets, (size, n)).copy()
    paths = np.empty((N + 1, size, n), np.int64) if keep_paths else None
    if keep_paths:
        paths[0] = x
    for t in range(N):
        kern = _TwistedKernel(N - t - 1, L, b, twist)
        cand = x[:, None, :] + moves[None, :, :]
        h = _h(kern, cand, targets)
        h = np.where(_distinct_mod(cand, L) & (h > 0), h, 0.0)
        w = h * np.exp(log_step - log_step.max())[None, :]
        total = w.sum(axis=1)
        if np.any(total <= 0):
            raise FloatingPointError("no admissible continuation; determinant underflow")
        cdf = np.cumsum(w, axis=1) / total[:, None]
        pick = np.minimum((rng.random(size)[:, None] > cdf).sum(axis=1), len(moves) - 1)
        x = cand[np.arange(size), pick]
        if keep_paths:
            paths[t + 1] = x
    disp = x - targets[None, :]
    return disp, paths


def _rejection_batch(cfg: SimConfig, rng: np.random.Generator, size: int, budget: int, keep_paths: bool):
    n, N, L, b = cfg.n_walkers, cfg.n_steps, cfg.lattice_size, cfg.drift_bias
    targets = start_sites(n)
    got_disp, got_paths, used = [], [], 0
    batch = 4096
    while sum(len(d) for d in got_disp) < size:
        if used >= budget:
            raise RejectionBudgetExceeded(f"{used} proposals gave {sum(len(d) for d in got_disp)} of {size} samples")
        m = min(batch, budget - used)
        used += m
        steps = np.where(rng.random((m, N, n)) < 0.5 * (1 + b), 1, -1)
        traj = np.concatenate([np.broadcast_to(targets, (m, 1, n)), targets + np.cumsum(steps, axis=1)], axis=1)
        end = traj[:, -1, :]
        ok = np.all(np.sort(end % L, axis=1) == targets, axis=1)
        if N:
            ok &= np.all(_distinct_mod(traj, L), axis=1)
        got_disp.append(end[ok] - targets)
        if keep_paths:
            got_paths.append(traj[ok])
    disp = np.concatenate(got_disp)[:size]
    paths = np.transpose(np.concatenate(got_paths)[:size], (1, 0, 2)) if keep_paths else None
    return disp, paths


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("WINDING_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _run(cfg: SimConfig, n_samples: int, method: str, budget: int, keep_paths: bool):
    """Sample in chunks, each with its own child seed of the configuration seed."""
    sizes = [CHUNK] * (n_samples // CHUNK) + ([n_samples % CHUNK] if n_samples % CHUNK else [])
    streams = np.random.SeedSequence(cfg.seed).spawn(len(sizes))

    def one(args):
        size, ss = args
        rng = np.random.default_rng(ss)
        if method == "doob":
            return _doob_batch(cfg, rng, size, keep_paths)
        if method == "rejection":
            # the proposal budget is shared across chunks in proportion to their size
            return _rejection_batch(cfg, rng, size, math.ceil(budget * size / n_samples), keep_paths)
        raise ValueError(f"unknown method {method!r}")

    jobs = list(zip(sizes, streams))
    threads = _threads()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, jobs))
    else:
        out = [one(j) for j in jobs]
    disp = np.concatenate([d for d, _ in out]) if out else np.empty((0, cfg.n_walkers), np.int64)
    paths = np.concatenate([p for _, p in out], axis=1) if keep_paths and out else None
    return disp, paths


def sample_bridge_ensemble(cfg: SimConfig, method: str = "doob", budget: int = DEFAULT_BUDGET) -> BridgeEnsemble:
    """One nonintersecting bridge ensemble, deterministic in cfg.seed.

    method "doob" samples exactly step by step; "rejection" proposes
    independent biased walks and keeps the first admissible family.
    """
    disp, paths = _run(cfg, 1, method, budget, keep_paths=True)
    paths = paths[:, 0, :].T.copy()
    return BridgeEnsemble(paths, _walker_windings(disp[0], cfg.lattice_size), cfg.lattice_size)


def wilson_half_width(count: int, total: int, confidence: float = 0.95) -> float:
    ci = binomtest(count, total).proportion_ci(confidence_level=confidence, method="wilson")
    return 0.5 * (ci.high - ci.low)


@dataclass
class EmpiricalWinding(WindingDistribution):
    """Frequencies of the total winding with Wilson half-widths per winding number."""

    half_widths: dict = None
    counts: dict = None
    n_samples: int = 0


def empirical_winding(cfg: SimConfig, n_samples: int, method: str = "doob",
                      budget: int = DEFAULT_BUDGET) -> EmpiricalWinding:
    """Frequency table of the total winding over n_samples ensembles."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    disp, _ = _run(cfg, n_samples, method, budget, keep_paths=False)
    w = disp.sum(axis=1) // cfg.lattice_size
    vals, cnt = np.unique(w, return_counts=True)
    counts = {int(v): int(c) for v, c in zip(vals, cnt)}
    probs = {k: c / n_samples for k, c in counts.items()}
    half = {k: wilson_half_width(c, n_samples) for k, c in counts.items()}
    return EmpiricalWinding(probs, half_widths=half, counts=counts, n_samples=n_samples)


def discrete_winding_distribution(cfg: SimConfig, m: int | None = None) -> WindingDistribution:
    """Exact winding law of the discrete ensemble.

    With an arbitrary twist s the determinant det K^{(s)}_N(b_i -> b_j) sums
    exp(2 pi i (s - s_n) W) over nonintersecting families, so the law is its
    Fourier series in s, recovered with the trapezoid rule on m nodes.
    """
    n, N, L = cfg.n_walkers, cfg.n_steps, cfg.lattice_size
    m = m or 2 * (N // L + 2) * n + 8
    targets = start_sites(n)
    s0 = sigma_shift(n)
    shifts = np.arange(m) / m
    vals = np.array([np.linalg.det(_TwistedKernel(N, L, cfg.drift_bias, s0 + s)(targets[None, :] - targets[:, None]))
                     for s in shifts])
    omegas = np.arange(-(m // 2), m - m // 2)
    coef = np.exp(-2j * math.pi * np.outer(omegas, shifts)) @ vals / m
    total = coef.real.sum()
    coef = coef / total
    # cancellation in the inversion leaves noise visible in the imaginary part and negative entries
    noise = max(float(np.abs(coef.imag).max()), float(-coef.real.min()), 1e-15)
    keep = coef.real > 10 * noise
    probs = coef.real * keep
    probs = probs / probs.sum()
    return WindingDistribution({int(w): float(c) for w, c, k in zip(omegas, probs, keep) if k},
                               imag_residue=noise, quadrature_nodes=m)
