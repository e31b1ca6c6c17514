import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import comb

from winding_lab.errors import RejectionBudgetExceeded
from winding_lab.simulator import (
    BridgeEnsemble, SimConfig, discrete_winding_distribution, empirical_winding, sample_bridge_ensemble, start_sites,
    total_winding, wilson_half_width,
)
from winding_lab.winding import tilt_distribution, winding_distribution


def binomial_single_walker_law(N, L, b):
    """Winding law of one +-1 walk of N steps on Z/LZ returning to its start, by direct counting."""
    out = {}
    for w in range(-(N // L) - 1, N // L + 2):
        up2 = N + w * L
        if up2 % 2 or not 0 <= up2 <= 2 * N:
            continue
        up = up2 // 2
        out[w] = comb(N, up, exact=True) * ((1 + b) / 2) ** up * ((1 - b) / 2) ** (N - up)
    z = sum(out.values())
    return {w: v / z for w, v in out.items()}


def within_sampling_error(emp, exact, n, sigmas=4.0):
    for w in set(emp.probs) | set(exact.probs):
        p = exact[w]
        assert abs(emp[w] - p) <= sigmas * math.sqrt(max(p * (1 - p), 1e-4) / n), (w, emp[w], p)


def test_config_validation():
    for bad in [dict(n_walkers=0), dict(n_walkers=7), dict(lattice_size=7), dict(lattice_size=4),
                dict(n_steps=3), dict(drift_bias=1.0), dict(seed=-1), dict(seed=2 ** 64)]:
        args = dict(n_walkers=2, n_steps=10, lattice_size=12, drift_bias=0.0, seed=0) | bad
        with pytest.raises(ValueError):
            SimConfig(**args)


def test_calibration_round_trip():
    c = SimConfig.from_continuum(3, 1.0, 0.4, 120)
    assert c.n_steps % 2 == 0
    assert abs(c.T_eff - 1.0) <= 3 * (2 * math.pi / 120) ** 2
    assert c.mu_eff == pytest.approx(0.4, rel=1e-12)
    assert c.metadata()["T_eff"] == c.T_eff


def test_start_sites_and_total_winding():
    assert start_sites(3).tolist() == [0, 2, 4]
    paths = np.array([[0, 1, 2, 3, 4, 5, 6, 7, 8], [2, 3, 4, 5, 6, 7, 8, 9, 10]])
    ens = BridgeEnsemble(paths, np.array([1, 1]), 8)
    assert total_winding(ens) == 2
    ens.check()
    bad = BridgeEnsemble(np.array([[0, 1, 2], [2, 1, 2]]), np.array([0, 0]), 8)
    with pytest.raises(AssertionError):
        bad.check()


@pytest.mark.parametrize("method", ["doob", "rejection"])
def test_ensemble_is_valid_and_deterministic(method):
    cfg = SimConfig(3, 24, 12, 0.2, seed=11)
    a = sample_bridge_ensemble(cfg, method)
    b = sample_bridge_ensemble(cfg, method)
    a.check()
    assert np.array_equal(a.paths, b.paths)
    assert a.paths.shape == (3, 25)
    assert sorted(a.paths[:, 0].tolist()) == [0, 2, 4]


@given(seed=st.integers(0, 2 ** 64 - 1), n=st.integers(1, 4), bias=st.floats(-0.6, 0.6))
@settings(max_examples=20, deadline=None)
def test_doob_paths_never_collide(seed, n, bias):
    sample_bridge_ensemble(SimConfig(n, 20, 4 * n + 2, bias, seed)).check()


def test_thread_count_does_not_change_samples(monkeypatch):
    cfg = SimConfig(2, 16, 10, 0.1, seed=5)
    monkeypatch.setenv("WINDING_LAB_THREADS", "1")
    a = empirical_winding(cfg, 9000)
    monkeypatch.setenv("WINDING_LAB_THREADS", "3")
    b = empirical_winding(cfg, 9000)
    assert a.counts == b.counts


@pytest.mark.parametrize("N,L,b", [(40, 8, 0.0), (60, 10, 0.15), (24, 6, -0.3)])
def test_discrete_law_single_walker_matches_counting(N, L, b):
    exact = binomial_single_walker_law(N, L, b)
    d = discrete_winding_distribution(SimConfig(1, N, L, b))
    for w, p in exact.items():
        assert d[w] == pytest.approx(p, abs=1e-12)


def test_discrete_law_bias_is_exact_tilt():
    base = SimConfig(2, 40, 10, 0.0)
    tilted = SimConfig(2, 40, 10, 0.2)
    d0 = discrete_winding_distribution(base)
    d1 = discrete_winding_distribution(tilted)
    pred = tilt_distribution(d0, 2, tilted.mu_eff)
    for w, lp in pred.items():
        # the determinant inversion resolves probabilities to about 1e-11
        if d0[w] > 1e-8 and d1[w] > 1e-8:
            assert math.log(d1[w]) == pytest.approx(lp, abs=1e-6)


def test_discrete_law_symmetric_without_bias():
    d = discrete_winding_distribution(SimConfig(3, 60, 12, 0.0))
    assert d.total == pytest.approx(1, abs=1e-12)
    assert d.imag_residue < 1e-10
    for w in d.omegas:
        assert d[w] == pytest.approx(d[-w], abs=1e-10)


def test_doob_sampler_matches_exact_discrete_law():
    cfg = SimConfig(2, 58, 24, 0.0, seed=3)
    emp = empirical_winding(cfg, 20000)
    within_sampling_error(emp, discrete_winding_distribution(cfg), 20000)
    assert emp[1] > 0.04 and emp[-1] > 0.04


def test_doob_sampler_with_bias_matches_exact_discrete_law():
    cfg = SimConfig(3, 40, 12, 0.25, seed=8)
    emp = empirical_winding(cfg, 20000)
    within_sampling_error(emp, discrete_winding_distribution(cfg), 20000)


def test_rejection_sampler_matches_exact_discrete_law():
    cfg = SimConfig(2, 16, 8, 0.0, seed=4)
    emp = empirical_winding(cfg, 4000, method="rejection")
    within_sampling_error(emp, discrete_winding_distribution(cfg), 4000)


def test_discrete_law_approaches_continuum():
    # finer rings at fixed T_eff move the discrete law toward the continuum law
    errs = []
    for L in (12, 24, 48):
        cfg = SimConfig.from_continuum(2, 8.0, 0.0, L)
        cont = winding_distribution(2, cfg.T_eff, 0.0)
        errs.append(abs(discrete_winding_distribution(cfg)[0] - cont[0]))
    assert errs[0] > errs[1] > errs[2]


def test_large_bias_shifts_winding():
    cfg = SimConfig(2, 58, 24, 0.3, seed=1)
    emp = empirical_winding(cfg, 4000)
    assert emp.mode() > 0


def test_rejection_budget_enforced():
    with pytest.raises(RejectionBudgetExceeded):
        empirical_winding(SimConfig(4, 60, 16, 0.0), 100, method="rejection", budget=50)


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        empirical_winding(SimConfig(1, 10, 8), 10, method="metropolis")


def test_wilson_half_width():
    # Wilson interval for 30/100 at 95%
    z = 1.959963984540054
    p, n = 0.3, 100
    ref = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    assert wilson_half_width(30, 100) == pytest.approx(ref, rel=1e-9)
    assert wilson_half_width(3000, 10000) == pytest.approx(wilson_half_width(30, 100) / 10, rel=0.02)
    assert wilson_half_width(0, 100) > 0


def test_empirical_table_fields():
    e = empirical_winding(SimConfig(1, 20, 8, 0.0, seed=2), 500)
    assert sum(e.counts.values()) == 500 and e.n_samples == 500
    assert e.total == pytest.approx(1.0, abs=1e-12)
    assert set(e.half_widths) == set(e.counts)
