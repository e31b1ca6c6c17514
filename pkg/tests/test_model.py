import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from winding_lab.model import (
    ModelParams, lattice_points, single_offset_distribution, transition_density, weight,
)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0, 1.0)
    with pytest.raises(ValueError):
        ModelParams(2, 0.0)
    with pytest.raises(ValueError):
        ModelParams(2, 1.0, 0.0, 1.0)
    assert ModelParams(2, 1.0).with_tau(1.25).tau == 0.25


def test_lattice_unit_density_covers_truncation_radius():
    win = lattice_points(ModelParams(1, 1.0), 1e-16)
    k = np.round(win.points).astype(int)
    # k^2 <= 2 ln(1e16) = 73.7 requires |k| <= 8; the window adds a margin
    assert set(range(-8, 9)) <= set(k.tolist())
    assert win.points.min() >= -11 and win.points.max() <= 11


def test_lattice_spacing_exact():
    win = lattice_points(ModelParams(4, 1.0, 0.0, 0.5))
    assert np.all(np.diff(win.points) == 0.25)
    assert np.allclose(win.points * 4 - 0.5, np.round(win.points * 4 - 0.5))


def test_lattice_rejects_bad_eps():
    for eps in (0.0, 1.0, -1e-3):
        with pytest.raises(ValueError):
            lattice_points(ModelParams(2, 1.0), eps)


@pytest.mark.parametrize("n,T,mu,tau", [(1, 1.0, 0.0, 0.0), (3, 2.0, 0.7, 0.3), (6, 0.5, 1.5, 0.5)])
def test_outermost_point_negligible(n, T, mu, tau):
    p = ModelParams(n, T, mu, tau)
    x = lattice_points(p, 1e-16).points
    m0 = np.sum(weight(x, p)) / n
    for drop in (x[:1], x[-1:]):
        assert abs(np.sum(weight(drop, p)) / n) < 1e-16 * (x[-1] - x[0]) * max(1.0, abs(m0))


def test_weight_examples():
    assert weight(0.0, ModelParams(3, 2.0, 1.0)) == 1
    assert weight(1.0, ModelParams(2, 1.0)) == pytest.approx(math.exp(-1), abs=1e-15)
    w = weight(1.0, ModelParams(1, 2.0, 1.0))
    assert abs(w) == pytest.approx(math.exp(-1), rel=1e-14)
    assert np.angle(w) == pytest.approx(2.0, abs=1e-14)


@given(x=st.floats(-50, 50), n=st.integers(1, 40), T=st.floats(0.05, 9.0), mu=st.floats(-5, 5))
def test_weight_modulus_bounded(x, n, T, mu):
    w = weight(x, ModelParams(n, T, mu))
    assert abs(w) <= 1.0 + 1e-15
    if x != 0 and n * T * x * x > 1e-12:
        assert abs(w) < 1.0


def test_heat_kernel_diagonal_dominated_by_direct_term():
    p = ModelParams(2, 1.0)
    v = transition_density(0.4, 0.4, 0.7, p)
    assert v.imag == 0
    assert v.real >= math.sqrt(2 / (2 * math.pi * 0.7))


@pytest.mark.parametrize("n,t,mu", [(1, 1.0, 0.0), (3, 0.4, 0.8), (5, 2.0, -1.1)])
def test_heat_kernel_normalised(n, t, mu):
    p = ModelParams(n, 1.0, mu)
    theta = -math.pi + 2 * math.pi * np.arange(400) / 400
    vals = np.array([transition_density(0.3, th, t, p) for th in theta])
    assert np.sum(vals).real * 2 * math.pi / 400 == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(vals.imag)) == 0


@given(phi=st.floats(-3.1, 3.1), theta=st.floats(-3.1, 3.1), t=st.floats(0.05, 3.0),
       mu=st.floats(-3, 3), n=st.integers(1, 8))
@settings(max_examples=60)
def test_heat_kernel_reflection(phi, theta, t, mu, n):
    a = transition_density(phi, theta, t, ModelParams(n, 1.0, mu))
    b = transition_density(-phi, -theta, t, ModelParams(n, 1.0, -mu))
    assert a.real > 0
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)
    if mu == 0:
        assert transition_density(0, theta, t, ModelParams(n, 1.0)) == pytest.approx(
            transition_density(0, -theta, t, ModelParams(n, 1.0)), rel=1e-12)


def test_offset_distribution_closed_form():
    p = ModelParams(1, 1.0)
    d = single_offset_distribution(0.0, 0.0, 1.0, p)
    terms = {k: math.exp(-(2 * math.pi * k) ** 2 / 2) for k in range(-3, 4)}
    z = sum(terms.values())
    assert d[0] == pytest.approx(terms[0] / z, abs=1e-12)
    assert 1 - d[0] == pytest.approx(2 * math.exp(-2 * math.pi ** 2), rel=1e-6)


@pytest.mark.parametrize("phi,theta,t,mu,n", [(0.0, 0.0, 1.0, 0.0, 1), (0.5, -1.0, 3.0, 0.0, 2),
                                              (0.2, 2.5, 4.0, 1.3, 1), (-1.0, 1.0, 6.0, -0.4, 3)])
def test_offset_distribution_matches_gaussian_ratio(phi, theta, t, mu, n):
    p = ModelParams(n, 1.0, mu)
    d = single_offset_distribution(phi, theta, t, p)
    dd = theta - phi - t * mu
    raw = {k: math.exp(-n * (dd + 2 * math.pi * k) ** 2 / (2 * t)) for k in range(-40, 41)}
    z = sum(raw.values())
    for k, v in d.items():
        assert v == pytest.approx(raw[k] / z, abs=1e-12)
    assert sum(d.values()) == pytest.approx(1.0, abs=1e-12)
    assert all(0 <= v <= 1 for v in d.values())
    if mu == 0 and phi == theta:
        for k in d:
            assert d[k] == pytest.approx(d.get(-k, 0.0), abs=1e-12)
