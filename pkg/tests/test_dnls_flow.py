import numpy as np
import pytest

from dnls_gibbs import dnls_flow as df
from dnls_gibbs import functionals as fn
from dnls_gibbs.dnls_flow import FlowConfig
from dnls_gibbs.torus_field import FourierField, frequencies, sample_coefficients


@pytest.fixture
def u0():
    return 0.5 * sample_coefficients(11, 0, 4, 8)


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(8, dt=1.0)
    with pytest.raises(ValueError):
        FlowConfig(-1)
    assert FlowConfig(8, T=1.0).dt == pytest.approx(0.05 / 64)


def test_linear_flow_is_exact(u0):
    cfg = FlowConfig(8, T=0.3, nonlinear=False)
    out = df.evolve(u0, cfg).final
    f = frequencies(8)
    assert np.allclose(out, u0 * np.exp(-1j * f * f * 0.3), atol=1e-13)


def test_mass_and_momentum_conserved(u0):
    tr = df.evolve(u0, FlowConfig(8, T=0.5))
    assert tr.drift["mass"] < 1e-9
    assert tr.drift["momentum"] < 1e-8


def test_energy_drift_is_truncation_leakage(u0):
    # rough data: the drift does not shrink with dt, so it belongs to the truncated system
    a = df.evolve(u0, FlowConfig(8, T=0.5)).drift["energy"]
    b = df.evolve(u0, FlowConfig(8, T=0.5, dt=0.0125 / 64)).drift["energy"]
    assert a > 1e-3 and abs(a - b) < 1e-6 * a
    # smooth data far below the cutoff: conserved
    g = np.zeros(33, complex)
    g[16], g[17], g[15] = 0.6, 0.5j, 0.4
    assert df.evolve(g, FlowConfig(16, T=0.2)).drift["energy"] < 1e-10


def test_zero_mode_is_constant(u0):
    out = df.evolve(u0, FlowConfig(8, T=0.2)).final
    assert np.allclose(out[:, 8], u0[:, 8], atol=1e-14)


def test_fourth_order(u0):
    r = df.observed_order(u0[0], FlowConfig(8, T=0.2, dt=0.1 / 64))
    assert all(3.5 < o < 4.6 for o in r["orders"])


def test_time_reversal(u0):
    cfg = FlowConfig(8, T=0.2)
    fwd = df.evolve(u0, cfg).final
    back = df.evolve(fwd, cfg, backward=True).final
    assert np.allclose(back, u0, atol=1e-9)


def test_liouville(u0):
    assert df.liouville_check(u0[0, 8 - 4:8 + 5], FlowConfig(4, T=0.1)) < 1e-6


def test_fourier_field_round_trip(u0):
    u = FourierField(8, u0[0])
    v = df.step(u, FlowConfig(8))
    assert isinstance(v, FourierField) and v.n_max == 8
    with pytest.raises(ValueError):
        df.step(u, FlowConfig(6))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_is_reported():
    big = np.zeros(9, complex)
    big[4] = np.inf
    with pytest.raises(df.FlowBlowup):
        df.evolve(big, FlowConfig(4, T=0.01))


def test_systematic_resample():
    w = np.array([0.0, 1.0, 3.0, 0.0, 4.0])
    c = df.systematic_resample(w, 800, 0.37)
    assert c.sum() == 800 and c[0] == 0 and c[3] == 0
    assert np.all(np.abs(c - 800 * w / w.sum()) <= 1)


def test_gibbs_weights_vanish_off_ball():
    g = sample_coefficients(1, 0, 200, 8)
    w = df.gibbs_weights(g, 8, 1.0)
    inside = fn.mass(g) < 1.0
    assert np.all(w[~inside] == 0) and np.all(w[inside] > 0)


def test_invariance_harness_small():
    r = df.invariance_harness(1.0, 4, 0.2, 20000, 1, evolve=300)
    assert r.resampled == 300 and r.evolved <= 300
    assert all(abs(z) < 4 for z in r.z)
    i = r.observables.index("re_u0")
    assert r.z[i] == 0.0 and r.mean_0[i] == r.mean_T[i]
    with pytest.raises(ValueError):
        df.invariance_harness(1.0, 4, 0.1, 100, 1, proposal="wild")
