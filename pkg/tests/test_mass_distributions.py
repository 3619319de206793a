import numpy as np
import pytest

from dnls_gibbs import mass_distributions as md
from dnls_gibbs.mass_distributions import CharFunctionSpec
from dnls_gibbs.torus_field import sample_mass

PI_COTH_PI = np.pi / np.tanh(np.pi)


@pytest.fixture(scope="module")
def p0():
    return md.p0_curve()


def test_p0_normalised_with_correct_mean(p0):
    assert abs(p0.total_mass - 1) < 1e-9
    assert abs(p0.mean - PI_COTH_PI) < 1e-9


def test_p0_frozen(p0):
    assert md.p0_at(1.0) == pytest.approx(0.0179926378, rel=1e-7)
    assert float(p0(1.0)) == pytest.approx(0.0179926378, rel=1e-5)


def test_p0_against_sampled_masses():
    # tail-free truncation at 256 modes, compared through its CDF
    n = 200000
    m = sample_mass(4, 0, n, 256)
    curve = md.invert_density(CharFunctionSpec.truncated(256))
    for lo, hi in [(1.0, 2.0), (2.0, 3.0), (3.0, 5.0)]:
        p = float(np.diff(curve.cdf_at([lo, hi]))[0])
        hits = np.count_nonzero((m > lo) & (m < hi))
        assert abs(hits - n * p) < 4.5 * np.sqrt(n * p * (1 - p))


def test_char_function_moments():
    spec = CharFunctionSpec.p(3)
    h = 1e-4
    phi = md.char_function(spec, [-h, 0.0, h])
    assert np.isclose(phi[1], 1)
    mean = ((phi[2] - phi[0]) / (2j * h)).real
    assert np.isclose(mean, spec.mean(), rtol=1e-6)


def test_spec_validation():
    with pytest.raises(ValueError):
        CharFunctionSpec("nope")
    with pytest.raises(ValueError):
        CharFunctionSpec("tail", 0, K=16, tail=True)
    with pytest.raises(ValueError):
        CharFunctionSpec("tail", -1)


def test_density_difference_decay_ratio():
    rows = md.density_difference_decay()
    for r in rows[1:]:
        assert abs(r["ratio"] / r["bracket_ratio"] - 1) < 0.05


SHELL = {0: 0.0017420437, 1: 0.0032168046, 2: 0.0025990125, 8: 0.0004954537}


@pytest.mark.parametrize("k", sorted(SHELL))
def test_shell_limits_frozen(k):
    assert md.shell_limit(1.0, k) == pytest.approx(SHELL[k], rel=1e-6)


@pytest.mark.parametrize("k", [0, 2])
def test_finite_s_shells_converge_to_limit(k):
    # shell probability ~ (s^2 - 1/s^2) C as s -> 1, first-order error in s - 1
    s1, s2 = 1.02, 1.01
    r1 = md.shell_probability(1.0, k, s1) / (s1 ** 2 - s1 ** -2)
    r2 = md.shell_probability(1.0, k, s2) / (s2 ** 2 - s2 ** -2)
    C = md.shell_limit(1.0, k)
    assert abs(2 * r2 - r1 - C) < 1e-3 * C
    assert abs(r2 - C) < abs(r1 - C)


def test_window_lower_bound_positive():
    rows = md.uniform_lower_bound_window(1.0, N_list=(1, 2, 4))
    assert len(rows) > 0
