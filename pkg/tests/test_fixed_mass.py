import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dnls_gibbs import fixed_mass as fm
from dnls_gibbs import functionals as fn
from dnls_gibbs.fixed_mass import ShellSpec
from dnls_gibbs.mass_distributions import shell_limit
from dnls_gibbs.torus_field import sample_coefficients

ONE = fm.observable_by_name("one")
RE_G1 = fm.observable_by_name("re_g1")


def test_spec_validation():
    with pytest.raises(ValueError):
        ShellSpec.thin(0.0, 0.1)
    with pytest.raises(ValueError):
        ShellSpec.thin(1.0, 0.0)
    with pytest.raises(ValueError):
        ShellSpec.scaling(1.0, 2, 1.0)
    with pytest.raises(ValueError):
        ShellSpec.scaling(1.0, 300, 1.1)
    with pytest.raises(ValueError):
        ShellSpec(1.0, "ring", eps=0.1)


def test_thin_shell_sampler_membership_and_determinism():
    spec = ShellSpec.thin(1.0, 0.05, n_max=64)
    a = fm.sample_thin_shell(spec, 40, seed=3)
    b = fm.sample_thin_shell(spec, 40, seed=3)
    assert len(a) == 40 and a.verify()
    assert np.array_equal(a.indices, b.indices) and np.array_equal(a.coeffs, b.coeffs)
    assert np.all(np.diff(a.indices) > 0)
    assert np.all(np.abs(a.mass - 1.0) < 0.05)
    assert np.allclose(a.weights, 1.0)
    # each stored draw is the unconditioned field at its index
    row = sample_coefficients(3, int(a.indices[5]), 1, 64)[0]
    assert np.array_equal(a.coeffs[5], row)
    assert a[0].conditioning is spec


def test_thin_shell_tilted_has_weights():
    spec = ShellSpec.thin(0.3, 0.05, n_max=32)
    b = fm.sample_thin_shell(spec, 30, seed=1, keep=4)
    assert b.coeffs.shape == (30, 9)
    assert b.weights.max() == pytest.approx(1.0) and np.all(b.weights > 0)
    assert np.all(np.abs(b.mass - 0.3) < 0.05)


def test_thin_shell_refuses_hopeless_plain_request():
    with pytest.raises(ValueError):
        fm.sample_thin_shell(ShellSpec.thin(0.05, 1e-4, n_max=64), 1, 1, proposal="plain")


def test_scaling_shell_sampler():
    spec = ShellSpec.scaling(1.0, 2, 1.2, n_max=64)
    b = fm.sample_scaling_shell(spec, 20, seed=2)
    assert b.verify()
    r2 = fm.radius_sq(b.coeffs, 2)
    assert np.all(fm.in_gamma(b.mass, r2, 2, 1.2, 1.0))
    with pytest.raises(RuntimeError):
        fm.sample_scaling_shell(spec, 10**6, seed=2, max_candidates=1000)


@given(st.integers(0, 10), st.floats(1.001, 2.0), st.floats(0.05, 4.0), st.integers(0, 500))
@settings(max_examples=50, deadline=None)
def test_scaling_sets_are_nested(k, s, m, idx):
    g = sample_coefficients(9, idx, 8, 10)
    mass = fn.mass(g)
    assert np.all(fm.scaling_nesting(mass, fm.radius_sq(g, k), k, s, m))


def test_scaling_moves_only_target_mode():
    g = sample_coefficients(1, 0, 3, 5)
    h = fm.scale_rows(g, 2, np.array([2.0, 1.0, 0.5])[:, None][:, 0])
    assert np.allclose(h[0, 5 + 2], 2 * g[0, 5 + 2]) and np.allclose(h[2, 5 - 2], 0.5 * g[2, 5 - 2])
    keep = np.ones(11, bool)
    keep[[3, 7]] = False
    assert np.array_equal(h[:, keep], g[:, keep])
    assert np.allclose(fm.radius_sq(h, 2), fm.radius_sq(g, 2) * np.array([4.0, 1.0, 0.25]))


@pytest.mark.parametrize("obs", fm.regression_suite(), ids=lambda o: o.name)
@pytest.mark.parametrize("k", [0, 1, 2])
def test_s_derivative_analytic_vs_numeric(obs, k):
    g = 0.7 * sample_coefficients(5, 0, 16, 12)
    a = obs.ds(g, k)
    n = obs.ds_numeric(obs._low(g), k)
    assert np.allclose(a, n, rtol=1e-7, atol=1e-9)


def test_observable_lookup():
    assert fm.observable_by_name("mass4").N_F == 4
    with pytest.raises((KeyError, ValueError)):
        fm.observable_by_name("nope")
    g = sample_coefficients(2, 0, 4, 8)
    assert np.allclose(fm.abs_gk_sq(3)(g), np.abs(g[:, 8 + 3]) ** 2)


def test_change_of_variables():
    r = fm.change_of_variables_check([ONE, RE_G1], 1.0, 2, 1.2, 200000, 1)
    assert r["pass"]
    assert abs(r["rows"][0]["lhs"]["value"] - 0.0020394) < 4 * r["rows"][0]["lhs"]["stderr"]


def test_nu_k_trivial_and_odd_observables():
    r = fm.nu_k_expectation([ONE, RE_G1], 1.0, 1, "all", 100000, 1)
    for meth in ("interior", "extrapolation", "radial"):
        assert r["observables"]["one"][meth]["value"] == pytest.approx(1.0)
        odd = r["observables"]["re_g1"][meth]
        assert abs(odd["value"]) < 4 * odd["stderr"] + 1e-12
    C = r["shell_limit"]
    den = r["radial_denominator"]
    assert abs(den["value"] - C) < 4 * den["stderr"]


def test_interior_aborts_on_noisy_denominator():
    with pytest.raises(ArithmeticError, match="not distinguishable"):
        fm.nu_k_expectation([ONE], 1.0, 8, "interior", 200, 1)


def test_radon_nikodym_and_ckm():
    r = fm.radon_nikodym_check([ONE, RE_G1], 1.0, 1, 100000, 2, nu_method="radial")
    assert r["pass"]
    c = r["c_km"]
    assert abs(c["value"] - r["c_km_quadrature"]) < 4 * c["stderr"]


def test_decomposition_constant_and_zero():
    zero = fm.CylinderObservable("zero", 0, lambda g: np.zeros(g.shape[:-1]),
                                 lambda g, k: np.zeros(g.shape[:-1]))
    r = fm.decomposition_check([ONE, zero], 1.0, 32, 100000, 1)
    assert r["pass"]
    zr = r["rows"][1]
    assert zr["lhs"] == 0 and zr["rhs"] == 0


def test_marginals():
    r = fm.marginal_density_check(1.0, 2, 100000, 1)
    assert r["pass"]
    for row in r["rows"]:
        assert abs(row["fixed_mass_total"] - 1) < 0.02


def test_covariance_j0_is_zero_and_gamma_aux():
    r = fm.covariance_positivity(1.0, 2, [0, 4], 1.0, 100000, 1)
    j0 = r["rows"][0]
    assert abs(j0["cov"]) < 4 * j0["stderr"] + 1e-12
    g = fm.gamma_covariance_check(200000, 1)
    assert abs(g["cov"] - 12) < 4 * g["stderr"]


def test_exp_moment_p0_is_one():
    r = fm.exp_moment_fixed_mass(1.0, 0.0, 8, 50000, 1)
    assert all(row["value"] == pytest.approx(1.0) for row in r["rows"])
    assert all(row["jensen_ok"] for row in r["rows"])


def test_chaos_l2_equal_cutoffs_zero():
    assert fm.chaos_l2_fixed_mass(1.0, 8, 8, 20000, 1)["value"] == 0.0
    with pytest.raises(ValueError):
        fm.chaos_l2_fixed_mass(1.0, 8, 4, 10, 1)


def test_shell_acceptance_and_thin_density():
    r = fm.scaling_shell_acceptance(1.0, 2, 400000, 4)
    assert r["nesting_ok"] and r["pass"]
    assert r["shell_limit"] == pytest.approx(shell_limit(1.0, 2, fm.N_MAX, tail=False))
    t = fm.thin_shell_density(1.0, 0.05, 200000, 4)
    assert t["pass"]


@pytest.mark.parametrize("f", [lambda x, y: x * x + y ** 4,
                               lambda x, y: np.exp(x) * np.cos(y),
                               lambda x, y: 1 + x * y ** 3])
def test_disk_demo_routes_agree(f):
    r = fm.disk_scaling_demo(f)
    assert r["max_route_gap"] < 1e-8
