import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dnls_gibbs import functionals as fn
from dnls_gibbs.torus_field import FourierField, ProjectionMask, frequencies, sample_coefficients


def test_dual_paths_agree(fields):
    for name in ("mass", "l4_power", "momentum", "l6_power", "energy"):
        f = getattr(fn, name)
        assert np.allclose(f(fields, method="sum"), f(fields, method="grid"), rtol=1e-11, atol=1e-12), name


def test_f_n_every_path(fields):
    small = fields[:6, 12 - 4:12 + 5]
    ref = fn.f_N(small, method="naive")
    for m in ("sum", "grid", "grid-square"):
        assert np.allclose(fn.f_N(small, method=m), ref, rtol=1e-11, atol=1e-12), m


def test_single_mode_closed_forms():
    g = 1.3 - 0.4j
    u = FourierField.from_modes(3, {1: g})
    A = abs(g) ** 2 / 2
    assert np.isclose(fn.f_N(u), 3 / 8 * abs(g) ** 4)
    assert np.isclose(fn.energy(u), A - 1.5 * A * A + 0.5 * A ** 3)
    assert np.isclose(fn.energy(u, method="grid"), A - 1.5 * A * A + 0.5 * A ** 3)
    assert np.isclose(fn.l4_power(u), A * A)
    assert np.isclose(fn.momentum(u), 0.5 * A * A - A)


def test_f_n_vanishes_on_reflection_average(fields):
    # n -> -n reverses the sign of f_N
    flipped = fields[:, ::-1]
    assert np.allclose(fn.f_N(flipped), -fn.f_N(fields), atol=1e-12)


def test_cutoff_restricts_to_low_modes(fields):
    low = np.where(np.abs(frequencies(12)) <= 5, fields, 0)
    assert np.allclose(fn.f_N(fields, 5), fn.f_N(low), atol=1e-12)
    assert np.allclose(fn.l4_power(fields, 5), fn.l4_power(low), atol=1e-12)


@pytest.mark.parametrize("k", [1, 3, 7])
def test_g_decomposition(fields, k):
    G = fn.g_decomposition(fields, 10, k)
    assert np.allclose(G.sum(axis=-1), fn.f_N(fields, 10), atol=1e-11)
    # j = 4 part has a closed form
    g10 = fields[:, 12 - 10:12 + 11]
    assert np.allclose(G[:, 4], fn.g4_closed_form(g10, k), atol=1e-12)
    s = 1.37
    scaled = fn.scaled_chaos(fields, 10, fn.CoefficientScaling.frequency_pair(k, s))
    assert np.allclose(scaled, G @ s ** np.arange(5), atol=1e-10)


def test_projected_pieces_sum_to_f(fields):
    lo, hi = ProjectionMask.low(3), ProjectionMask.low(3).complement()
    tot = 0
    for Q in [(a, b, c, d) for a in (lo, hi) for b in (lo, hi) for c in (lo, hi) for d in (lo, hi)]:
        tot = tot + fn.projected_quadrilinear(fields, 8, *Q)
    assert np.allclose(tot, fn.f_N(fields, 8), atol=1e-11)


def test_constant_scaling_is_homogeneous(fields):
    t = 0.7
    assert np.allclose(fn.scaled_chaos(fields, 8, fn.CoefficientScaling.constant(t)),
                       t ** 4 * fn.f_N(fields, 8), atol=1e-12)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 13])
def test_convolution_sum(n):
    v, tail = fn.convolution_sum(n, 20000)
    assert abs(v - fn.convolution_sum_closed_form(n)) < max(tail, 1e-14) + 1e-13


def test_unknown_method():
    with pytest.raises(ValueError):
        fn.mass(np.zeros(3), method="fft")


@given(st.integers(1, 6), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_mass_matches_parseval(n, idx):
    g = sample_coefficients(77, idx, 1, n)[0]
    assert np.isclose(fn.mass(g), fn.mass(g, "grid"))
    assert fn.l4_power(g) >= fn.mass(g) ** 2 - 1e-12
