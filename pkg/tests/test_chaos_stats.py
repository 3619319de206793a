import numpy as np
import pytest

from dnls_gibbs import chaos_stats as cs
from dnls_gibbs.chaos_stats import _wick_bruteforce
from dnls_gibbs.functionals import CoefficientScaling
from dnls_gibbs.torus_field import SampleBatch, japanese_bracket, frequencies

# frozen values of E|S_{4,M} - S_{4,N}|^2 from the exact pairing sum
FROZEN = {(0, 1): 23.625, (1, 2): 27.504, (0, 2): 58.329,
          (8, 16): 19.875886048705, (16, 32): 10.838434254647,
          (32, 64): 5.573874996285}


@pytest.mark.parametrize("NM", sorted(FROZEN))
def test_exact_chaos_frozen(NM):
    assert cs.chaos_l2_exact(*NM) == pytest.approx(FROZEN[NM], rel=1e-10)


@pytest.mark.parametrize("NM", [(0, 1), (1, 2), (0, 2)])
def test_exact_matches_bruteforce(NM):
    N, M = NM
    w = 1 / japanese_bracket(frequencies(M))
    assert np.isclose(cs.chaos_l2_exact(N, M), _wick_bruteforce(N, M, w), rtol=1e-12)


def test_exact_with_scaling_matches_bruteforce():
    c = CoefficientScaling.frequency_pair(1, 0.6)
    w = c(2) / japanese_bracket(frequencies(2))
    assert np.isclose(cs.chaos_l2_exact(0, 2, c), _wick_bruteforce(0, 2, w), rtol=1e-12)


def test_equal_cutoffs_give_zero():
    assert cs.chaos_l2_exact(4, 4) == 0.0
    with pytest.raises(ValueError):
        cs.chaos_l2_exact(4, 2)


def test_decay_is_roughly_inverse_n():
    v = [cs.chaos_l2_exact(N, 2 * N) for N in (8, 16, 32, 64)]
    ratios = np.array(v[:-1]) / np.array(v[1:])
    assert np.all(np.abs(ratios - 2) < 0.25)


def test_monte_carlo_matches_exact():
    r = cs.chaos_l2_mc(2, 4, samples=40000, seed=3)
    assert abs(r.z) < 4
    assert set(r.lp_ratios) == {4, 6}


def test_gaussian_block_tail_exact_and_bound():
    t = cs.gaussian_block_tail(4, 20.0, 100000, 1)
    assert t.applicable and not t.violation
    lo, hi = t.wilson_interval
    assert lo <= t.exact <= hi


def test_dyadic_l2_tail_respects_bound():
    t = cs.dyadic_l2_tail(SampleBatch(2, 50000, 8), 8, 2.0)
    assert t.applicable and not t.violation
    with pytest.raises(ValueError):
        cs.dyadic_l2_tail(SampleBatch(2, 10, 8), 6, 1.0)


def test_hypercontractivity():
    r = cs.hypercontractivity_check(4, 4, 20000, 5)
    assert r["ok"] and r["ratio"] < r["bound"]
    with pytest.raises(ValueError):
        cs.hypercontractivity_check(4, 3, 10, 5)


def test_tilt_parameter_hits_target_mean():
    lam = cs.tilt_parameter(0.5, 16)
    tp = cs.TiltedProposal(lam, 16)
    assert np.isclose(tp.mass_weights().sum(), 0.5)
    assert cs.tilt_parameter(100.0, 16) == 0.0


def test_density_lp_proposals_agree():
    a = cs.density_lp_estimate(4, 0.5, 1.0, samples=100000, seed=1, proposal="plain")
    b = cs.density_lp_estimate(4, 0.5, 1.0, samples=100000, seed=2, proposal="tilted")
    assert abs(a["value"] - b["value"]) < 4 * np.hypot(a["stderr"], b["stderr"])
    assert b["stderr"] < a["stderr"]


def test_density_lp_zero_mass():
    assert cs.density_lp_estimate(4, 0.0, 1.0)["value"] == 0.0


def test_tail_decay_needs_m_ge_2n():
    with pytest.raises(ValueError):
        cs.chaos_tail_decay(4, 6, [1.0], 10, 1)
    r = cs.chaos_tail_decay(2, 4, [0.5, 1, 2, 4], 20000, 1)
    assert r["slope_sqrt_lambda"] < 0
