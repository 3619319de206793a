import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dnls_gibbs import torus_field as tf
from dnls_gibbs.torus_field import FourierField, ProjectionMask


def test_bracket_and_weights():
    assert tf.japanese_bracket(0) == 1.0
    assert np.isclose(tf.japanese_bracket(3), np.sqrt(10))
    u = FourierField.from_modes(4, {2: 3 + 4j})
    assert np.isclose(u.weighted_coefficient(2), (3 + 4j) / np.sqrt(5))
    assert u.weighted_coefficient(7) == 0


def test_shape_invariant():
    with pytest.raises(ValueError):
        FourierField(3, np.zeros(6))
    assert FourierField.zeros(3).coeffs.size == 7


def test_sampling_is_pure_function_of_seed_and_index():
    a = tf.sample_gaussian_field(42, 17, 8)
    b = tf.sample_coefficients(42, 10, 10, 8)[7]
    assert np.array_equal(a.coeffs, b)
    # low frequencies agree across cutoffs
    big = tf.sample_gaussian_field(42, 17, 32)
    assert np.array_equal(big.truncate(8).coeffs, a.coeffs)


def test_json_round_trip():
    u = tf.sample_gaussian_field(1, 0, 5)
    assert FourierField.from_json(u.to_json()) == u
    rec = json.loads(u.to_json())
    assert len(rec["coeffs"]) == 2 * 11


def test_sample_batch_weights_validated():
    with pytest.raises(ValueError):
        tf.SampleBatch(1, 3, 4, weights=np.array([1.0, -1.0, 0.0]))
    b = tf.SampleBatch(1, 3, 4, weights=np.ones(3))
    assert len(b) == 3 and b[2] == tf.sample_gaussian_field(1, 2, 4)


def test_sample_mass_matches_coefficients():
    g = tf.sample_coefficients(5, 0, 100, 16)
    w = 1 / tf.japanese_bracket(tf.frequencies(16)) ** 2
    assert np.allclose(tf.sample_mass(5, 0, 100, 16), np.abs(g) ** 2 @ w, rtol=1e-12)
    no0 = tf.sample_mass(5, 0, 100, 16, exclude=(0,))
    assert np.allclose(no0, np.abs(g) ** 2 @ w - np.abs(g[:, 16]) ** 2, rtol=1e-12)


def test_masks_must_be_even():
    with pytest.raises(ValueError):
        ProjectionMask.from_set({1, 2, -1})
    with pytest.raises(ValueError):
        ProjectionMask(lambda f: f > 0)(4)
    assert ProjectionMask.dyadic(8)(8).sum() == 8


@given(st.integers(1, 5), st.floats(0, 3), st.integers(0, 6))
@settings(max_examples=40, deadline=None)
def test_scaling_map_composes_and_inverts(k, s, n):
    u = tf.sample_gaussian_field(3, n, 6)
    v = tf.scale_frequency(tf.scale_frequency(u, k, s), k, 2.0)
    w = tf.scale_frequency(u, k, 2.0 * s)
    assert np.allclose(v.coeffs, w.coeffs)
    if s > 1e-6:  # 1/s overflows for subnormal s
        back = tf.scale_frequency(tf.scale_frequency(u, k, s), k, 1 / s)
        assert np.allclose(back.coeffs, u.coeffs)


@given(st.integers(0, 6))
@settings(max_examples=10, deadline=None)
def test_projections_are_idempotent_and_split(N):
    u = tf.sample_gaussian_field(8, N, 8)
    Q = ProjectionMask.low(N)
    p = tf.project_mask(u, Q)
    assert tf.project_mask(p, Q) == p
    rest = tf.project_mask(u, Q.complement())
    assert np.allclose(p.coeffs + rest.coeffs, u.coeffs)


def test_sobolev_norm_zero_is_l2():
    u = tf.sample_gaussian_field(2, 0, 10)
    w = 1 / tf.japanese_bracket(tf.frequencies(10)) ** 2
    assert np.isclose(tf.sobolev_norm(u, 0) ** 2, np.abs(u.coeffs) ** 2 @ w)
