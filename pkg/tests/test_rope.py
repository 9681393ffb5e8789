import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endprompt_lab.errors import DimensionError, InvalidBaseError, InvalidScaleError
from endprompt_lab.rope import (
    SubspaceDecomposition,
    decompose,
    frequencies,
    rotate,
    score_direct,
    score_spectral,
)


def test_frequencies_trivial_cases():
    assert frequencies(2, 10000).freqs.tolist() == [1.0]
    np.testing.assert_allclose(frequencies(4, 10000).freqs, [1.0, 0.01], rtol=0, atol=1e-15)


def test_frequencies_high_precision_value():
    expected = float(mpmath.power(mpmath.mpf(100), mpmath.mpf(-3) / 4))
    assert frequencies(8, 100).freqs[3] == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.0316228, abs=5e-8)


@pytest.mark.parametrize("dim", [2, 4, 8, 64, 128])
def test_frequency_invariants(dim):
    f = frequencies(dim).freqs
    assert len(f) == dim // 2
    assert f[0] == 1.0
    assert np.all(np.diff(f) < 0)
    assert np.all((f > 0) & (f <= 1))


@pytest.mark.parametrize("dim", [0, 3, -2, 7])
def test_frequencies_bad_dim(dim):
    with pytest.raises(DimensionError):
        frequencies(dim)


@pytest.mark.parametrize("base", [0.0, -1.0])
def test_frequencies_bad_base(base):
    with pytest.raises(InvalidBaseError):
        frequencies(4, base)


def test_rotate_identity_and_quarter_turn():
    spec = frequencies(8)
    v = np.arange(8.0)
    np.testing.assert_array_equal(rotate(v, 0.0, spec), v)
    out = rotate([1.0, 0.0], math.pi / 2, frequencies(2))
    np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-12)


def test_rotate_preserves_norm():
    rng = np.random.default_rng(0)
    spec = frequencies(16)
    for _ in range(100):
        v = rng.normal(size=16)
        p = rng.uniform(-1e4, 1e4)
        assert np.linalg.norm(rotate(v, p, spec)) == pytest.approx(np.linalg.norm(v), rel=1e-12)


def test_rotate_broadcasts_over_batches():
    rng = np.random.default_rng(1)
    spec = frequencies(4)
    v = rng.normal(size=(2, 3, 5, 4))
    p = rng.uniform(0, 50, size=(2, 3, 1))
    out = rotate(v, p, spec)
    for i in range(2):
        for t in range(3):
            for h in range(5):
                np.testing.assert_allclose(out[i, t, h], rotate(v[i, t, h], p[i, t, 0], spec), atol=1e-14)


def test_rotate_dimension_mismatch():
    with pytest.raises(DimensionError):
        rotate(np.ones(6), 1.0, frequencies(4))


def test_score_direct_examples():
    spec = frequencies(2)
    assert score_direct([1, 0], [1, 0], 3.0, 1.0, spec) == pytest.approx(float(mpmath.cos(2)), abs=1e-15)
    assert score_direct([1, 0], [0, 1], 0.0, 0.0, spec) == 0.0
    rng = np.random.default_rng(2)
    spec = frequencies(32)
    q, k = rng.normal(size=32), rng.normal(size=32)
    assert score_direct(q, k, 7.25, 7.25, spec) == pytest.approx(float(q @ k), abs=1e-12)


def test_decompose_examples():
    spec = frequencies(2)
    d = decompose([1, 0], [1, 0], spec)
    assert d.amplitudes.tolist() == [1.0] and d.phases.tolist() == [0.0]
    d = decompose([1, 0], [0, 1], spec)
    assert d.amplitudes.tolist() == [1.0]
    assert d.phases[0] == pytest.approx(-math.pi / 2)
    d = decompose([0, 0], [0.3, -2.0], spec)
    assert d.amplitudes.tolist() == [0.0] and d.phases.tolist() == [0.0]


def test_decompose_phase_range_includes_pi_not_minus_pi():
    spec = frequencies(2)
    d = decompose([-1.0, 0.0], [1.0, 0.0], spec)
    assert d.phases[0] == math.pi
    d = decompose([-1.0, -0.0], [1.0, 0.0], spec)
    assert d.phases[0] == math.pi


def test_score_spectral_examples():
    spec = frequencies(2)
    dec = SubspaceDecomposition(np.array([1.0]), np.array([0.0]))
    assert score_spectral(dec, math.pi, spec, 2.0) == pytest.approx(0.0, abs=1e-15)
    dec = SubspaceDecomposition(np.array([0.5, 2.0]), np.array([0.3, -1.1]))
    expected = 0.5 * math.cos(0.3) + 2.0 * math.cos(-1.1)
    assert score_spectral(dec, 0.0, frequencies(4)) == pytest.approx(expected, abs=1e-15)


def test_score_spectral_rejects_small_scale():
    dec = SubspaceDecomposition(np.array([1.0]), np.array([0.0]))
    with pytest.raises(InvalidScaleError):
        score_spectral(dec, 1.0, frequencies(2), 0.5)


def test_spectral_matches_direct_dim64():
    rng = np.random.default_rng(3)
    spec = frequencies(64)
    for _ in range(50):
        q, k = rng.normal(size=64), rng.normal(size=64)
        pm, pn = rng.uniform(0, 4096, size=2)
        direct = score_direct(q, k, pm, pn, spec)
        spectral = score_spectral(decompose(q, k, spec), pm - pn, spec, 1.0)
        assert abs(direct - spectral) <= 1e-9 * (1 + abs(direct))


vec8 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=8, max_size=8)


@settings(max_examples=200, deadline=None)
@given(vec8, vec8, st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_shift_invariance_property(q, k, pm, pn, delta):
    spec = frequencies(8)
    a = score_direct(q, k, pm + delta, pn + delta, spec)
    b = score_direct(q, k, pm, pn, spec)
    assert abs(a - b) <= 1e-9 * (1 + abs(b))


@settings(max_examples=200, deadline=None)
@given(vec8, vec8, st.floats(-4096, 4096), st.floats(-4096, 4096))
def test_spectral_equivalence_property(q, k, pm, pn):
    spec = frequencies(8)
    direct = score_direct(q, k, pm, pn, spec)
    spectral = score_spectral(decompose(q, k, spec), pm - pn, spec)
    assert abs(direct - spectral) <= 1e-9 * (1 + abs(direct))


@settings(max_examples=200, deadline=None)
@given(vec8, vec8, st.floats(-200, 200), st.floats(1, 64))
def test_boundedness_and_pi_consistency(q, k, d, s):
    spec = frequencies(8)
    dec = decompose(q, k, spec)
    val = score_spectral(dec, d, spec, s)
    assert abs(val) <= dec.amplitudes.sum() + 1e-12
    assert abs(val - score_spectral(dec, d / s, spec, 1.0)) <= 1e-12 * (1 + dec.amplitudes.sum())
