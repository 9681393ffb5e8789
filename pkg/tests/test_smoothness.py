import math

import numpy as np
import pytest

from endprompt_lab.errors import GapConditionError, InvalidScaleError, UndefinedFrequencyError, UnsupportedOrderError
from endprompt_lab.plan import PlanSpec
from endprompt_lab.rope import SubspaceDecomposition, decompose, frequencies
from endprompt_lab.smoothness import (
    CSV_HEADER,
    TrigPolynomial,
    bernstein_check,
    derivative,
    evaluate,
    from_decomposition,
    gap_stability_profile,
    sup_estimate,
)


def single(amp=1.0, w=0.25, phi=0.0):
    return TrigPolynomial.from_components([(amp, w, phi)])


def random_poly(rng, m=None):
    m = m or int(rng.integers(1, 8))
    return TrigPolynomial(rng.uniform(0, 2, m), rng.uniform(0.01, 1.5, m), rng.uniform(-math.pi, math.pi, m))


def test_from_decomposition():
    dec = SubspaceDecomposition(np.array([1.0]), np.array([0.0]))
    assert from_decomposition(dec, frequencies(2), 4).components == [(1.0, 0.25, 0.0)]
    dec4 = SubspaceDecomposition(np.array([1.0, 2.0]), np.array([0.1, 0.2]))
    np.testing.assert_array_equal(from_decomposition(dec4, frequencies(4), 1).omegas, frequencies(4).freqs)
    np.testing.assert_allclose(from_decomposition(dec4, frequencies(4), 8).omegas, [0.125, 0.00125], rtol=1e-15)
    with pytest.raises(InvalidScaleError):
        from_decomposition(dec4, frequencies(4), 0.9)


def test_derivative_examples():
    p = single()
    assert evaluate(p, 0.0) == 1.0
    assert derivative(p, 0.0, 1) == 0.0
    assert derivative(p, 0.0, 2) == pytest.approx(-0.0625)
    assert derivative(single(w=1.0), math.pi / 2, 1) == pytest.approx(-1.0)
    with pytest.raises(UnsupportedOrderError):
        derivative(p, 0.0, 3)


def test_derivatives_match_central_differences():
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(100):
        p = random_poly(rng)
        d = rng.uniform(-50, 50)
        fd1 = (evaluate(p, d + h) - evaluate(p, d - h)) / (2 * h)
        fd2 = (derivative(p, d + h, 1) - derivative(p, d - h, 1)) / (2 * h)
        assert abs(derivative(p, d, 1) - fd1) <= 1e-6
        assert abs(derivative(p, d, 2) - fd2) <= 1e-6


def test_sup_estimate_examples():
    assert sup_estimate(single(), 0, 100, 1) == pytest.approx(0.25, abs=1e-4)
    assert sup_estimate(single(w=1.0), 0, 10, 0) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(UndefinedFrequencyError):
        sup_estimate(TrigPolynomial.from_components([]), 0, 1, 0)


def test_sup_estimate_against_dense_grid():
    p = TrigPolynomial.from_components([(1.0, 0.7, 0.3), (0.6, 0.13, -1.2)])
    dense = np.linspace(0, 300, 1_000_001)
    for order in (0, 1, 2):
        oracle = np.max(np.abs(derivative(p, dense, order)))
        assert sup_estimate(p, 0, 300, order) == pytest.approx(oracle, abs=1e-4)


def test_bernstein_equality_case():
    rep = bernstein_check(single(), 0, 100)
    assert rep.bound1 == 0.25
    assert rep.sup_dS == pytest.approx(0.25, abs=1e-6)
    assert rep.pass1 and rep.pass2


def test_bernstein_zero_polynomial():
    p = TrigPolynomial(np.zeros(3), np.array([1.0, 0.5, 0.1]), np.zeros(3))
    rep = bernstein_check(p, 0, 100)
    assert rep.sup_S == rep.sup_dS == rep.sup_d2S == 0.0
    assert rep.pass1 and rep.pass2


def test_bernstein_random_decompositions_pass():
    rng = np.random.default_rng(5)
    for _ in range(40):
        dim = int(rng.choice([2, 4, 8, 16, 32]))
        s = float(rng.integers(1, 17))
        spec = frequencies(dim)
        dec = decompose(rng.normal(size=dim), rng.normal(size=dim), spec)
        rep = bernstein_check(from_decomposition(dec, spec, s), 0, 1000)
        assert rep.pass1 and rep.pass2
        # grid oracle: the analytic sum of a_j w_j also bounds the measured slope
        assert rep.sup_dS <= float(np.sum(dec.amplitudes * spec.freqs / s)) + 1e-9


def test_bound_strictly_decreases_with_scale():
    spec = frequencies(8)
    dec = SubspaceDecomposition(np.ones(4), np.zeros(4))
    b1 = [bernstein_check(from_decomposition(dec, spec, s), 0, 10).bound1 for s in (1, 2, 4, 8)]
    assert all(x > y for x, y in zip(b1, b1[1:]))


def test_csv_row_format():
    row = bernstein_check(single(), 0, 100).to_csv_row()
    fields = row.split(",")
    assert len(fields) == len(CSV_HEADER.split(","))
    assert fields[-2:] == ["true", "true"]
    assert fields[0] == "1" and fields[1] == "0.25"


def test_gap_profile_single_component():
    dec = SubspaceDecomposition(np.array([1.0]), np.array([0.0]))
    prof = gap_stability_profile(dec, frequencies(2), 4.0, PlanSpec(4, 2, 16), samples=12)
    dense = np.linspace(4, 10, 200001)
    oracle = np.max(np.abs(0.25 * np.sin(0.25 * dense)))
    assert prof.gap_max_slope == pytest.approx(oracle, abs=1e-6)
    assert prof.gap_max_slope == pytest.approx(0.25, abs=1e-3)
    assert len(prof) == 12
    assert set(prof.distances[prof.in_gap].tolist()) <= set(range(4, 11))
    assert not (set(prof.distances[~prof.in_gap].tolist()) & set(range(4, 11)))


def test_gap_profile_large_scale_limit():
    rng = np.random.default_rng(9)
    spec = frequencies(16)
    dec = decompose(rng.normal(size=16), rng.normal(size=16), spec)
    prof = gap_stability_profile(dec, spec, 1e6, PlanSpec(30, 5, 1000), samples=50)
    assert prof.gap_max_slope <= dec.amplitudes.sum() * 1.0 / 1e6 + 1e-15


def test_gap_profile_requires_condition():
    dec = SubspaceDecomposition(np.array([1.0]), np.array([0.0]))
    with pytest.raises(GapConditionError):
        gap_stability_profile(dec, frequencies(2), 1.0, PlanSpec(4, 2, 9), samples=5)
