import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudosurv import PairedSample, hdts_test, paired_t_test
from pseudosurv.errors import DimensionMismatchError, LengthMismatchError, TooFewPairsError, TooFewSamplesError
from pseudosurv.stats import hotelling_statistic

from oracles import hotelling_exhaustive_p, t_two_sided_p_quadrature


class TestPairedT:
    def test_identical_samples_p_one(self):
        result = paired_t_test(PairedSample((0.1, 0.2, 0.3), (0.1, 0.2, 0.3)))
        assert result.p_value == 1.0

    def test_constant_nonzero_difference_p_zero(self):
        # exactly representable so each difference is exactly 0.125
        result = paired_t_test(PairedSample((0.25, 0.375, 0.5), (0.125, 0.25, 0.375)))
        assert result.p_value == 0.0
        assert np.isinf(result.statistic)

    def test_against_quadrature_oracle(self):
        d = [0.05, -0.01, 0.03, 0.06, 0.02]
        result = paired_t_test(PairedSample(tuple(d), (0.0,) * 5))
        expected = t_two_sided_p_quadrature(result.statistic, 4)
        assert result.p_value == pytest.approx(expected, abs=1e-6)
        assert result.statistic == pytest.approx(np.sqrt(6), rel=1e-12)
        assert result.meta["df"] == 4

    def test_frozen_example_value(self):
        # p for t = sqrt(6) with 4 degrees of freedom, frozen from the
        # quadrature oracle
        result = paired_t_test(PairedSample((0.05, -0.01, 0.03, 0.06, 0.02), (0.0,) * 5))
        assert result.p_value == pytest.approx(0.070483, abs=1e-5)

    @given(
        st.lists(st.floats(-1, 1), min_size=2, max_size=12),
        st.integers(0, 1000),
    )
    @settings(max_examples=60, deadline=None)
    def test_sign_antisymmetry(self, a, salt):
        rng = np.random.default_rng(salt)
        b = list(rng.uniform(-1, 1, len(a)))
        r1 = paired_t_test(PairedSample(tuple(a), tuple(b)))
        r2 = paired_t_test(PairedSample(tuple(b), tuple(a)))
        assert r1.statistic == pytest.approx(-r2.statistic, abs=1e-12, nan_ok=False) or (
            np.isinf(r1.statistic) and np.isinf(r2.statistic)
        )
        assert r1.p_value == pytest.approx(r2.p_value, abs=1e-12)

    def test_too_few_pairs(self):
        with pytest.raises(TooFewPairsError):
            paired_t_test(PairedSample((0.1,), (0.2,)))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            PairedSample((0.1, 0.2), (0.1,))


class TestHdts:
    def test_exhaustive_tiny_case_matches_enumeration(self):
        xa = np.array([[0.0], [1.0]])
        xb = np.array([[5.0], [6.0]])
        result = hdts_test(xa, xb, n_perm=99, seed=0)
        assert result.meta["exhaustive"] is True
        assert result.meta["n_perm"] == 6
        pooled = np.vstack([xa, xb])
        observed = hotelling_statistic(xa, xb)
        expected = hotelling_exhaustive_p(pooled, 2, hotelling_statistic, observed)
        assert result.p_value == pytest.approx(expected, abs=1e-12)

    def test_group_swap_symmetry(self):
        rng = np.random.default_rng(5)
        xa = rng.normal(size=(6, 4))
        xb = rng.normal(size=(9, 4)) + 0.5
        r1 = hdts_test(xa, xb, n_perm=199, seed=3)
        r2 = hdts_test(xb, xa, n_perm=199, seed=3)
        assert r1.statistic == r2.statistic
        assert r1.p_value == r2.p_value

    def test_p_value_bounds(self):
        rng = np.random.default_rng(1)
        xa = rng.normal(size=(10, 3))
        xb = rng.normal(size=(10, 3))
        result = hdts_test(xa, xb, n_perm=99, seed=2)
        assert 1 / 100 <= result.p_value <= 1.0

    def test_detects_large_shift(self):
        rng = np.random.default_rng(9)
        xa = rng.normal(size=(20, 50))
        xb = rng.normal(size=(20, 50)) + 2.0
        result = hdts_test(xa, xb, n_perm=199, seed=0)
        assert result.p_value <= 0.01

    def test_high_dimensional_regime_works(self):
        # p > n: the ridge keeps the statistic finite and well-defined
        rng = np.random.default_rng(2)
        xa = rng.normal(size=(5, 40))
        xb = rng.normal(size=(6, 40))
        result = hdts_test(xa, xb, n_perm=99, seed=1)
        assert np.isfinite(result.statistic)
        assert 0 < result.p_value <= 1

    def test_errors(self):
        with pytest.raises(TooFewSamplesError):
            hdts_test(np.ones((1, 2)), np.ones((3, 2)), n_perm=99, seed=0)
        with pytest.raises(DimensionMismatchError):
            hdts_test(np.ones((3, 2)), np.ones((3, 3)), n_perm=99, seed=0)
        with pytest.raises(TooFewSamplesError):
            hdts_test(np.ones((3, 2)), np.ones((3, 2)), n_perm=10, seed=0)

    def test_determinism(self):
        rng = np.random.default_rng(4)
        xa = rng.normal(size=(8, 5))
        xb = rng.normal(size=(8, 5))
        r1 = hdts_test(xa, xb, n_perm=199, seed=7)
        r2 = hdts_test(xa, xb, n_perm=199, seed=7)
        assert r1 == r2
