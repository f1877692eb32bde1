import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sthq import entropy as ent
from sthq import quantizer as q

from fdcheck import check_grads


def _random_pmf(rng, L, zeros=False):
    p = rng.dirichlet(np.ones(L) * rng.uniform(0.2, 3))
    if zeros and L > 2:
        p[rng.integers(0, L)] = 0.0
        p /= p.sum()
    return p


def brute_force_joint_entropy(p, m):
    """-sum over all L**m sequences of prod(p) * log2(prod(p))."""
    total = 0.0
    for seq in itertools.product(range(len(p)), repeat=m):
        prob = math.prod(p[j] for j in seq)
        if prob > 0:
            total -= prob * math.log2(prob)
    return total


class TestHardHistogram:
    def test_counts(self):
        p = ent.hard_histogram(np.array([1, 1, 2, 3, 3, 3]) - 1, 3)
        np.testing.assert_allclose(p.probs, [1 / 3, 1 / 6, 1 / 2])

    def test_degenerate(self):
        p = ent.hard_histogram([2, 2, 2, 2], 4)
        np.testing.assert_array_equal(p.probs, [0, 0, 1, 0])
        assert ent.sample_entropy(p) == 0.0

    def test_uniform(self):
        p = ent.hard_histogram([[0, 1], [2, 3], [3, 2], [1, 0]], 4)
        np.testing.assert_allclose(p.probs, 0.25)
        assert ent.sample_entropy(p) == pytest.approx(2.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            ent.hard_histogram(np.array([], dtype=int), 3)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            ent.hard_histogram([0, 3], 3)


class TestSoftHistogram:
    def test_equidistant_column_is_uniform(self):
        C = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        np.testing.assert_allclose(ent.soft_histogram(np.zeros((1, 2)), C, 2.0).data, 0.25)

    def test_converges_to_hard(self):
        rng = np.random.default_rng(0)
        C = np.array([[0.0], [1.0], [2.0]])
        Z = (rng.integers(0, 3, 400) + rng.uniform(-0.3, 0.3, 400))[:, None]
        symbols, _ = q.hard_quantize(Z, C)
        soft = ent.soft_histogram(Z, C, 1e6).data
        np.testing.assert_allclose(soft, ent.hard_histogram(symbols, 3).probs, atol=1e-6)

    def test_mean_of_assignments(self):
        # two columns whose soft assignments are (0.7, 0.3) and (0.1, 0.9):
        # with centers {0, 1} and sigma = 1, z solves softmax(-(z^2), -(z-1)^2) = target
        def column_for(p0):
            return (1 - math.log(p0 / (1 - p0))) / 2

        Z = np.array([[column_for(0.7)], [column_for(0.1)]])
        phi = q.soft_assign(Z, [0.0, 1.0], 1.0).data
        np.testing.assert_allclose(phi, [[0.7, 0.3], [0.1, 0.9]], atol=1e-12)
        np.testing.assert_allclose(ent.soft_histogram(Z, [0.0, 1.0], 1.0).data, [0.4, 0.6])


class TestSampleEntropy:
    @pytest.mark.parametrize("p,bits", [
        ((0.5, 0.5), 1.0),
        ((1.0, 0.0), 0.0),
        ((1 / 3, 1 / 6, 1 / 2), 1.4591479170272448),
    ])
    def test_values(self, p, bits):
        assert ent.sample_entropy(p) == pytest.approx(bits, abs=1e-12)

    @given(arrays(np.float64, st.integers(1, 40), elements=st.floats(0, 1)))
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, w):
        if w.sum() <= 0:
            return
        p = w / w.sum()
        h = ent.sample_entropy(p)
        assert 0.0 <= h <= math.log2(len(p)) + 1e-9


class TestCrossEntropy:
    def test_equal(self):
        p = np.array([0.2, 0.3, 0.5])
        assert ent.cross_entropy_pq(p, p) == pytest.approx(ent.sample_entropy(p))

    def test_one_bit(self):
        assert ent.cross_entropy_pq([1.0, 0.0], [0.5, 0.5]) == pytest.approx(1.0)

    def test_infinite_is_error(self):
        with pytest.raises(ValueError):
            ent.cross_entropy_pq([0.5, 0.5], [1.0, 0.0])

    def test_identity_and_upper_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            L = int(rng.integers(2, 30))
            p, qq = _random_pmf(rng, L, zeros=True), _random_pmf(rng, L)
            hpq = ent.cross_entropy_pq(p, qq)
            assert abs(hpq - ent.sample_entropy(p) - ent.kl_divergence(p, qq)) < 1e-9
            assert hpq >= ent.sample_entropy(p) - 1e-12

    def test_soft_pq_matches_numeric(self):
        rng = np.random.default_rng(1)
        Z, C = rng.normal(size=(20, 2)), rng.normal(size=(4, 2))
        p = _random_pmf(rng, 4)
        qv = ent.soft_histogram(Z, C, 0.7).data
        assert ent.soft_cross_entropy_pq(Z, C, 0.7, p).item() == pytest.approx(
            ent.cross_entropy_pq(p, qv), rel=1e-12)


class TestSoftCrossEntropyQP:
    def test_hard_limit(self):
        rng = np.random.default_rng(3)
        C = np.array([[0.0], [1.0], [2.0], [3.0]])
        Z = (rng.integers(0, 4, 300) + rng.uniform(-0.3, 0.3, 300))[:, None]
        symbols, _ = q.hard_quantize(Z, C)
        p = ent.hard_histogram(symbols, 4)
        val = ent.soft_cross_entropy_qp(Z, C, 1e6, p).item()
        assert val == pytest.approx(ent.sample_entropy(p), abs=1e-6)

    def test_single_column(self):
        val = ent.soft_cross_entropy_qp(np.array([[0.5]]), [0.0, 1.0], 4.0, [0.5, 0.5]).item()
        assert val == pytest.approx(1.0)

    def test_batch_additivity(self):
        rng = np.random.default_rng(5)
        C = rng.normal(size=(5, 2))
        p = _random_pmf(rng, 5)
        A, B = rng.normal(size=(7, 2)), rng.normal(size=(13, 2))
        ha = ent.soft_cross_entropy_qp(A, C, 1.3, p).item()
        hb = ent.soft_cross_entropy_qp(B, C, 1.3, p).item()
        both = ent.soft_cross_entropy_qp(np.vstack([A, B]), C, 1.3, p).item()
        assert both == pytest.approx((7 * ha + 13 * hb) / 20, rel=1e-12)

    def test_unused_center_is_floored(self):
        val = ent.soft_cross_entropy_qp(np.array([[0.0]]), [0.0, 1.0], 1.0, [1.0, 0.0]).item()
        assert math.isfinite(val) and val > 0

    def test_gradients(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            p = _random_pmf(rng, 4, zeros=True)
            errs = check_grads(lambda Z, C, s: ent.soft_cross_entropy_qp(Z, C, s, p),
                               {"Z": rng.normal(size=(5, 2)), "C": rng.normal(size=(4, 2)),
                                "s": np.array(rng.uniform(0.2, 3.0))})
            assert max(errs.values()) < 1e-5, errs


class TestJointEntropy:
    def test_two_fair_symbols(self):
        assert ent.joint_entropy_estimate([0.5, 0.5], 2) == pytest.approx(2.0)
        assert brute_force_joint_entropy([0.5, 0.5], 2) == pytest.approx(2.0)

    def test_m1_and_degenerate(self):
        p = [0.1, 0.2, 0.7]
        assert ent.joint_entropy_estimate(p, 1) == pytest.approx(ent.sample_entropy(p))
        assert ent.joint_entropy_estimate([1.0, 0.0], 3) == 0.0

    def test_brute_force_grid(self):
        rng = np.random.default_rng(2)
        for L in range(2, 9):
            m = 1
            while L ** m <= 4096:
                p = _random_pmf(rng, L)
                assert abs(brute_force_joint_entropy(p, m) - ent.joint_entropy_estimate(p, m)) < 1e-9
                m += 1


class TestRunningHistogram:
    def test_capacity_one(self):
        rh = ent.RunningHistogram(3, capacity=1, interval=1)
        rh.update([[0, 0, 1]])
        pmf = rh.update([[2, 2, 2, 1]])
        np.testing.assert_allclose(pmf.probs, ent.hard_histogram([2, 2, 2, 1], 3).probs)

    def test_recount(self):
        rh = ent.RunningHistogram(4, capacity=10, interval=100)
        items = [[0, 1, 1], [3, 3], [2, 0, 0, 0]]
        rh.update(items[:2])
        rh.update(items[2:])
        pmf = rh.recompute()
        np.testing.assert_allclose(pmf.probs, ent.hard_histogram(items, 4).probs)

    def test_interval(self):
        rh = ent.RunningHistogram(2, capacity=100, interval=10)
        first = rh.update([[0, 0, 0]]).probs.copy()
        for _ in range(9):
            assert np.array_equal(rh.update([[1, 1, 1]]).probs, first)
        refreshed = rh.update([[1]]).probs
        assert not np.array_equal(refreshed, first)

    def test_ring_buffer_drops_oldest(self):
        rh = ent.RunningHistogram(2, capacity=2, interval=1)
        rh.update([[0] * 5, [1], [1]])
        np.testing.assert_array_equal(rh.counts, [0, 2])
