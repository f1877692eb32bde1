import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sthq import quantizer as q

from fdcheck import check_grads


def _brute_nearest(z, centers):
    best, best_d = 0, math.inf
    for j, c in enumerate(centers):
        d = sum((a - b) ** 2 for a, b in zip(z, c))
        if d < best_d:
            best, best_d = j, d
    return best


class TestReshape:
    def test_pairs(self):
        np.testing.assert_array_equal(q.reshape_columns([1, 2, 3, 4], 2), [[1, 2], [3, 4]])

    def test_single(self):
        np.testing.assert_array_equal(q.reshape_columns([5.0], 1), [[5.0]])

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            dim = int(rng.integers(1, 6))
            z = rng.normal(size=dim * int(rng.integers(1, 20)))
            np.testing.assert_array_equal(q.unreshape_columns(q.reshape_columns(z, dim)), z)

    def test_indivisible(self):
        with pytest.raises(ValueError, match="divide"):
            q.reshape_columns(np.zeros(5), 2)


class TestSoftAssign:
    def test_equidistant(self):
        for sigma in (0.01, 1.0, 50.0):
            np.testing.assert_allclose(q.soft_assign(0.5, [0.0, 1.0], sigma).data, [0.5, 0.5])

    def test_unit_hardness_value(self):
        # 1/(1+e^-1), e^-1/(1+e^-1) evaluated independently
        expected = [1 / (1 + math.exp(-1)), math.exp(-1) / (1 + math.exp(-1))]
        np.testing.assert_allclose(q.soft_assign(0.0, [0.0, 1.0], 1.0).data, expected, rtol=1e-12)
        np.testing.assert_allclose(expected, [0.73106, 0.26894], atol=1e-5)

    def test_hard_limit(self):
        np.testing.assert_array_equal(q.soft_assign(0.4, [0.0, 1.0], 1e9).data, [1.0, 0.0])

    def test_rejects_non_finite(self):
        with pytest.raises((ValueError, FloatingPointError)):
            q.soft_assign(np.nan, [0.0, 1.0], 1.0)
        with pytest.raises(ValueError):
            q.soft_assign(0.0, [0.0, 1.0], 0.0)

    @given(st.integers(0, 10_000), st.floats(-3, 9))
    @settings(max_examples=200, deadline=None)
    def test_simplex_over_sigma_range(self, seed, log_sigma):
        rng = np.random.default_rng(seed)
        C = rng.normal(size=(int(rng.integers(2, 9)), int(rng.integers(1, 4))))
        Z = rng.normal(size=(5, C.shape[1]))
        phi = q.soft_assign(Z, C, 10.0 ** log_sigma).data
        assert (phi > 0).all() or log_sigma > 0  # very hard assignments underflow to exact zeros
        assert (phi >= 0).all() and (phi <= 1).all()
        np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-9)

    def test_monotone_hardening(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            C = rng.normal(size=(6, 2))
            z = rng.normal(size=2)
            j = _brute_nearest(z, C)
            probs = [q.soft_assign(z, C, s).data[j] for s in (0.1, 1, 10, 100)]
            assert all(b >= a - 1e-15 for a, b in zip(probs, probs[1:]))


class TestHardAssign:
    def test_nearer(self):
        assert q.hard_assign(0.4, [0.0, 1.0]) == 0

    def test_tie_goes_to_lowest_index(self):
        assert q.hard_assign(0.5, [0.0, 1.0]) == 0

    def test_matches_brute_force_and_soft_argmax(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            L, dim = int(rng.integers(2, 8)), int(rng.integers(1, 4))
            C = rng.normal(size=(L, dim))
            z = rng.normal(size=dim)
            d = np.sort(((C - z) ** 2).sum(axis=1))
            j = q.hard_assign(z, C)
            assert j == _brute_nearest(z, C)
            if d[1] - d[0] > 1e-9:
                assert j == int(np.argmax(q.soft_assign(z, C, 1.0).data))


class TestSoftQuantize:
    def test_equidistant_is_mean(self):
        np.testing.assert_allclose(q.soft_quantize(0.5, [0.0, 1.0], 3.0).data, [0.5])

    def test_unit_value(self):
        np.testing.assert_allclose(q.soft_quantize(0.0, [0.0, 1.0], 1.0).data,
                                   [math.exp(-1) / (1 + math.exp(-1))], rtol=1e-12)

    def test_converges_to_hard(self):
        rng = np.random.default_rng(2)
        C = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        Z = rng.uniform(-1, 2, size=(500, 2))
        d = np.sort(((Z[:, None] - C[None]) ** 2).sum(-1), axis=1)
        Z = Z[d[:, 1] - d[:, 0] > 1e-2]
        _, zhat = q.hard_quantize(Z, C)
        np.testing.assert_allclose(q.soft_quantize(Z, C, 1e6).data, zhat, atol=1e-6)

    def test_in_convex_hull_under_projections(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            C = rng.normal(size=(5, 3))
            Z = rng.normal(size=(10, 3)) * 2
            out = q.soft_quantize(Z, C, float(rng.uniform(0.01, 10))).data
            for _ in range(5):
                u = rng.normal(size=3)
                proj = C @ u
                assert ((out @ u) >= proj.min() - 1e-12).all()
                assert ((out @ u) <= proj.max() + 1e-12).all()


class TestHardQuantize:
    def test_fixed_point(self):
        C = np.array([[0.0, 1.0], [2.0, -1.0], [5.0, 5.0]])
        symbols, zhat = q.hard_quantize(C[[2, 0, 1, 1]], C)
        np.testing.assert_array_equal(symbols, [2, 0, 1, 1])
        np.testing.assert_array_equal(zhat, C[[2, 0, 1, 1]])

    def test_scalar_example(self):
        symbols, zhat = q.hard_quantize(np.array([-0.9, 0.2, 2.0]), np.array([-1.0, 1.0]))
        np.testing.assert_array_equal(symbols, [0, 1, 1])  # (1, 2, 2) one-based
        np.testing.assert_array_equal(zhat.ravel(), [-1.0, 1.0, 1.0])

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            C = rng.normal(size=(int(rng.integers(2, 10)), 2))
            s1, zhat = q.hard_quantize(rng.normal(size=(20, 2)), C)
            s2, zhat2 = q.hard_quantize(zhat, C)
            np.testing.assert_array_equal(s1, s2)
            np.testing.assert_array_equal(zhat, zhat2)


class TestGradients:
    def test_soft_assign_and_quantize(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            Z = rng.normal(size=(3, 2))
            C = rng.normal(size=(4, 2))
            sigma = np.array(rng.uniform(0.2, 3.0))
            w = rng.normal(size=(3, 4))
            errs = check_grads(lambda Z, C, s: (q.soft_assign(Z, C, s) * w).sum(),
                               {"Z": Z, "C": C, "s": sigma})
            assert max(errs.values()) < 1e-5, errs
            w2 = rng.normal(size=(3, 2))
            errs = check_grads(lambda Z, C, s: (q.soft_quantize(Z, C, s) * w2).sum(),
                               {"Z": Z, "C": C, "s": sigma})
            assert max(errs.values()) < 1e-5, errs


def _two_means_1d(x):
    """Exact 2-means on 1-D data: enumerate every split of the sorted points."""
    xs = np.sort(x)
    best = (math.inf, None)
    for k in range(1, len(xs)):
        a, b = xs[:k], xs[k:]
        cost = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
        if cost < best[0]:
            best = (cost, (a.mean(), b.mean(), a, b))
    return best[1]


class TestInitCenters:
    @pytest.mark.parametrize("seed", range(6))
    def test_two_clusters(self, seed):
        rng = np.random.default_rng(100 + seed)
        z = np.concatenate([rng.uniform(0, 1, 150), rng.uniform(3, 4, 150)])
        ma, mb, a, b = _two_means_1d(z)
        C, sigma0 = q.init_centers(z, 2, seed=seed)
        lo, hi = np.sort(C.values.ravel())
        assert a.min() <= lo <= a.max()
        assert b.min() <= hi <= b.max()
        assert abs(lo - ma) < 0.15 and abs(hi - mb) < 0.15
        assert sigma0 > 0

    def test_full_cover_energy_vanishes(self):
        rng = np.random.default_rng(0)
        z = rng.uniform(0, 10, size=(6, 1))
        C, sigma0 = q.init_centers(z, 6, iters=200, seed=1)
        energy = q.cluster_energy(z, C, 1e3 * sigma0).item()
        assert energy < 1e-6

    def test_deterministic(self):
        z = np.random.default_rng(5).normal(size=(300, 2))
        c1, s1 = q.init_centers(z, 8, iters=100, seed=42)
        c2, s2 = q.init_centers(z, 8, iters=100, seed=42)
        assert c1.values.tobytes() == c2.values.tobytes() and s1 == s2

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            q.init_centers(np.zeros((3, 1)), 4)


class TestCenterSet:
    def test_serialization_layout(self):
        C = q.CenterSet([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        blob = C.to_bytes()
        assert blob[:4] == bytes([2, 0, 3, 0])  # dim u16, L u16
        np.testing.assert_array_equal(np.frombuffer(blob[4:], "<f4"), [1, 2, 3, 4, 5, 6])
        back, end = q.CenterSet.from_bytes(blob)
        assert end == len(blob)
        np.testing.assert_array_equal(back.values, C.values)

    @pytest.mark.parametrize("bad", [[[1.0]], [[np.inf], [0.0]], np.zeros((2, 0))])
    def test_invariants(self, bad):
        with pytest.raises(ValueError):
            q.CenterSet(bad)
