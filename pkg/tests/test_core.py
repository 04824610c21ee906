import math
from fractions import Fraction

import numpy as np
import pytest

from lo_lab.core import (
    Ball,
    CapExceededError,
    ExactProb,
    InvalidInputError,
    VectorConfig,
    enumerate_sums,
    max_ball_probability,
    prob_in_ball,
)

from conftest import (
    cloud_as_table,
    make_config,
    naive_cloud,
    random_rational_config,
)


class TestExactProb:
    def test_bounds_enforced(self):
        with pytest.raises(InvalidInputError):
            ExactProb(-1, 3)
        with pytest.raises(InvalidInputError):
            ExactProb(9, 3)

    def test_exact_comparisons(self):
        assert ExactProb(3, 2) == ExactProb(12, 4)
        assert ExactProb(10, 4) < ExactProb(12, 4)
        assert ExactProb(1, 1) == Fraction(1, 2)
        assert ExactProb(12, 4) > Fraction(10, 16)
        assert float(ExactProb(3, 2)) == 0.75

    def test_str(self):
        assert str(ExactProb(12, 4)) == "12/16"


class TestVectorConfig:
    def test_norm_floor_enforced(self):
        with pytest.raises(InvalidInputError):
            make_config([(Fraction(1, 2), Fraction(1, 2))])

    def test_relaxed_bypass(self):
        cfg = make_config([(Fraction(1, 2), 0)], relaxed=True)
        assert cfg.relaxed

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            VectorConfig(dim=2, vectors=((Fraction(1),),))

    def test_lattice_scaling(self):
        cfg = make_config([(Fraction(3, 2), Fraction(1, 3))])
        scale, rows = cfg.lattice()
        assert scale == 6
        assert rows == [(9, 2)]


class TestEnumerate:
    def test_empty_sum(self, backend):
        cloud = enumerate_sums(make_config([]))
        assert cloud.num_atoms == 1
        assert cloud.total_mass() == 1
        assert cloud_as_table(cloud) == {(Fraction(0),): 1}

    def test_pair_of_ones(self, backend):
        cloud = enumerate_sums(make_config([(1,), (1,)]))
        assert cloud_as_table(cloud) == {
            (Fraction(-2),): 1, (Fraction(0),): 2, (Fraction(2),): 1}

    def test_two_axes(self, backend):
        cloud = enumerate_sums(make_config([(1, 0), (0, 1)]))
        table = cloud_as_table(cloud)
        assert len(table) == 4
        assert all(m == 1 for m in table.values())
        assert set(table) == {
            (Fraction(sx), Fraction(sy)) for sx in (-1, 1) for sy in (-1, 1)}

    def test_cap_refusal(self):
        cfg = make_config([(1,)] * 5)
        with pytest.raises(CapExceededError, match="cap 4"):
            enumerate_sums(cfg, cap=4)

    @pytest.mark.parametrize("n,d", [(5, 1), (7, 2), (6, 3)])
    def test_matches_naive_oracle(self, backend, n, d):
        rng = np.random.default_rng(100 * n + d)
        cfg = random_rational_config(rng, n, d)
        cloud = enumerate_sums(cfg)
        cloud.validate()
        assert cloud_as_table(cloud) == naive_cloud(cfg)

    def test_negation_symmetry(self, backend):
        rng = np.random.default_rng(7)
        for _ in range(5):
            cfg = random_rational_config(rng, 8, 2)
            assert enumerate_sums(cfg).is_negation_symmetric()

    def test_wide_lattice_exact(self):
        # denominators engineered so scaled coordinates overflow int64
        big = (1 << 62) + 1
        cfg = make_config([(Fraction(big * 3 + 1, big),), (Fraction(2 * big + 3, big),)])
        cloud = enumerate_sums(cfg)
        assert cloud.wide
        assert cloud_as_table(cloud) == naive_cloud(cfg)


class TestProbInBall:
    def setup_method(self):
        self.cloud11 = enumerate_sums(make_config([(1,), (1,)]))

    def test_point_ball(self):
        assert prob_in_ball(self.cloud11, Ball((Fraction(0),), Fraction(0))) \
            == ExactProb(2, 2)

    def test_shifted_ball_matches_oracle(self):
        # oracle: patterns of (1,1) with |s-1| <= 1 -> {0,2} covered, 3 of 4
        table = naive_cloud(make_config([(1,), (1,)]))
        expect = sum(m for s, m in table.items() if abs(s[0] - 1) <= 1)
        got = prob_in_ball(self.cloud11, Ball((Fraction(1),), Fraction(1)))
        assert got == ExactProb(expect, 2)
        assert expect == 3

    def test_orthogonal_pair_outside(self):
        cloud = enumerate_sums(make_config([(1, 0), (0, 1)]))
        got = prob_in_ball(cloud, Ball((Fraction(0), Fraction(0)), Fraction(1)))
        assert got == ExactProb(0, 2)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            prob_in_ball(self.cloud11, Ball((Fraction(0), Fraction(0)), 1))

    def test_exact_boundary_inclusion(self):
        # closed ball: atom exactly on the boundary counts
        cloud = enumerate_sums(make_config([(1, 0), (0, 1)]))
        got = prob_in_ball(cloud, Ball((Fraction(0), Fraction(0)), Fraction(2)))
        assert got == ExactProb(4, 2)
        exact_r = Ball((Fraction(0), Fraction(0)), Fraction(141421356, 100000000))
        assert prob_in_ball(cloud, exact_r) == ExactProb(0, 2)

    def test_float_ball_tau(self):
        cloud = enumerate_sums(make_config([(1, 0), (0, 1)]))
        got = prob_in_ball(cloud, Ball((0.0, 0.0), math.sqrt(2.0)))
        assert got == ExactProb(4, 2)

    def test_exact_vs_float_random(self, backend):
        rng = np.random.default_rng(11)
        for _ in range(10):
            cfg = random_rational_config(rng, 8, 2)
            cloud = enumerate_sums(cfg)
            c = (Fraction(int(rng.integers(-8, 9)), 4),
                 Fraction(int(rng.integers(-8, 9)), 4))
            r = Fraction(int(rng.integers(1, 9)), 3)
            exact = prob_in_ball(cloud, Ball(c, r))
            approx = prob_in_ball(cloud, Ball((float(c[0]), float(c[1])), float(r)))
            assert exact == approx


class TestMaxBall:
    def test_window_pair(self):
        cloud = enumerate_sums(make_config([(1,), (1,)]))
        res = max_ball_probability(cloud, 1)
        assert res.prob == Fraction(3, 4)
        assert res.exact
        assert prob_in_ball(cloud, res.ball) == res.prob

    def test_counterexample_family_mass(self, backend):
        cloud = enumerate_sums(make_config([(1, 0), (1, 0), (1, 0), (0, 1)]))
        res = max_ball_probability(cloud, Fraction(3, 2))
        assert res.prob == ExactProb(12, 4)
        assert prob_in_ball(cloud, res.ball, res.tau) == res.prob

    def test_empty_cloud(self):
        cloud = enumerate_sums(make_config([]))
        res = max_ball_probability(cloud, Fraction(1, 2))
        assert res.prob == ExactProb(1, 0)

    def test_window_oracle_random_1d(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            cfg = random_rational_config(rng, 8, 1)
            cloud = enumerate_sums(cfg)
            delta = Fraction(int(rng.integers(1, 7)), 2)
            res = max_ball_probability(cloud, delta)
            # oracle: try every atom as left window edge
            table = sorted(cloud_as_table(cloud).items())
            best = 0
            for lo, _ in table:
                mass = sum(m for x, m in table if lo[0] <= x[0] <= lo[0] + 2 * delta)
                best = max(best, mass)
            assert res.prob == ExactProb(best, 8)

    def test_candidate_oracle_random_2d(self, backend):
        rng = np.random.default_rng(5)
        for _ in range(8):
            cfg = random_rational_config(rng, 6, 2)
            cloud = enumerate_sums(cfg)
            delta = Fraction(int(rng.integers(2, 7)), 3)
            res = max_ball_probability(cloud, delta)
            assert res.prob == _naive_best_disk(cloud, delta)
            assert prob_in_ball(cloud, res.ball, res.tau) == res.prob

    def test_monotone_in_delta(self, backend):
        rng = np.random.default_rng(9)
        cfg = random_rational_config(rng, 8, 2)
        cloud = enumerate_sums(cfg)
        probs = [max_ball_probability(cloud, Fraction(k, 4)).prob
                 for k in range(0, 13)]
        assert all(a <= b for a, b in zip(probs, probs[1:]))

    def test_random_probe_soundness(self, backend):
        rng = np.random.default_rng(13)
        cfg = random_rational_config(rng, 8, 2)
        cloud = enumerate_sums(cfg)
        delta = Fraction(3, 2)
        res = max_ball_probability(cloud, delta)
        pts = cloud.float_atoms()
        lo, hi = pts.min(axis=0) - 1.5, pts.max(axis=0) + 1.5
        for _ in range(1000):
            c = rng.uniform(lo, hi)
            probe = prob_in_ball(cloud, Ball((c[0], c[1]), float(delta)))
            assert probe <= res.prob

    def test_three_dims_small(self):
        cloud = enumerate_sums(make_config([(1, 0, 0), (0, 1, 0), (0, 0, 1)]))
        res = max_ball_probability(cloud, Fraction(174, 100))
        # radius 1.74 > sqrt(3) covers all 8 atoms
        assert res.prob == ExactProb(8, 3)

    def test_three_dims_triple_needed(self):
        cloud = enumerate_sums(make_config([(1, 0, 0), (0, 1, 0), (0, 0, 1)]))
        # sqrt(2) <= r < sqrt(3): a ball through three atoms of one octant face
        res = max_ball_probability(cloud, Fraction(15, 10))
        oracle = _naive_best_disk(cloud, Fraction(15, 10))
        assert res.prob == oracle
        assert prob_in_ball(cloud, res.ball, res.tau) == res.prob

    def test_atom_cap_refusal(self):
        cloud = enumerate_sums(make_config([(1,), (Fraction(3, 2),), (2,)]))
        with pytest.raises(CapExceededError, match="cap 2"):
            max_ball_probability(cloud, 1, atom_cap=2)

    def test_high_dim_needs_flag(self):
        cloud = enumerate_sums(make_config([(1, 0, 0, 0), (0, 1, 0, 0)]))
        with pytest.raises(InvalidInputError):
            max_ball_probability(cloud, 1)
        res = max_ball_probability(cloud, 1, heuristic=True)
        assert res.method == "heuristic"
        assert res.prob >= ExactProb(1, 2)


def _naive_best_disk(cloud, delta):
    """Brute-force candidate oracle: atoms, all pair liftings, all triples."""
    pts = cloud.float_atoms()
    mult = np.asarray(cloud.mult, dtype=np.int64)
    r = float(delta) * (1 + 1e-9)
    centers = [p for p in pts]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = np.linalg.norm(pts[j] - pts[i])
            if d <= 2 * r:
                m = (pts[i] + pts[j]) / 2
                w = pts[j] - pts[i]
                if pts.shape[1] == 2:
                    perp = np.array([-w[1], w[0]]) / d
                    h = math.sqrt(max(0.0, r * r - d * d / 4))
                    centers += [m + h * perp, m - h * perp]
                else:
                    from lo_lab.core import _pair_centers_lifted
                    centers += _pair_centers_lifted(pts[i], pts[j], r)
    if pts.shape[1] == 3:
        from lo_lab.core import _triple_centers_lifted
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                for k in range(j + 1, len(pts)):
                    centers += _triple_centers_lifted(pts[i], pts[j], pts[k], r)
    best = 0
    for c in centers:
        d2 = ((pts - c) ** 2).sum(axis=1)
        best = max(best, int(mult[d2 <= r * r].sum()))
    return ExactProb(best, cloud.n)
