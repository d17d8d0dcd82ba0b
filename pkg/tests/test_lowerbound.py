import math

import mpmath
import numpy as np
import pytest

from manisep.lowerbound import (
    LowerBoundConfig,
    aiml_chi2_bound,
    chi2_bound,
    grid_schedule,
    simulate_lr_test,
    _mixture_likelihood,
)


def mpmath_bound(n, dim, grid, dps=60):
    """Extended-precision oracle for the closed-form bound."""
    with mpmath.workdps(dps):
        d = mpmath.mpf(grid) ** (-dim) - (3 * mpmath.mpf(grid)) ** (-dim)
        L = mpmath.mpf(grid) ** dim
        val = mpmath.e ** (n * d / (1 - d)) / L + n * d**2 / (
            (1 - d) * mpmath.sqrt(1 - 2 * d)
        )
        return float(val)


class TestChi2Bound:
    def test_hand_value_n1(self):
        # (1/3) e^(2/7) + (2/9)^2 / ((7/9) sqrt(5/9)) = 0.52875...
        cfg = LowerBoundConfig(n=1, dim=1, grid=3)
        assert cfg.delta == pytest.approx(2 / 9, rel=1e-15)
        val = chi2_bound(cfg)
        hand = (1 / 3) * math.exp((2 / 9) / (7 / 9)) + (2 / 9) ** 2 / (
            (7 / 9) * math.sqrt(5 / 9)
        )
        assert val == pytest.approx(hand, rel=1e-14)
        assert val == pytest.approx(0.5287542744824, rel=1e-10)

    @pytest.mark.parametrize(
        "n,dim,grid",
        [(1, 1, 3), (1000, 1, 290), (10_000, 2, 100), (50, 3, 4), (10**6, 1, 144_766)],
    )
    def test_matches_extended_precision(self, n, dim, grid):
        cfg = LowerBoundConfig(n=n, dim=dim, grid=grid)
        assert chi2_bound(cfg) == pytest.approx(mpmath_bound(n, dim, grid), rel=1e-12)

    def test_small_delta_collapses_to_inverse_cells(self):
        cfg = LowerBoundConfig(n=1, dim=1, grid=100_000)
        ratio = chi2_bound(cfg) * cfg.cells
        assert ratio == pytest.approx(1.0, abs=1e-4)

    def test_overflow_regime_uses_extended_precision(self):
        cfg = LowerBoundConfig(n=10**7, dim=1, grid=290)
        val = chi2_bound(cfg)
        assert math.isinf(val) or val > 1e200
        assert val == pytest.approx(mpmath_bound(10**7, 1, 290), rel=1e-9) or math.isinf(val)

    def test_schedule_drives_bound_to_zero_monotonically(self):
        ns = [10**3, 10**4, 10**5, 10**6]
        vals = []
        for n in ns:
            M = grid_schedule(n, 1)
            vals.append(chi2_bound(LowerBoundConfig(n=n, dim=1, grid=M)))
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-3

    def test_delta_validation(self):
        with pytest.raises(ValueError):
            LowerBoundConfig(n=10, dim=1, grid=1)
        with pytest.raises(ValueError):
            LowerBoundConfig(n=0, dim=1, grid=3)


class TestAimlBound:
    def test_equal_dimensions_identical(self):
        assert aiml_chi2_bound(500, 2, 40) == chi2_bound(
            LowerBoundConfig(n=500, dim=2, grid=40)
        )

    def test_signal_dimension_grows_bound_at_fixed_grid(self):
        # lower effective dimension -> larger Delta -> larger bound
        full = chi2_bound(LowerBoundConfig(n=200, dim=3, grid=6))
        signal = aiml_chi2_bound(200, 1, 6)
        assert signal > full

    def test_signal_schedule_still_vanishes(self):
        ns = [10**3, 10**5]
        vals = [
            aiml_chi2_bound(n, 1, grid_schedule(n, 1)) for n in ns
        ]
        assert vals[1] < vals[0]
        assert vals[1] < 1e-2


class TestLikelihood:
    def test_hand_checkable_tiny_case(self):
        cfg = LowerBoundConfig(n=2, dim=1, grid=3)
        f = (1 / (1 - cfg.delta)) ** cfg.n
        # both points inside kept subcubes or outside the carved cell:
        # no ring is hit, all three F_l = f
        x = np.array([[0.5], [0.1]])
        # 0.5 sits in the center subcube of cell 2; 0.1 in the ring of cell 1
        assert _mixture_likelihood(x, cfg) == pytest.approx(f * 2 / 3, rel=1e-12)
        x2 = np.array([[0.5], [0.5]])
        assert _mixture_likelihood(x2, cfg) == pytest.approx(f, rel=1e-12)
        x3 = np.array([[0.1], [0.4]])
        assert _mixture_likelihood(x3, cfg) == pytest.approx(f * 1 / 3, rel=1e-12)

    def test_easy_instance_test_succeeds(self):
        # huge Delta: the ring is hit almost surely under the null
        cfg = LowerBoundConfig(n=200, dim=1, grid=2)
        res = simulate_lr_test(cfg, alpha=0.05, trials=400, seed=1)
        assert res.error_sum < 0.2

    def test_single_sample_respects_chi2_floor(self):
        cfg = LowerBoundConfig(n=1, dim=1, grid=3)
        bound = chi2_bound(cfg)
        res = simulate_lr_test(cfg, alpha=0.05, trials=2000, seed=2)
        assert res.error_sum >= 1.0 - bound - 3 * res.error_sum_se

    def test_alpha_one_degenerates(self):
        cfg = LowerBoundConfig(n=50, dim=1, grid=3)
        res = simulate_lr_test(cfg, alpha=1.0, trials=200, seed=3)
        assert res.threshold == -math.inf
        assert res.type1 == 1.0
        assert res.type2 == 0.0
        assert res.error_sum == 1.0

    def test_requires_enough_trials(self):
        cfg = LowerBoundConfig(n=10, dim=1, grid=3)
        with pytest.raises(ValueError):
            simulate_lr_test(cfg, alpha=0.05, trials=10)

    def test_determinism(self):
        cfg = LowerBoundConfig(n=100, dim=1, grid=10)
        a = simulate_lr_test(cfg, alpha=0.05, trials=200, seed=7)
        b = simulate_lr_test(cfg, alpha=0.05, trials=200, seed=7)
        assert (a.type1, a.type2) == (b.type1, b.type2)

    def test_information_inequality_two_dim(self):
        cfg = LowerBoundConfig(n=50, dim=2, grid=grid_schedule(50, 2))
        bound = chi2_bound(cfg)
        res = simulate_lr_test(cfg, alpha=0.05, trials=500, seed=4)
        assert res.error_sum >= 1.0 - bound - 3 * res.error_sum_se


class TestSchedule:
    def test_matches_formula(self):
        n = 1000
        assert grid_schedule(n, 1) == math.ceil(2 * n / math.log(n))
        assert grid_schedule(n, 2) == math.ceil(math.sqrt(2 * n / math.log(n)))
