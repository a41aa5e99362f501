import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdtails.calibration import (
    CalibrationResult,
    Observation,
    bootstrap_q_se,
    drawdown_probability,
    estimate_leg_moments,
    fit_price_function,
    model_from_moments,
    rise_probability,
)
from sdtails.core_model import AntiCorrelated, Conditional, Independent, LegParams, PriceFunction, QuotientModel
from sdtails.density_series import cdf_from_density, quotient_density_values
from sdtails.sampler import RngStream, sample_pair_batch
from sdtails.tail_estimation import hill_estimator
from sdtails.transforms import g_eps, inverse_branches

GEN_MODEL = QuotientModel(LegParams(1.0, 0.8), LegParams(1.0, 0.8), Independent(0.0, 0.0), Conditional(0.0))


def positive_legs(model, n, seed):
    b = sample_pair_batch(model, n, RngStream(seed))
    ok = (b.r1 > 0) & (b.r2 > 0)
    return b.r1[ok], b.r2[ok]


def make_obs(d, s, rel):
    return [Observation(float(a), float(b), float(c)) for a, b, c in zip(d, s, rel)]


def synthetic(n, q=3.0, eps=0.0, scale=0.02, noise=0.0, seed=0):
    d, s = positive_legs(GEN_MODEL, n + n // 2, seed)
    d, s = d[:n], s[:n]
    rel = scale * g_eps(d / s, PriceFunction(q, eps))
    if noise:
        rel = rel * np.exp(noise * np.random.default_rng(seed + 1).standard_normal(n))
    return make_obs(d, s, rel)


class TestFit:
    def test_noise_free(self):
        res = fit_price_function(synthetic(300))
        assert abs(res.q_hat - 3.0) < 1e-10
        assert res.scale_hat == pytest.approx(0.02, rel=1e-10)
        assert res.r2 == pytest.approx(1.0) and res.sign_consistency == 1.0
        assert res.predicted_zeta == res.q_hat

    def test_noise_free_with_known_epsilon(self):
        res = fit_price_function(synthetic(300, eps=0.05), epsilon=0.05)
        assert abs(res.q_hat - 3.0) < 1e-8

    def test_multiplicative_noise(self):
        res = fit_price_function(synthetic(500, noise=0.05, seed=3))
        assert abs(res.q_hat - 3.0) < 0.1

    @given(st.floats(1e-3, 1e3))
    def test_scale_equivariance(self, c):
        obs = synthetic(200, noise=0.05, seed=4)
        scaled = [Observation(o.demand, o.supply, c * o.rel_price_change) for o in obs]
        a, b = fit_price_function(obs), fit_price_function(scaled)
        assert b.scale_hat == pytest.approx(c * a.scale_hat, rel=1e-9)
        assert b.q_hat == pytest.approx(a.q_hat, rel=1e-9)

    def test_swap_antisymmetry(self):
        obs = synthetic(200, noise=0.05, seed=5)
        # Flip a few signs so the consistency fraction is not trivially 1.
        obs = [Observation(o.demand, o.supply, -o.rel_price_change if i % 7 == 0 else o.rel_price_change) for i, o in enumerate(obs)]
        swapped = [Observation(o.supply, o.demand, o.rel_price_change) for o in obs]
        a, b = fit_price_function(obs), fit_price_function(swapped)
        assert b.q_hat == pytest.approx(a.q_hat, rel=1e-12)
        assert b.sign_consistency == pytest.approx(1.0 - a.sign_consistency)

    def test_too_few(self):
        with pytest.raises(ValueError):
            fit_price_function(synthetic(20))

    def test_degenerate_spread(self):
        obs = [Observation(1.0 + 0.01 * (1 + i / 100), 1.0, 0.01) for i in range(50)]
        with pytest.raises(ValueError):
            fit_price_function(obs)

    def test_observation_validation(self):
        with pytest.raises(ValueError):
            Observation(0.0, 1.0, 0.1)
        with pytest.raises(ValueError):
            CalibrationResult(3.0, 1.0, 1.0, 3.0, 10, 1.0)

    def test_bootstrap_is_deterministic(self):
        obs = synthetic(100, noise=0.05, seed=6)
        a = bootstrap_q_se(obs, 30, seed=1)
        assert a == bootstrap_q_se(obs, 30, seed=1) and 0 < a < 0.5


class TestPipeline:
    @pytest.mark.parametrize("q", [2.0, 3.0])
    def test_closure(self, q):
        pf = PriceFunction(q, 1e-3)
        d, s = positive_legs(GEN_MODEL, 10**6, 7)
        rel = 0.03 * g_eps(d / s, pf)
        res = fit_price_function(make_obs(d[:2000], s[:2000], rel[:2000]), epsilon=pf.epsilon)
        assert abs(res.q_hat - q) < 1e-6
        assert abs(hill_estimator(rel).zeta_hat - res.predicted_zeta) < 0.15


class TestMoments:
    def test_constant(self):
        m = estimate_leg_moments(np.full(40, 2.0), np.full(40, 3.0))
        assert m == (2.0, 0.0, 3.0, 0.0, 0.0)

    def test_gaussian_means(self):
        gen = np.random.default_rng(8)
        d, s = 1 + 0.1 * gen.standard_normal(252), 1 + 0.1 * gen.standard_normal(252)
        md, vd, ms, vs, _ = estimate_leg_moments(d, s)
        se = 0.1 / math.sqrt(252)
        assert abs(md - 1) < 4 * se and abs(ms - 1) < 4 * se
        assert vd == pytest.approx(np.var(d, ddof=1))

    def test_anti_correlated(self):
        leg = LegParams(1.0, 0.4)
        m = QuotientModel(leg, leg, Independent(0, 0), AntiCorrelated())
        b = sample_pair_batch(m, 252, RngStream(9))
        assert estimate_leg_moments(b.r1, b.r2)[4] < -0.95

    def test_too_few(self):
        with pytest.raises(ValueError):
            estimate_leg_moments(np.ones(10), np.ones(10))

    def test_model_from_moments(self):
        m = model_from_moments((1.0, 0.04, 2.0, 0.09, -0.3), dt=0.25)
        b = sample_pair_batch(m, 10**5, RngStream(10))
        assert np.var(b.r1) == pytest.approx(0.04, rel=0.02)
        assert np.corrcoef(b.r1, b.r2)[0, 1] == pytest.approx(-0.3, abs=0.01)


def _result(q=3.0, scale=0.02):
    return CalibrationResult(q, scale, 1.0, q, 100, 1.0)


class TestDrawdown:
    def test_minus_infinity(self):
        assert drawdown_probability(_result(), GEN_MODEL, -math.inf) == 0.0

    def test_decays_with_threshold(self):
        p = [drawdown_probability(_result(), GEN_MODEL, t) for t in (-0.04, -0.4, -4.0, -40.0)]
        assert p[0] > p[1] > p[2] > p[3] > 0 and p[3] < 1e-6

    def test_symmetry(self):
        for t in (0.01, 0.04, 0.1):
            assert abs(drawdown_probability(_result(), GEN_MODEL, -t) - rise_probability(_result(), GEN_MODEL, t)) < 1e-6

    def test_against_branch_cdf(self):
        # P(G(W) <= y) = F_W(x_left) + F_W(x_right) - F_W(0): G increases on each half-line.
        m = QuotientModel(LegParams(1.0, 0.6), LegParams(0.9, 0.8), Independent(0, 0), Conditional(0.3))
        res = _result(3.0, 0.05)
        y = -0.04 / 0.05
        xr, _, xl, _ = inverse_branches(y, res.price_function)
        F = cdf_from_density(lambda w: quotient_density_values(w, m)[0], [float(xl), 0.0, float(xr)], panels=800)
        assert drawdown_probability(res, m, -0.04) == pytest.approx(F[0] + F[2] - F[1], abs=1e-7)

    def test_against_monte_carlo(self):
        m = model_from_moments((1.0, 0.16, 1.0, 0.16, 0.1))
        res = _result(3.0, 0.02)
        n = 10**7
        b = sample_pair_batch(m, n, RngStream(12))
        rel = res.scale_hat * g_eps(b.r1 / b.r2, res.price_function)
        freq = np.mean(rel <= -0.04)
        assert abs(drawdown_probability(res, m, -0.04) - freq) < 3 * math.sqrt(freq * (1 - freq) / n)

    def test_positive_threshold_rejected(self):
        with pytest.raises(ValueError):
            drawdown_probability(_result(), GEN_MODEL, 0.01)
