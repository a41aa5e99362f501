"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the report lines are printed
even when output capture is on.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.stats import kurtosis, poisson

from sdtails.calibration import (
    Observation,
    drawdown_probability,
    estimate_leg_moments,
    fit_price_function,
    model_from_moments,
)
from sdtails.cli import run
from sdtails.core_model import (
    AntiCorrelated,
    Bivariate,
    Conditional,
    Independent,
    LegParams,
    PriceFunction,
    QuotientModel,
    bivariate_pmf_table,
    jump_correlation,
    poisson_pmf,
)
from sdtails.correlation import JumpLevelCorrelation, total_correlation
from sdtails.density_exact import (
    AntiCorrParams,
    anticorr_quotient_density,
    full_mixture_cdf,
    full_mixture_density,
    small_dt_series,
    small_dt_bounds,
)
from sdtails.density_series import quotient_density, quotient_density_asymptotic
from sdtails.pricepath import PathConfig, gbm_baseline
from sdtails.sampler import RngStream, sample_pair_batch, sample_quotient, sample_rc
from sdtails.tail_estimation import hill_estimator, loglog_density_fit
from sdtails.transforms import g_eps

from test_density_exact import integrate_line, sandwich_grid
from test_density_series import cauchy, cdf_oracle

pytestmark = pytest.mark.slow

N_MC = 10**7
LEG = LegParams(1.0, 2.0, 0.1, 0.5)
SWEEP_MODELS = {
    "independent": QuotientModel(LEG, LEG, Independent(0.5, 0.5), Conditional(0.4)),
    "bivariate": QuotientModel(LEG, LEG, Bivariate(0.3, 0.3, 0.2), Conditional(0.3)),
    "anticorrelated": QuotientModel(LEG, LegParams(1.0, 2.0, -0.1, 0.5), Independent(0.5, 0.5), AntiCorrelated()),
}
QS = (1.0, 2.0, 3.0)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def sweep():
    """Hill fits keyed by (model, q, conditioned), plus per-model sampling time."""
    fits, seconds = {}, {}
    for i, (name, model) in enumerate(SWEEP_MODELS.items()):
        t0 = time.perf_counter()
        batch = sample_pair_batch(model, N_MC, RngStream(2024, i))
        for q in QS:
            pf = PriceFunction(q, 1e-3)
            for cond in (False, True):
                fits[name, q, cond] = hill_estimator(sample_rc(batch, model, pf, cond))
        seconds[name] = time.perf_counter() - t0
    return fits, seconds


def test_criterion_01_zeta_equals_q(sweep, capsys):
    fits, seconds = sweep
    worst = max(abs(fits[name, q, False].zeta_hat - q) for name in SWEEP_MODELS for q in QS)
    rows = ", ".join(f"{n}/q={q:g}: {fits[n, q, False].zeta_hat:.3f}" for n in SWEEP_MODELS for q in QS)
    slowest = max(seconds.values())
    ok = worst <= 0.15 and slowest < 120
    report(capsys, 1, ok, f"max |zeta_hat - q| = {worst:.3f} (tol 0.15); slowest model {slowest:.1f}s; {rows}")


def test_criterion_02_conditioning_invariance(sweep, capsys):
    fits, _ = sweep
    worst = 0.0
    for name in SWEEP_MODELS:
        for q in QS:
            a, b = fits[name, q, False], fits[name, q, True]
            worst = max(worst, abs(a.zeta_hat - b.zeta_hat) / math.hypot(a.std_err, b.std_err))
    report(capsys, 2, worst < 2, f"max |diff| / combined SE = {worst:.2f} (tol 2)")


def test_criterion_03_quotient_density(capsys):
    leg = LegParams(0.0, 2.0)
    cm = QuotientModel(leg, leg, Independent(0.0, 0.0), Conditional(0.0))
    w = np.array([0.0, 0.5, 1.0, 3.0])
    cauchy_err = float(np.max(np.abs(quotient_density(w, cm).value - cauchy(w))))
    gm = SWEEP_MODELS["independent"]
    delta = 1e-3
    oracle_err = 0.0
    for x in (-1.0, 0.3, 1.0, 2.5):
        oracle = (cdf_oracle(x + delta, gm) - cdf_oracle(x - delta, gm)) / (2 * delta)
        oracle_err = max(oracle_err, abs(quotient_density(x, gm).value - oracle))
    ok = cauchy_err < 1e-7 and oracle_err < 1e-4
    report(capsys, 3, ok, f"Cauchy max error {cauchy_err:.2e} (tol 1e-7); CDF-difference oracle max error {oracle_err:.2e} (tol 1e-4)")


def test_criterion_04_asymptotic_law(capsys):
    leg = LegParams(1.0, 2.0)
    m = QuotientModel(leg, leg, Independent(0.0, 0.0), Conditional(0.3))
    w = np.geomspace(1e2, 1e4, 25)
    ratio = quotient_density(w, m).value / quotient_density_asymptotic(w, m).value
    spread = ratio.max() / ratio.min() - 1
    fit = loglog_density_fit(lambda y: quotient_density(y, m).value, 1e2, 1e4)
    slope = -(fit.zeta_hat + 1)
    ok = spread < 0.05 and abs(slope + 2) <= 0.05
    report(capsys, 4, ok, f"ratio spread {spread:.3%} (tol 5%), mean ratio {ratio.mean():.4f}; slope {slope:.4f} (target -2 +- 0.05)")


def test_criterion_05_exact_density(capsys):
    p = AntiCorrParams.from_model(SWEEP_MODELS["anticorrelated"])
    mass = integrate_line(lambda x: full_mixture_density(x, p), -1.0)
    m = SWEEP_MODELS["anticorrelated"]
    w = np.sort(sample_quotient(sample_pair_batch(m, 10**6, RngStream(55)), m))
    F = full_mixture_cdf(w, p)
    n = w.size
    ks = float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))
    sym = abs(anticorr_quotient_density(1.0, 1.0, 0.5, 1.0, 0.5) - 1 / math.sqrt(2 * math.pi))
    ok = abs(mass - 1) < 1e-5 and ks < 0.005 and sym <= 1e-12
    report(capsys, 5, ok, f"mass error {abs(mass - 1):.2e} (tol 1e-5); KS {ks:.4f} at 1e6 draws (tol 0.005); symmetric point error {sym:.1e} (tol 1e-12)")


def test_criterion_06_sandwich(capsys):
    worst, n = math.inf, 0
    for p in sandwich_grid():
        for x in (50.0, 100.0, 500.0):
            lo, hi = small_dt_bounds(x, p)
            s = small_dt_series(x, p)
            worst = min(worst, (s - lo) / s, (hi - s) / s)
            n += 1
    report(capsys, 6, worst >= 0, f"{n} points checked; smallest relative margin to a bound {worst:.3e} (must be >= 0)")


def test_criterion_07_total_correlation(capsys):
    legs = (LegParams(1.0, 2.0, 0.0, 0.5), LegParams(0.5, 1.2, 0.0, 1.1))
    mc_err = 0.0
    for i, (jumps, rho) in enumerate([(Independent(0.5, 0.5), 0.4), (Bivariate(0.1, 0.5, 1.0), -0.7)]):
        m = QuotientModel(*legs, jumps, Conditional(rho))
        b = sample_pair_batch(m, N_MC, RngStream(77, i))
        mc_err = max(mc_err, abs(np.corrcoef(b.r1, b.r2)[0, 1] - total_correlation(m)))
    sym = LegParams(0.0, 2.0, 0.0, 1.0)
    limit = total_correlation(QuotientModel(sym, sym, Bivariate(1e-8, 1e-8, 1.0), Conditional(0.5)))
    gap = 1 - total_correlation(QuotientModel(sym, sym, Independent(1.0, 1.0), Conditional(0.0)), JumpLevelCorrelation.constant(1.0))
    ok = mc_err < 0.01 and abs(limit - 0.5) < 1e-3 and gap > 1e-3
    report(capsys, 7, ok, f"MC error {mc_err:.4f} (tol 0.01); common-jump limit {limit:.6f} (target 0.5 +- 1e-3); gap {gap:.4f} (must be > 1e-3)")


def test_criterion_08_bivariate_poisson(capsys):
    mass_err, marg_err = 0.0, 0.0
    for a, b, c in [(0.5, 0.3, 0.2), (2.0, 1.0, 3.0), (0.0, 4.0, 0.7), (5.0, 5.0, 5.0)]:
        jm = Bivariate(a, b, c)
        k = max(int(poisson.isf(1e-13, x)) for x in jm.marginal_rates) + 1
        mass_err = max(mass_err, abs(bivariate_pmf_table(jm, k).sum() - 1))
        table = bivariate_pmf_table(jm, 30, 150)
        marg_err = max(marg_err, float(np.max(np.abs(table.sum(axis=1) - poisson_pmf(np.arange(31), a + c)))))
    jm = Bivariate(0.5, 0.3, 0.2)
    m = QuotientModel(LegParams(1, 1), LegParams(1, 1), jm, Conditional(0.0))
    bt = sample_pair_batch(m, N_MC, RngStream(88))
    corr_err = abs(np.corrcoef(bt.k1, bt.k2)[0, 1] - jump_correlation(jm))
    ok = mass_err < 1e-9 and marg_err < 1e-12 and corr_err < 0.01
    report(capsys, 8, ok, f"mass error {mass_err:.1e} (tol 1e-9); marginal error {marg_err:.1e} (tol 1e-12); jump correlation error {corr_err:.4f} (tol 0.01)")


def test_criterion_09_calibration_closure(capsys):
    q_true, scale, eps = 3.0, 0.02, 1e-3
    pf = PriceFunction(q_true, eps)
    model = SWEEP_MODELS["independent"]
    b = sample_pair_batch(model, N_MC, RngStream(99))
    ok_legs = (b.r1 > 0) & (b.r2 > 0)
    d, s = b.r1[ok_legs], b.r2[ok_legs]
    noise = np.exp(0.05 * np.random.default_rng(99).standard_normal(d.size))
    rel = scale * g_eps(d / s, pf) * noise
    n_obs = 500
    obs = [Observation(float(x), float(y), float(r)) for x, y, r in zip(d[:n_obs], s[:n_obs], rel[:n_obs])]
    res = fit_price_function(obs, epsilon=eps)
    measured = hill_estimator(rel)
    fitted = model_from_moments(estimate_leg_moments(d[:n_obs], s[:n_obs]))
    threshold = -0.04
    p_model = drawdown_probability(res, fitted, threshold)
    mc = sample_pair_batch(fitted, N_MC, RngStream(100))
    freq = float(np.mean(res.scale_hat * g_eps(mc.r1 / mc.r2, res.price_function) <= threshold))
    se = math.sqrt(freq * (1 - freq) / N_MC)
    ok = abs(res.q_hat - q_true) < 0.1 and abs(res.predicted_zeta - measured.zeta_hat) < 0.15 and abs(p_model - freq) < 3 * se
    report(
        capsys,
        9,
        ok,
        f"q_hat {res.q_hat:.4f} (3 +- 0.1); predicted zeta {res.predicted_zeta:.3f} vs Hill {measured.zeta_hat:.3f} (tol 0.15); "
        f"drawdown {p_model:.6f} vs MC {freq:.6f}, {abs(p_model - freq) / se:.2f} SE (tol 3)",
    )


def test_criterion_10_gbm_contrast(capsys):
    n = 10**6
    gbm = gbm_baseline(1.0, 0.0, 0.01, 1.0, n, RngStream(101)).relative_changes
    model = SWEEP_MODELS["independent"]
    rc = sample_rc(sample_pair_batch(model, n, RngStream(103)), model, PriceFunction(3.0, 1e-3))
    z_gbm, z_rc = hill_estimator(gbm).zeta_hat, hill_estimator(rc).zeta_hat
    k_gbm = float(kurtosis(gbm))
    ok = z_gbm > 8 and abs(k_gbm) < 0.05 and abs(z_rc - 3) <= 0.15
    report(capsys, 10, ok, f"n = {n} each: GBM Hill {z_gbm:.2f} (Gaussian: > 8), excess kurtosis {k_gbm:.3f}; q = 3 model Hill {z_rc:.3f}")


def test_criterion_11_determinism(tmp_path, capsys):
    model = SWEEP_MODELS["bivariate"]
    a = sample_pair_batch(model, 10**6, RngStream(7), threads=1)
    b = sample_pair_batch(model, 10**6, RngStream(7), threads=4)
    same_batch = all(
        np.asarray(getattr(a, f)).tobytes() == np.asarray(getattr(b, f)).tobytes() for f in ("r1", "r2", "k1", "k2")
    )
    pf = PriceFunction(3.0, 1e-3)
    same_fit = hill_estimator(sample_rc(a, model, pf)) == hill_estimator(sample_rc(b, model, pf))
    outs = []
    for i, threads in enumerate((1, 1, 3)):
        out = tmp_path / f"s{i}.csv"
        assert run(["simulate", "--n", "20000", "--seed", "7", "--threads", str(threads), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    cfg = tmp_path / "p.json"
    cfg.write_text(json.dumps(PathConfig(1.0, 200, model=model).to_dict()))
    paths = []
    for i, threads in enumerate((1, 4)):
        out = tmp_path / f"p{i}.csv"
        assert run(["path", "--config", str(cfg), "--seed", "3", "--paths", "6", "--threads", str(threads), "--out", str(out)]) == 0
        paths.append(out.read_bytes())
    ok = same_batch and same_fit and outs[0] == outs[1] == outs[2] and paths[0] == paths[1]
    report(capsys, 11, ok, f"batch threads 1 vs 4 identical: {same_batch}; Hill identical: {same_fit}; CLI simulate/path byte-identical: {outs[0] == outs[1] == outs[2] and paths[0] == paths[1]}")
