"""Generate observations with a known q, fit it back, and compare the implied tail and drawdown risk.

Usage: python scripts/calibration_closure.py [--q 3] [--n-obs 500] [--n-mc 10000000] [--seed 1]
"""

import argparse
import math

import numpy as np

from sdtails.calibration import (
    Observation,
    bootstrap_q_se,
    drawdown_probability,
    estimate_leg_moments,
    fit_price_function,
    model_from_moments,
)
from sdtails.core_model import Conditional, Independent, LegParams, PriceFunction, QuotientModel
from sdtails.sampler import RngStream, sample_pair_batch
from sdtails.tail_estimation import hill_estimator
from sdtails.transforms import g_eps

LEG = LegParams(1.0, 2.0, 0.1, 0.5)
MODEL = QuotientModel(LEG, LEG, Independent(0.5, 0.5), Conditional(0.4))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--q", type=float, default=3.0)
    ap.add_argument("--epsilon", type=float, default=1e-3)
    ap.add_argument("--scale", type=float, default=0.02)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--n-obs", type=int, default=500)
    ap.add_argument("--n-mc", type=int, default=10**7)
    ap.add_argument("--threshold", type=float, default=-0.04)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    b = sample_pair_batch(MODEL, args.n_mc, RngStream(args.seed, 0))
    keep = (b.r1 > 0) & (b.r2 > 0)
    d, s = b.r1[keep], b.r2[keep]
    noise = np.exp(args.noise * RngStream(args.seed, 1).generator(0).standard_normal(d.size))
    rel = args.scale * g_eps(d / s, PriceFunction(args.q, args.epsilon)) * noise

    n = args.n_obs
    obs = [Observation(float(x), float(y), float(r)) for x, y, r in zip(d[:n], s[:n], rel[:n])]
    res = fit_price_function(obs, epsilon=args.epsilon)
    se = bootstrap_q_se(obs, 200, args.seed, args.epsilon)
    print(f"q_hat = {res.q_hat:.4f} +- {se:.4f} (true {args.q:g}), scale_hat = {res.scale_hat:.5f}, r2 = {res.r2:.3f}")
    hill = hill_estimator(rel)
    print(f"predicted zeta = {res.predicted_zeta:.3f}, Hill on {rel.size} changes = {hill.zeta_hat:.3f} +- {hill.std_err:.3f}")

    fitted = model_from_moments(estimate_leg_moments(d[:n], s[:n]))
    p = drawdown_probability(res, fitted, args.threshold)
    mc = sample_pair_batch(fitted, args.n_mc, RngStream(args.seed, 2))
    freq = float(np.mean(res.scale_hat * g_eps(mc.r1 / mc.r2, res.price_function) <= args.threshold))
    z = (p - freq) / math.sqrt(freq * (1 - freq) / args.n_mc)
    print(f"P(change <= {args.threshold:g}): model {p:.6f}, Monte Carlo {freq:.6f} ({z:+.2f} SE)")
    print(f"empirical frequency in the generated data: {np.mean(rel <= args.threshold):.6f}")


if __name__ == "__main__":
    main()
