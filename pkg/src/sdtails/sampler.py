"""Monte Carlo draws of the demand/supply pair and the derived quotients.

Draws are generated in fixed-size chunks.  Chunk ``i`` of stream ``s`` under
seed ``seed`` always uses the generator seeded by ``(seed, s, i)``, so a
batch is identical whatever the number of worker threads.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_model import (
    AntiCorrelated,
    Bivariate,
    Independent,
    PriceFunction,
    QuotientModel,
    conditional_moments,
    model_digest,
)
from .transforms import g_eps

log = logging.getLogger(__name__)

CHUNK = 1 << 18


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and 0 <= v < 2**64):
                raise ValueError(f"{name} must be an unsigned 64-bit integer")

    def generator(self, chunk: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id), int(chunk)))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class SampleBatch:
    r1: np.ndarray
    r2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    seed: int
    model_digest: str
    stream_id: int = 0
    zero_denominators: int = field(init=False)

    def __post_init__(self) -> None:
        n = len(self.r1)
        if n == 0:
            raise ValueError("batch must be non-empty")
        if not (len(self.r2) == len(self.k1) == len(self.k2) == n):
            raise ValueError("batch columns must have equal length")
        object.__setattr__(self, "zero_denominators", int(np.count_nonzero(self.r2 == 0)))

    def __len__(self) -> int:
        return len(self.r1)


def _counts(model: QuotientModel, size: int, gen: np.random.Generator):
    dt = model.dt
    jumps = model.jumps
    if isinstance(model.corr, AntiCorrelated):
        k = gen.poisson(jumps.lambda1 * dt, size)
        return k, k
    if isinstance(jumps, Independent):
        return gen.poisson(jumps.lambda1 * dt, size), gen.poisson(jumps.lambda2 * dt, size)
    assert isinstance(jumps, Bivariate)
    n01 = gen.poisson(jumps.lambda01 * dt, size)
    n02 = gen.poisson(jumps.lambda02 * dt, size)
    n12 = gen.poisson(jumps.lambda12 * dt, size)
    return n01 + n12, n02 + n12


def _draw_chunk(model: QuotientModel, size: int, gen: np.random.Generator):
    k1, k2 = _counts(model, size, gen)
    z = gen.standard_normal((2, size))
    if isinstance(model.corr, AntiCorrelated):
        leg = model.demand
        brownian = 0.5 * leg.sigma0 * math.sqrt(model.dt) * z[0]
        # Sum of k i.i.d. N(mu, delta^2) jumps.
        jumps = k1 * leg.jump_mu + np.sqrt(k1) * leg.jump_sigma * z[1]
        noise = brownian + jumps
        return model.demand.mu0 + noise, model.supply.mu0 - noise, k1, k2
    rho = model.rho
    mu1, mu2, s1, s2 = conditional_moments(model, k1, k2)
    r1 = mu1 + s1 * z[0]
    r2 = mu2 + s2 * (rho * z[0] + math.sqrt(1.0 - rho * rho) * z[1])
    return r1, r2, k1, k2


def sample_pair_batch(model: QuotientModel, n: int, rng: RngStream, threads: int = 1) -> SampleBatch:
    if n < 1:
        raise ValueError("n must be >= 1")
    sizes = [min(CHUNK, n - start) for start in range(0, n, CHUNK)]

    def work(i: int):
        return _draw_chunk(model, sizes[i], rng.generator(i))

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    r1, r2, k1, k2 = (np.concatenate(col) for col in zip(*parts))
    return SampleBatch(r1, r2, k1, k2, seed=int(rng.seed), model_digest=model_digest(model), stream_id=int(rng.stream_id))


def sample_quotient(batch: SampleBatch, model: QuotientModel, condition_positive: bool = False) -> np.ndarray:
    """``d_over_s * r1 / r2``; zero denominators are dropped (see ``batch.zero_denominators``)."""
    keep = batch.r2 != 0
    if condition_positive:
        keep &= (batch.r1 > 0) & (batch.r2 > 0)
    return model.d_over_s * batch.r1[keep] / batch.r2[keep]


def sample_rc(
    batch: SampleBatch, model: QuotientModel, pf: PriceFunction, condition_positive: bool = False
) -> np.ndarray:
    w = sample_quotient(batch, model, condition_positive)
    zero = w == 0
    if np.any(zero):
        log.warning("dropping %d draws with zero numerator", int(zero.sum()))
        w = w[~zero]
    return g_eps(w, pf)


def write_batch(batch: SampleBatch, path: str | Path, discarded: int | None = None) -> Path:
    """Write ``r1,r2,k1,k2`` CSV and a ``.meta.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    cols = np.column_stack([batch.r1, batch.r2, batch.k1.astype(float), batch.k2.astype(float)])
    with path.open("w", newline="\n") as fh:
        np.savetxt(fh, cols, fmt=["%.17g", "%.17g", "%d", "%d"], delimiter=",", header="r1,r2,k1,k2", comments="")
    meta = {
        "seed": batch.seed,
        "stream_id": batch.stream_id,
        "model_digest": batch.model_digest,
        "n": len(batch),
        "zero_denominators": batch.zero_denominators if discarded is None else discarded,
    }
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return sidecar
