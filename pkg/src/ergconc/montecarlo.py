"""Parallel Monte Carlo estimation of the deviation-probability curve.

Replicate i always draws from a counter-based stream keyed by
(master_seed, i), so the estimated curve is a pure function of the
configuration: worker counts, block sizes and scheduling cannot change a
single bit of the output.  Blocks of replicates are simulated vectorized
and merged in replicate order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .model import DiffusionModel, InnovationLaw, StandardGaussian, TestFunctionPack
from .model import GeneratorObservable
from .simulate import (
    GENERATOR_OBSERVABLE,
    GaussianInitial,
    InitialLaw,
    Observable,
    simulate_block,
)
from .steps import StepSchedule

__all__ = [
    "RngPolicy",
    "DeviationRow",
    "DeviationCurve",
    "sample_deviations",
    "deviation_curve",
    "sample_variance",
    "clopper_pearson",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngPolicy:
    """Replicate i uses a Philox stream keyed by (master_seed, i).

    Philox is counter-based: distinct keys give statistically independent
    streams, and a replicate's draws never depend on any other replicate.
    """

    master_seed: int

    def stream(self, replicate: int) -> np.random.Generator:
        key = np.array(
            [self.master_seed & _MASK64, replicate & _MASK64], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class DeviationRow:
    """Monte Carlo estimate of P[|deviation| >= a] at one grid point.

    g_n is ln(p_hat), or None when there were no exceedances (the tail is
    beyond Monte Carlo resolution, which is different from "very negative").
    """

    a: float
    exceed_count: int
    mc: int
    p_hat: float
    ci_low: float
    ci_high: float
    g_n: float | None


@dataclass(frozen=True)
class DeviationCurve:
    rows: tuple[DeviationRow, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def experiment_id(self) -> str:
        import hashlib
        import json

        blob = json.dumps(self.metadata, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _deviation_block(args) -> tuple[int, np.ndarray]:
    (
        model,
        pack,
        schedule,
        n,
        master_seed,
        lo,
        hi,
        innovation_law,
        initial_law,
        step_chunk,
    ) = args
    policy = RngPolicy(master_seed=master_seed)
    streams = [policy.stream(i) for i in range(lo, hi)]
    observables = [Observable(GENERATOR_OBSERVABLE, GeneratorObservable(model, pack))]
    block = simulate_block(
        model,
        schedule,
        n,
        observables,
        streams,
        innovation_law=innovation_law,
        initial_law=initial_law,
        step_chunk=step_chunk,
        replicate_offset=lo,
    )
    return lo, block.deviations()


def resolve_threads(threads: int) -> int:
    if threads < 0:
        raise ValueError("threads must be >= 0")
    if threads == 0:
        env = os.environ.get("ERGCONC_THREADS", "")
        if env.strip():
            threads = int(env)
        if threads == 0:
            threads = os.cpu_count() or 1
    return threads


def sample_deviations(
    model: DiffusionModel,
    pack: TestFunctionPack,
    schedule: StepSchedule,
    n: int,
    mc: int,
    policy: RngPolicy,
    innovation_law: InnovationLaw = StandardGaussian(),
    initial_law: InitialLaw = GaussianInitial(),
    threads: int = 1,
    replicate_block: int = 1024,
    step_chunk: int = 1024,
) -> np.ndarray:
    """One normalized deviation sqrt(Gamma_n) nu_n(A phi) per replicate.

    Blocks are fixed by (mc, replicate_block) alone; ``threads`` only
    decides how many worker processes chew through them, so the result is
    invariant under the worker count.  threads=0 means auto (env
    ERGCONC_THREADS, then CPU count).
    """
    if mc < 1:
        raise ValueError("mc must be >= 1")
    if replicate_block < 1:
        raise ValueError("replicate_block must be >= 1")
    threads = resolve_threads(threads)
    blocks = [(lo, min(lo + replicate_block, mc)) for lo in range(0, mc, replicate_block)]
    tasks = [
        (
            model,
            pack,
            schedule,
            n,
            policy.master_seed,
            lo,
            hi,
            innovation_law,
            initial_law,
            step_chunk,
        )
        for lo, hi in blocks
    ]
    out = np.empty(mc)
    if threads <= 1 or len(blocks) == 1:
        results = map(_deviation_block, tasks)
    else:
        executor = ProcessPoolExecutor(max_workers=min(threads, len(blocks)))
        try:
            results = list(executor.map(_deviation_block, tasks))
        finally:
            executor.shutdown()
    for lo, devs in results:
        out[lo : lo + devs.shape[0]] = devs
    return out


def clopper_pearson(count: int, total: int, level: float = 0.95) -> tuple[float, float]:
    """Exact (conservative) two-sided binomial confidence interval."""
    if not 0 <= count <= total:
        raise ValueError("count must lie in [0, total]")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    alpha = 1.0 - level
    low = 0.0 if count == 0 else float(stats.beta.ppf(alpha / 2.0, count, total - count + 1))
    high = (
        1.0 if count == total else float(stats.beta.ppf(1.0 - alpha / 2.0, count + 1, total - count))
    )
    return low, high


def deviation_curve(
    samples: np.ndarray,
    a_grid: np.ndarray,
    level: float = 0.95,
    metadata: dict | None = None,
) -> DeviationCurve:
    """Count exceedances of |sample| >= a along an ascending threshold grid."""
    samples = np.asarray(samples, dtype=np.float64)
    a_grid = np.asarray(a_grid, dtype=np.float64)
    if a_grid.size == 0:
        raise ValueError("a_grid must be non-empty")
    if np.any(a_grid < 0.0):
        raise ValueError("thresholds must be non-negative")
    if np.any(np.diff(a_grid) <= 0.0):
        raise ValueError("a_grid must be strictly ascending")
    mc = samples.shape[0]
    abs_dev = np.abs(samples)
    rows = []
    for a in a_grid:
        count = int(np.count_nonzero(abs_dev >= a))
        p_hat = count / mc
        ci_low, ci_high = clopper_pearson(count, mc, level)
        g_n = math.log(p_hat) if count > 0 else None
        rows.append(
            DeviationRow(
                a=float(a),
                exceed_count=count,
                mc=mc,
                p_hat=p_hat,
                ci_low=ci_low,
                ci_high=ci_high,
                g_n=g_n,
            )
        )
    return DeviationCurve(rows=tuple(rows), metadata=metadata or {})


def sample_variance(samples: np.ndarray) -> float:
    """Unbiased sample variance of the deviations."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    return float(samples.var(ddof=1))
