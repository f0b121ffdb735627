"""Euler scheme with decreasing steps and streaming weighted averages.

Two execution paths share the same arithmetic:

* ``step_once``/``run_path`` advance a single path state by state; this is
  the readable reference used for traces and short runs.
* ``simulate_block`` advances a whole block of independent replicates with
  vectorized numpy operations; one Python-level loop over steps remains.

Per-replicate random streams come from counter-based generators keyed by
(replicate index), so results are bit-identical between the two paths and
independent of block or chunk sizes.  Weighted observable sums use
compensated accumulation; trajectories are never stored unless a trace is
requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import DiffusionModel, InnovationLaw, StandardGaussian
from .steps import StepSchedule, kahan_add

__all__ = [
    "DivergenceError",
    "Observable",
    "GaussianInitial",
    "PointInitial",
    "InitialLaw",
    "SchemeState",
    "PathResult",
    "BlockResult",
    "GENERATOR_OBSERVABLE",
    "step_once",
    "run_path",
    "simulate_block",
    "estimate_invariant_average",
]

#: Name under which the generator observable must be registered for the
#: normalized deviation sqrt(Gamma_n) * nu_n(A phi) to be reported.
GENERATOR_OBSERVABLE = "generator"

#: Paths whose state norm exceeds this are aborted as divergent.
DIVERGENCE_LIMIT = 1e12


class DivergenceError(RuntimeError):
    """A path left the finite region; reports where and when."""

    def __init__(self, step: int, replicate: int | None = None):
        self.step = step
        self.replicate = replicate
        where = f" (replicate {replicate})" if replicate is not None else ""
        super().__init__(f"state diverged at step {step}{where}")


@dataclass(frozen=True)
class Observable:
    """Named scalar observable f accumulated along the path as nu_n(f)."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GaussianInitial:
    """Standard normal starting point (the default)."""

    label: str = "gaussian"

    def draw(self, gen: np.random.Generator, d: int) -> np.ndarray:
        return gen.standard_normal(d)


@dataclass(frozen=True)
class PointInitial:
    """Deterministic starting point; consumes no random draws."""

    point: tuple[float, ...]
    label: str = "point"

    def draw(self, gen: np.random.Generator, d: int) -> np.ndarray:
        if len(self.point) != d:
            raise ValueError(f"initial point has length {len(self.point)}, expected {d}")
        return np.asarray(self.point, dtype=np.float64)


InitialLaw = GaussianInitial | PointInitial


@dataclass
class SchemeState:
    """State of one path after k steps, with running weighted sums."""

    k: int
    x: np.ndarray
    gamma_sum: float
    observable_sums: dict[str, float]
    gamma_comp: float = field(default=0.0, compare=False)
    observable_comps: dict[str, float] = field(default_factory=dict, compare=False)


def initial_state(x0: np.ndarray, observables: Sequence[Observable]) -> SchemeState:
    return SchemeState(
        k=0,
        x=np.asarray(x0, dtype=np.float64),
        gamma_sum=0.0,
        observable_sums={o.name: 0.0 for o in observables},
        observable_comps={o.name: 0.0 for o in observables},
    )


def step_once(
    state: SchemeState,
    model: DiffusionModel,
    schedule: StepSchedule,
    observables: Sequence[Observable],
    u: np.ndarray,
) -> SchemeState:
    """Advance one step: accumulate observables at the pre-step state, move.

    The scheme weights f(X_{k}) by gamma_{k+1}, i.e. observables are
    evaluated before the state update.
    """
    k_next = state.k + 1
    gam = schedule.step(k_next)
    sums = dict(state.observable_sums)
    comps = dict(state.observable_comps)
    x = state.x
    for obs in observables:
        val = float(obs.fn(x))
        sums[obs.name], comps[obs.name] = kahan_add(
            sums[obs.name], comps.get(obs.name, 0.0), gam * val
        )
    gamma_sum, gamma_comp = kahan_add(state.gamma_sum, state.gamma_comp, gam)

    noise = np.einsum("dr,r->d", model.sigma(x), np.asarray(u, dtype=np.float64))
    x_next = x + gam * model.b(x) + math.sqrt(gam) * noise
    amax = float(np.max(np.abs(x_next)))
    if not amax <= DIVERGENCE_LIMIT:
        raise DivergenceError(step=k_next)
    return SchemeState(
        k=k_next,
        x=x_next,
        gamma_sum=gamma_sum,
        gamma_comp=gamma_comp,
        observable_sums=sums,
        observable_comps=comps,
    )


@dataclass(frozen=True)
class PathResult:
    """Summary of a single path: empirical averages and final state."""

    n: int
    gamma_sum: float
    final_state: np.ndarray
    averages: dict[str, float]
    deviation: float | None
    trace: list[tuple[int, float, np.ndarray]] | None = None


def run_path(
    model: DiffusionModel,
    schedule: StepSchedule,
    n: int,
    observables: Sequence[Observable],
    stream: np.random.Generator,
    innovation_law: InnovationLaw = StandardGaussian(),
    initial_law: InitialLaw = GaussianInitial(),
    collect_trace: bool = False,
) -> PathResult:
    """Run one path sequentially (scalar reference path).

    Deterministic given the stream: the initial point is drawn first, then
    one innovation per step.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    x0 = initial_law.draw(stream, model.d)
    state = initial_state(x0, observables)
    trace: list[tuple[int, float, np.ndarray]] | None = [] if collect_trace else None
    for _ in range(n):
        u = innovation_law.draw(stream, model.r)
        state = step_once(state, model, schedule, observables, u)
        if trace is not None:
            trace.append((state.k, schedule.step(state.k), state.x.copy()))
    averages = {name: s / state.gamma_sum for name, s in state.observable_sums.items()}
    deviation = None
    if GENERATOR_OBSERVABLE in averages:
        deviation = math.sqrt(state.gamma_sum) * averages[GENERATOR_OBSERVABLE]
    return PathResult(
        n=n,
        gamma_sum=state.gamma_sum,
        final_state=state.x,
        averages=averages,
        deviation=deviation,
        trace=trace,
    )


@dataclass(frozen=True)
class BlockResult:
    """Vectorized result for a block of replicates (arrays over the block)."""

    n: int
    gamma_sum: float
    final_states: np.ndarray  # (m, d)
    averages: dict[str, np.ndarray]  # name -> (m,)

    def deviations(self) -> np.ndarray:
        return math.sqrt(self.gamma_sum) * self.averages[GENERATOR_OBSERVABLE]


def simulate_block(
    model: DiffusionModel,
    schedule: StepSchedule,
    n: int,
    observables: Sequence[Observable],
    streams: Sequence[np.random.Generator],
    innovation_law: InnovationLaw = StandardGaussian(),
    initial_law: InitialLaw = GaussianInitial(),
    step_chunk: int = 1024,
    replicate_offset: int = 0,
) -> BlockResult:
    """Advance a block of independent replicates, one private stream each.

    Innovations are pre-drawn per replicate in chunks of ``step_chunk``
    steps; chunking does not change the drawn values.  Raises
    DivergenceError with the global replicate index on blow-up.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    m = len(streams)
    d, r = model.d, model.r
    x = np.stack([initial_law.draw(g, d) for g in streams]).astype(np.float64)
    sums = {o.name: np.zeros(m) for o in observables}
    comps = {o.name: np.zeros(m) for o in observables}
    gamma_sum = 0.0
    gamma_comp = 0.0
    done = 0
    while done < n:
        chunk = min(step_chunk, n - done)
        u_chunk = np.empty((chunk, m, r))
        for i, g in enumerate(streams):
            u_chunk[:, i, :] = innovation_law.draw(g, (chunk, r))
        for j in range(chunk):
            k = done + j + 1
            gam = schedule.step(k)
            for obs in observables:
                vals = obs.fn(x)
                sums[obs.name], comps[obs.name] = kahan_add(
                    sums[obs.name], comps[obs.name], gam * vals
                )
            gamma_sum, gamma_comp = kahan_add(gamma_sum, gamma_comp, gam)
            noise = np.einsum("mdr,mr->md", model.sigma(x), u_chunk[j])
            x = x + gam * model.b(x) + math.sqrt(gam) * noise
            amax = float(np.max(np.abs(x)))
            if not amax <= DIVERGENCE_LIMIT:
                bad = np.abs(x).max(axis=1)
                local = int(np.argmax(~(bad <= DIVERGENCE_LIMIT)))
                raise DivergenceError(step=k, replicate=replicate_offset + local)
        done += chunk
    averages = {name: s / gamma_sum for name, s in sums.items()}
    return BlockResult(n=n, gamma_sum=gamma_sum, final_states=x, averages=averages)


def estimate_invariant_average(
    model: DiffusionModel,
    schedule: StepSchedule,
    observables: Sequence[Observable],
    n: int,
    num_paths: int,
    seed: int,
    innovation_law: InnovationLaw = StandardGaussian(),
    initial_law: InitialLaw = GaussianInitial(),
    step_chunk: int = 1024,
) -> dict[str, tuple[float, float]]:
    """Mean and standard error of nu_n(f) over independent paths.

    Returns {observable name: (mean, standard error)}.
    """
    from .montecarlo import RngPolicy  # local import to avoid a cycle

    if num_paths < 1:
        raise ValueError("num_paths must be >= 1")
    policy = RngPolicy(master_seed=seed)
    streams = [policy.stream(i) for i in range(num_paths)]
    block = simulate_block(
        model,
        schedule,
        n,
        observables,
        streams,
        innovation_law=innovation_law,
        initial_law=initial_law,
        step_chunk=step_chunk,
    )
    out: dict[str, tuple[float, float]] = {}
    for name, vals in block.averages.items():
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else 0.0
        out[name] = (mean, se)
    return out
