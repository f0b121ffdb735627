"""Straight-line sequential reference for the cosine benchmark model.

Deliberately primitive: one replicate at a time, one step at a time,
plain Python floats and math-module functions, no blocking and no shared
state.  Used as the oracle for the vectorized/parallel engine: for the
same (seed, replicate) the engine must reproduce these numbers exactly.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1


def reference_stream(master_seed: int, replicate: int) -> np.random.Generator:
    key = np.array([master_seed & _MASK64, replicate & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def reference_path(
    master_seed: int,
    replicate: int,
    n: int,
    gamma1: float = 1.0,
    theta: float = 1.0 / 3.0 + 1e-3,
):
    """One path of the cosine model; returns (deviation, nu_dict, states).

    nu_dict holds the weighted averages of A phi, cos^2 sin^2 and cos^2;
    states collects X_0 .. X_n.
    """
    gen = reference_stream(master_seed, replicate)
    x = float(gen.standard_normal(1)[0])
    states = [x]
    sums = {"generator": 0.0, "carre": 0.0, "sigma2": 0.0}
    comps = {"generator": 0.0, "carre": 0.0, "sigma2": 0.0}
    gsum = 0.0
    gcomp = 0.0
    for k in range(1, n + 1):
        gam = gamma1 * float(k) ** (-theta)
        u = float(gen.standard_normal(1)[0])
        c = math.cos(x)
        s = math.sin(x)
        values = {
            "generator": (-0.5 * x) * (-s) + 0.5 * ((c * c) * (-c)),
            "carre": (c * s) * (c * s),
            "sigma2": c * c,
        }
        for name, val in values.items():
            w = gam * val
            y = w - comps[name]
            t = sums[name] + y
            comps[name] = (t - sums[name]) - y
            sums[name] = t
        y = gam - gcomp
        t = gsum + y
        gcomp = (t - gsum) - y
        gsum = t
        noise = c * u
        x = x + gam * (-0.5 * x) + math.sqrt(gam) * noise
        if not abs(x) <= 1e12:
            raise RuntimeError(f"reference path diverged at step {k}")
        states.append(x)
    averages = {name: sums[name] / gsum for name in sums}
    deviation = math.sqrt(gsum) * averages["generator"]
    return deviation, averages, states


def reference_deviations(master_seed: int, mc: int, n: int, **kwargs) -> np.ndarray:
    return np.array(
        [reference_path(master_seed, i, n, **kwargs)[0] for i in range(mc)]
    )
