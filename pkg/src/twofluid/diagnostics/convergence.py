"""Step-halving convergence measurements for the time integrator."""
from __future__ import annotations

import math

import numpy as np

from ..integrator import integrate, step
from ..model import SymState


def _final(W0: SymState, T: float, h: float, **flags) -> np.ndarray:
    rec = integrate(W0, T, dt=h, stop_on_trip=False, **flags)
    if rec.status != "completed":
        raise RuntimeError(f"run at h={h} ended early: {rec.message}")
    return rec.snapshots[-1][1].to_array()


def global_order(W0: SymState, T: float, h: float, **flags) -> tuple[float, list[float]]:
    """Richardson order from runs at ``h``, ``h/2``, ``h/4`` to time ``T``."""
    sols = [_final(W0, T, h / 2**i, **flags) for i in range(3)]
    errs = [float(np.max(np.abs(sols[i] - sols[i + 1]))) for i in range(2)]
    return math.log2(errs[0] / errs[1]), errs


def local_order(W0: SymState, h: float, **flags) -> tuple[float, list[float]]:
    """Order of the one-step defect ``step(h) - step(h/2)^2`` between ``h`` and ``h/2``."""
    errs = []
    for hh in (h, h / 2):
        one = step(W0, hh, **flags).to_array()
        two = step(step(W0, hh / 2, **flags), hh / 2, **flags).to_array()
        errs.append(float(np.max(np.abs(one - two))))
    return math.log2(errs[0] / errs[1]), errs


def gauss_growth_order(W0: SymState, T: float, h: float) -> tuple[float, list[float]]:
    """Order of the per-step growth of the Gauss residual between steps ``h`` and ``h/2``.

    A per-unit-time growth of order ``h^4`` gives a per-step order of 5.
    """
    growth = []
    for hh in (h, h / 2):
        rec = integrate(W0, T, dt=hh, stop_on_trip=False)
        if rec.status != "completed":
            raise RuntimeError(f"run at h={hh} ended early: {rec.message}")
        start = rec.series[0]["gauss_residual"]
        growth.append((rec.monitor.max_gauss - start) / (len(rec.series) - 1))
    return math.log2(growth[0] / growth[1]), growth
