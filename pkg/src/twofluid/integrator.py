"""Classical RK4 time stepping of the symmetrized system plus run monitors.

The integrator runs on the symmetric clock ``t_sym``; the physical clock is
``t_phys = t_sym / sqrt(gamma)``. The blow-up functional
``int ||(grad n+-, grad u+-, grad E, grad B)||_inf dt`` is accumulated in
physical time from the physical-variable view of each step.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    Layout,
    PhysParams,
    SymState,
    VacuumError,
    constraint_residuals,
    from_symmetric,
    make_initial_data,
    mean_densities,
    rhs_array,
)
from .spectral_field import GridSpec, jacobian, lp_norm

log = logging.getLogger(__name__)


class BlowupSuspected(RuntimeError):
    """Step produced an inadmissible state."""


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    params: PhysParams
    t_end: float
    cfl: float = 0.5
    snapshot_every: int = 1
    amplitude: float = 1e-3
    seed: int = 0
    band: tuple[int, int] = (0, 1)
    blowup_threshold: float = 10.0

    def __post_init__(self) -> None:
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")


def step(W: SymState, h: float, **flags) -> SymState:
    """One classical RK4 step of size ``h`` (negative ``h`` steps backward)."""
    grid, params = W.grid, W.params
    f = lambda w: rhs_array(w, grid, params, **flags)  # noqa: E731
    try:
        w0 = W.to_array()
        k1 = f(w0)
        k2 = f(w0 + 0.5 * h * k1)
        k3 = f(w0 + 0.5 * h * k2)
        k4 = f(w0 + h * k3)
        w1 = w0 + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        return SymState.from_array(grid, params, w1)
    except VacuumError as err:
        raise BlowupSuspected(str(err)) from err


def max_speed(W: SymState) -> float:
    """Largest characteristic speed: fluid ``|v| + sound`` or Maxwell ``1/sqrt(gamma)``."""
    a = W.params.a
    fluid = 0.0
    for rho, v in ((W.rho_plus, W.v_plus), (W.rho_minus, W.v_minus)):
        fluid = max(fluid, float(np.max(v.magnitude())) + a * float(np.max(rho.values)) + 1.0)
    return max(fluid, W.params.c)


def choose_dt(W: SymState, cfl: float) -> float:
    w = W.to_array()
    if not np.all(np.isfinite(w)):
        raise ValueError("state contains non-finite values")
    return cfl * W.grid.dx / max_speed(W)


def gradient_sup(W: SymState) -> float:
    """``||(grad n+-, grad u+-, grad E, grad B)||_inf`` of the physical view."""
    phys = from_symmetric(W)
    fields = (phys.n_plus, phys.n_minus, phys.u_plus, phys.u_minus, phys.E, phys.B)
    return float(sum(lp_norm(jacobian(f), math.inf) for f in fields))


@dataclass(frozen=True)
class MonitorState:
    blowup_integral: float = 0.0
    max_gauss: float = 0.0
    max_divb: float = 0.0
    tripped: bool = False
    last_gradient: float = 0.0
    threshold: float = 10.0
    reason: str = ""

    @classmethod
    def start(cls, W: SymState, threshold: float = 10.0) -> MonitorState:
        gauss, divb = constraint_residuals(W)
        return cls(0.0, gauss, divb, False, gradient_sup(W), threshold)


def update_monitors(monitor: MonitorState, W: SymState, h: float) -> MonitorState:
    """Trapezoidal update of the blow-up functional after a step of size ``h``."""
    grad = gradient_sup(W)
    h_phys = abs(h) / math.sqrt(W.params.gamma)
    integral = monitor.blowup_integral + 0.5 * h_phys * (monitor.last_gradient + grad)
    gauss, divb = constraint_residuals(W)
    reason = monitor.reason
    if not monitor.tripped:
        if integral > monitor.threshold:
            reason = "blow-up functional exceeded threshold"
        elif grad * abs(h) > 1.0:
            reason = "gradients exceed resolvable scale"
    return replace(
        monitor,
        blowup_integral=integral,
        max_gauss=max(monitor.max_gauss, gauss),
        max_divb=max(monitor.max_divb, divb),
        tripped=monitor.tripped or bool(reason),
        last_gradient=grad,
        reason=reason,
    )


SERIES_COLUMNS = ("step", "t_sym", "t_phys", "dt", "gauss_residual", "div_b",
                  "blowup_integral", "grad_sup", "mean_n_plus", "mean_n_minus")


@dataclass
class RunRecord:
    """Everything a run produced: snapshots, per-step series, final monitor."""

    config: RunConfig
    snapshots: list = field(default_factory=list)
    series: list = field(default_factory=list)
    monitor: MonitorState | None = None
    status: str = "running"
    message: str = ""

    @property
    def params(self) -> PhysParams:
        return self.config.params

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    def truncated(self, t_max: float) -> RunRecord:
        """Copy restricted to snapshots with ``t <= t_max``."""
        out = replace(self)
        out.snapshots = [(t, W) for t, W in self.snapshots if t <= t_max * (1 + 1e-12)]
        out.series = [r for r in self.series if r["t_sym"] <= t_max * (1 + 1e-12)]
        return out

    def write_csv(self, path, extra: dict | None = None) -> None:
        """Per-step series; ``extra`` maps column name to a per-row value list."""
        extra = extra or {}
        columns = list(SERIES_COLUMNS) + list(extra)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for i, row in enumerate(self.series):
                vals = [row[c] for c in SERIES_COLUMNS] + [extra[c][i] for c in extra]
                writer.writerow([repr(v) if isinstance(v, float) else v for v in vals])


def _row(n: int, t: float, h: float, W: SymState, monitor: MonitorState) -> dict:
    gauss, divb = constraint_residuals(W)
    mp, mm = mean_densities(W)
    return {
        "step": n, "t_sym": t, "t_phys": t / math.sqrt(W.params.gamma), "dt": h,
        "gauss_residual": gauss, "div_b": divb, "blowup_integral": monitor.blowup_integral,
        "grad_sup": monitor.last_gradient, "mean_n_plus": mp, "mean_n_minus": mm,
    }


def integrate(
    W: SymState,
    t_end: float,
    cfl: float = 0.5,
    *,
    config: RunConfig | None = None,
    snapshot_every: int = 1,
    blowup_threshold: float = 10.0,
    dt: float | None = None,
    stop_on_trip: bool = True,
    **flags,
) -> RunRecord:
    """Advance ``W`` to ``t_end``; ``dt`` fixes the step, otherwise CFL-controlled.

    The run ends early when the monitor trips (status ``"tripped"``) or a step
    leaves the admissible set (status ``"blowup_suspected"``).
    """
    if config is None:
        config = RunConfig(W.grid, W.params, t_end, cfl, snapshot_every,
                           amplitude=float("nan"), blowup_threshold=blowup_threshold)
    record = RunRecord(config)
    monitor = MonitorState.start(W, blowup_threshold)
    t, n = 0.0, 0
    record.snapshots.append((t, W))
    record.series.append(_row(n, t, 0.0, W, monitor))
    while t < t_end * (1 - 1e-14):
        h = dt if dt is not None else choose_dt(W, cfl)
        if t + h > t_end * (1 - 1e-12):
            h = t_end - t
        try:
            W = step(W, h, **flags)
        except BlowupSuspected as err:
            record.status = "blowup_suspected"
            record.message = str(err)
            break
        t = t_end if h == t_end - t else t + h
        n += 1
        monitor = update_monitors(monitor, W, h)
        record.series.append(_row(n, t, h, W, monitor))
        if n % snapshot_every == 0 or t >= t_end:
            record.snapshots.append((t, W))
        if monitor.tripped and stop_on_trip:
            if record.snapshots[-1][0] != t:
                record.snapshots.append((t, W))
            record.status = "tripped"
            record.message = monitor.reason
            break
    else:
        record.status = "completed"
    record.monitor = monitor
    log.info("run %s at t=%.6g after %d steps", record.status, t, n)
    return record


def run(config: RunConfig, **flags) -> RunRecord:
    """Build initial data from the config and integrate to ``t_end``."""
    W0 = make_initial_data(config.grid, config.params, config.amplitude, config.seed, config.band)
    return integrate(W0, config.t_end, config.cfl, config=config,
                     snapshot_every=config.snapshot_every,
                     blowup_threshold=config.blowup_threshold, **flags)
