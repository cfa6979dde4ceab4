"""Energy, dissipation and decay functionals evaluated on run records.

All quantities use the physical-variable view ``(n+- - 1, u+-, E, B - B_eq)``
with ``B_eq = sqrt(gamma) * B_bar`` and the physical clock
``t_phys = t_sym / sqrt(gamma)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from ..littlewood_paley import (
    BesovSpec,
    besov_norm,
    block_norm_series,
    build_partition,
    chemin_lerner_from_series,
)
from ..model import SymState, from_symmetric
from ..spectral_field import SpectralField, jacobian, lp_norm

PERTURBATIONS = ("n_plus", "n_minus", "u_plus", "u_minus", "E", "B")


def critical_index(dim: int) -> float:
    return 1.0 + dim / 2.0


def perturbation_fields(W: SymState) -> dict[str, SpectralField]:
    """Deviation of the physical view from the equilibrium ``(1, 0, 1, 0, 0, B_eq)``."""
    phys = from_symmetric(W)
    bbar = np.asarray(W.params.b_bar).reshape(-1, *([1] * W.grid.dim))
    one = np.ones((1, *W.grid.shape))
    return {
        "n_plus": SpectralField(W.grid, phys.n_plus.values - one),
        "n_minus": SpectralField(W.grid, phys.n_minus.values - one),
        "u_plus": phys.u_plus,
        "u_minus": phys.u_minus,
        "E": phys.E,
        "B": SpectralField(W.grid, phys.B.values - math.sqrt(W.params.gamma) * bbar),
    }


def _samples(run) -> list[tuple[float, SymState]]:
    snaps = run.snapshots if hasattr(run, "snapshots") else list(run)
    if len(snaps) < 2:
        raise ValueError("energy diagnostics need at least two snapshots")
    return snaps


@dataclass
class EnergyReport:
    sup_norm: float
    diss_density: float
    diss_E: float
    diss_gradB: float
    initial_norm: float
    T: float
    regularity: float

    @property
    def degenerate(self) -> bool:
        return self.initial_norm == 0.0

    def ratio(self, mu0: float) -> float:
        """``(sup + mu0 * dissipation) / initial``; NaN for zero initial data."""
        if self.degenerate:
            return math.nan
        diss = self.diss_density + self.diss_E + self.diss_gradB
        return (self.sup_norm + mu0 * diss) / self.initial_norm

    def to_dict(self, mu0: float | None = None) -> dict:
        d = asdict(self)
        d["degenerate"] = self.degenerate
        if mu0 is not None:
            d["mu0"] = mu0
            d["ratio"] = None if self.degenerate else self.ratio(mu0)
        return d


def energy_report(run, mu0: float | None = None) -> EnergyReport:
    """Chemin-Lerner energy and dissipation norms of a run.

    ``mu0`` is accepted for symmetry with the JSON output; the ratio itself
    is evaluated with :meth:`EnergyReport.ratio`.
    """
    snaps = _samples(run)
    W0 = snaps[0][1]
    grid, gamma = W0.grid, W0.params.gamma
    partition = build_partition(grid)
    s_c = critical_index(grid.dim)
    scale = 1.0 / math.sqrt(gamma)
    per_time = [(t * scale, perturbation_fields(W)) for t, W in snaps]

    def series(name: str, transform=None):
        samples = [(t, transform(f[name]) if transform else f[name]) for t, f in per_time]
        return block_norm_series(samples, 2.0, partition)

    cl = {name: series(name) for name in PERTURBATIONS}
    grad_b = series("B", jacobian)

    def norm(ser, s, theta):
        return chemin_lerner_from_series(ser[0], ser[1], s, 1.0, theta)

    sup = sum(norm(cl[n], s_c, math.inf) for n in PERTURBATIONS)
    diss_density = sum(norm(cl[n], s_c, 2.0) for n in ("n_plus", "n_minus", "u_plus", "u_minus"))
    diss_e = norm(cl["E"], s_c - 1.0, 2.0)
    diss_gradb = norm(grad_b, s_c - 2.0, 2.0)
    initial = besov_norm(list(per_time[0][1].values()), BesovSpec(s_c, 2, 1), partition)
    T = per_time[-1][0] - per_time[0][0]
    return EnergyReport(sup, diss_density, diss_e, diss_gradb, initial, T, s_c)


CHANNELS = ("charge_imbalance", "velocity_plus", "velocity_minus", "electric", "magnetic",
            "density_plus", "density_minus")


def channel_fields(W: SymState) -> dict[str, SpectralField]:
    p = perturbation_fields(W)
    return {
        "charge_imbalance": p["n_plus"] - p["n_minus"],
        "velocity_plus": p["u_plus"],
        "velocity_minus": p["u_minus"],
        "electric": p["E"],
        "magnetic": p["B"],
        "density_plus": p["n_plus"],
        "density_minus": p["n_minus"],
    }


def channel_regularities(dim: int, eps: float) -> dict[str, float]:
    s_c = critical_index(dim)
    return {
        "charge_imbalance": s_c - eps,
        "velocity_plus": s_c - eps,
        "velocity_minus": s_c - eps,
        "electric": s_c - 1.0 - eps,
        "magnetic": s_c - 2.0 - eps,
        "density_plus": s_c - eps,
        "density_minus": s_c - eps,
    }


@dataclass
class DecayChannels:
    eps: float
    times: np.ndarray
    norms: dict = field(default_factory=dict)
    regularities: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    def final_over_initial(self) -> dict[str, float]:
        out = {}
        for name, vals in self.norms.items():
            out[name] = math.nan if vals[0] == 0 else float(vals[-1] / vals[0])
        return out

    def decay_rates(self, t_min: float = 0.0) -> dict[str, float]:
        """Least-squares slope of ``-log(norm)`` against time for ``t >= t_min``."""
        out = {}
        sel = self.times >= t_min
        for name, vals in self.norms.items():
            v = vals[sel]
            if np.any(v <= 0) or v.size < 2:
                out[name] = math.nan
                continue
            slope = np.polyfit(self.times[sel], np.log(v), 1)[0]
            out[name] = float(-slope)
        return out

    def summary(self) -> dict:
        return {
            "eps": self.eps,
            "regularities": self.regularities,
            "initial": {k: float(v[0]) for k, v in self.norms.items()},
            "final": {k: float(v[-1]) for k, v in self.norms.items()},
            "final_over_initial": self.final_over_initial(),
            "decay_rates": self.decay_rates(),
            "t_final": float(self.times[-1]),
        }


def decay_report(run, eps: float = 0.5, min_block: int | None = None) -> DecayChannels:
    """Per-snapshot Besov norms of the decay channels.

    ``min_block=0`` drops the low-frequency block, which makes every channel
    monotone in ``eps``.
    """
    snaps = _samples(run)
    grid = snaps[0][1].grid
    partition = build_partition(grid)
    regs = channel_regularities(grid.dim, eps)
    times = np.array([t for t, _ in snaps]) / math.sqrt(snaps[0][1].params.gamma)
    norms = {name: np.zeros(len(snaps)) for name in CHANNELS}
    for i, (_, W) in enumerate(snaps):
        for name, f in channel_fields(W).items():
            norms[name][i] = besov_norm(f, BesovSpec(regs[name], 2, 1), partition, min_block)
    return DecayChannels(eps, times, norms, regs)


def poincare_check(f: SpectralField) -> float:
    """``||f||_2 / ||grad f||_2`` for a mean-zero field; at most one on the 2*pi torus."""
    if f.components != 1:
        raise ValueError("poincare_check expects a scalar field")
    scale = max(float(np.max(np.abs(f.values))), np.finfo(float).tiny)
    if abs(f.spectral[(0,) + (0,) * f.grid.dim]) > 1e-13 * scale:
        raise ValueError("field must have zero mean")
    grad = lp_norm(jacobian(f), 2)
    if grad == 0:
        raise ValueError("Poincare ratio undefined for the zero field")
    return lp_norm(f, 2) / grad
