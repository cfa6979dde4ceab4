"""Dyadic Littlewood-Paley blocks and Besov / Chemin-Lerner norms on the torus.

The bump profile is ``g(t) = exp(-1 / ((t - 3/4) (8/3 - t)))`` on the open
interval ``(3/4, 8/3)`` and zero elsewhere; ``phi_q(k) = g(|k| / 2^q)``.
Block multipliers are ``phi_q / sum_{q'} phi_{q'}`` evaluated on the integer
lattice, and the low-frequency multiplier is ``1 - sum_{q >= 0}`` of them.

Norm of a tuple of fields is the sum of the norms of its members.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, asdict
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .spectral_field import GridSpec, SpectralField, gradient, ifft, lp_norm

INNER_RADIUS = 3.0 / 4.0
OUTER_RADIUS = 8.0 / 3.0


def bump(t: np.ndarray) -> np.ndarray:
    """Smooth radial profile supported in ``[3/4, 8/3]``, positive inside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > INNER_RADIUS) & (t < OUTER_RADIUS)
    ti = t[inside]
    out[inside] = np.exp(-1.0 / ((ti - INNER_RADIUS) * (OUTER_RADIUS - ti)))
    return out


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Filter bank of dyadic annuli on one grid.

    ``blocks[q]`` is the homogeneous multiplier for ``q_min <= q <= q_max``;
    the inhomogeneous decomposition reuses the blocks ``q >= 0`` and adds
    ``low`` for ``q = -1``.
    """

    grid: GridSpec
    q_min: int
    q_max: int
    blocks: dict
    low: np.ndarray

    def block_range(self, homogeneous: bool) -> range:
        return range(self.q_min if homogeneous else -1, self.q_max + 1)

    def multiplier(self, q: int, homogeneous: bool) -> np.ndarray | None:
        if not homogeneous:
            if q == -1:
                return self.low
            if q < -1:
                return None
        return self.blocks.get(q)

    @cached_property
    def homogeneous_sum(self) -> np.ndarray:
        return np.sum([self.blocks[q] for q in sorted(self.blocks)], axis=0)

    @cached_property
    def inhomogeneous_sum(self) -> np.ndarray:
        return self.low + np.sum([self.blocks[q] for q in sorted(self.blocks) if q >= 0], axis=0)


@lru_cache(maxsize=16)
def build_partition(grid: GridSpec) -> DyadicPartition:
    """Dyadic partition of unity on the lattice of ``grid``."""
    kmag = grid.kmag
    # smallest q whose annulus reaches |k| = 1
    q_min = math.floor(math.log2(1.0 / OUTER_RADIUS)) + 1
    q_max = math.ceil(math.log2(math.sqrt(grid.dim) * grid.n / 2)) + 1
    raw = {q: bump(kmag / 2.0**q) for q in range(q_min, q_max + 1)}
    total = np.sum([raw[q] for q in sorted(raw)], axis=0)
    nonzero = total > 0
    blocks = {}
    for q in sorted(raw):
        m = np.zeros_like(total)
        m[nonzero] = raw[q][nonzero] / total[nonzero]
        m.setflags(write=False)
        blocks[q] = m
    low = 1.0 - np.sum([blocks[q] for q in sorted(blocks) if q >= 0], axis=0)
    low.setflags(write=False)
    return DyadicPartition(grid, q_min, q_max, blocks, low)


def block(
    f: SpectralField, q: int, partition: DyadicPartition, homogeneous: bool = False
) -> SpectralField:
    """Littlewood-Paley block of ``f``; outside the stored range the block is zero."""
    m = partition.multiplier(q, homogeneous)
    if m is None:
        warnings.warn(f"block index {q} outside partition range; returning zero", RuntimeWarning)
        return SpectralField.zeros(f.grid, f.components)
    return SpectralField.from_spectral(f.grid, f.spectral * m)


@dataclass(frozen=True)
class BesovSpec:
    s: float
    p: float = 2.0
    r: float = 1.0
    homogeneous: bool = False

    def __post_init__(self) -> None:
        if not (self.p >= 1 and self.r >= 1):
            raise ValueError(f"p and r must be >= 1, got p={self.p}, r={self.r}")


@dataclass(frozen=True)
class TimeNormSpec:
    base: BesovSpec
    theta: float
    T: float | None = None

    def __post_init__(self) -> None:
        if not self.theta >= 1:
            raise ValueError(f"theta must be >= 1, got {self.theta}")
        if self.T is not None and not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")

    def to_record(self) -> dict:
        d = asdict(self.base)
        d["theta"] = self.theta
        # JSON has no infinity literal
        return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}


def block_norms(
    f: SpectralField, p: float, partition: DyadicPartition, homogeneous: bool = False
) -> dict[int, float]:
    """``||Delta_q f||_{L^p}`` for every block index in range."""
    out = {}
    for q in partition.block_range(homogeneous):
        m = partition.multiplier(q, homogeneous)
        out[q] = lp_norm(SpectralField(f.grid, ifft(f.spectral * m, f.grid)), p)
    return out


def lr_sum(weighted: np.ndarray, r: float) -> float:
    """``l^r`` norm of a nonnegative sequence, summed in index order."""
    weighted = np.asarray(weighted, dtype=float)
    if weighted.size == 0:
        return 0.0
    if np.isinf(r):
        return float(np.max(weighted))
    if r == 1:
        return float(np.sum(weighted))
    return float(np.sum(weighted**r) ** (1.0 / r))


def _weighted(norms: dict[int, float], s: float, min_block: int | None) -> np.ndarray:
    qs = [q for q in sorted(norms) if min_block is None or q >= min_block]
    return np.array([2.0 ** (q * s) * norms[q] for q in qs])


def besov_norm(
    f: SpectralField | Sequence[SpectralField],
    spec: BesovSpec,
    partition: DyadicPartition,
    min_block: int | None = None,
) -> float:
    """Besov norm of a field (or the sum over a tuple of fields).

    ``min_block`` restricts the block sum to ``q >= min_block``.
    """
    if not isinstance(f, SpectralField):
        return float(sum(besov_norm(g, spec, partition, min_block) for g in f))
    norms = block_norms(f, spec.p, partition, spec.homogeneous)
    return lr_sum(_weighted(norms, spec.s, min_block), spec.r)


def time_norm(values: np.ndarray, times: np.ndarray, theta: float) -> float:
    """``L^theta`` norm in time by trapezoidal quadrature (max when infinite)."""
    values = np.abs(np.asarray(values, dtype=float))
    if np.isinf(theta):
        return float(np.max(values))
    return float(np.trapezoid(values**theta, times) ** (1.0 / theta))


def _check_samples(samples) -> tuple[np.ndarray, list[SpectralField]]:
    if len(samples) < 2:
        raise ValueError("need at least two time samples")
    times = np.array([t for t, _ in samples], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    return times, [f for _, f in samples]


def block_norm_series(
    samples, p: float, partition: DyadicPartition, homogeneous: bool = False
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Per-block ``L^p`` norms at every sample time."""
    times, fields = _check_samples(samples)
    per_time = [block_norms(f, p, partition, homogeneous) for f in fields]
    return times, {q: np.array([d[q] for d in per_time]) for q in per_time[0]}


def chemin_lerner_from_series(
    times: np.ndarray,
    series: dict[int, np.ndarray],
    s: float,
    r: float,
    theta: float,
    min_block: int | None = None,
) -> float:
    """Weighted ``l^r`` sum over blocks of each block's time ``L^theta`` norm."""
    qs = [q for q in sorted(series) if min_block is None or q >= min_block]
    weighted = [2.0 ** (q * s) * time_norm(series[q], times, theta) for q in qs]
    return lr_sum(np.array(weighted), r)


def chemin_lerner_norm(samples, spec: TimeNormSpec, partition: DyadicPartition) -> float:
    """Chemin-Lerner norm of a time-ordered list of ``(t, field)`` samples."""
    times, series = block_norm_series(samples, spec.base.p, partition, spec.base.homogeneous)
    if spec.T is not None and not math.isclose(times[-1] - times[0], spec.T, rel_tol=1e-9):
        raise ValueError(f"samples span {times[-1] - times[0]}, expected T={spec.T}")
    return chemin_lerner_from_series(times, series, spec.base.s, spec.base.r, spec.theta)


def lebesgue_time_norm(samples, p: float, theta: float) -> float:
    """``||f||_{L^theta_T(L^p)}``."""
    times, fields = _check_samples(samples)
    return time_norm(np.array([lp_norm(f, p) for f in fields]), times, theta)


def time_besov_norm(samples, spec: TimeNormSpec, partition: DyadicPartition) -> float:
    """Classical ``L^theta_T(B^s_{p,r})`` norm (time norm taken last)."""
    times, fields = _check_samples(samples)
    vals = np.array([besov_norm(f, spec.base, partition) for f in fields])
    return time_norm(vals, times, spec.theta)


def in_annulus(f: SpectralField, q: int, tol: float = 1e-12) -> bool:
    """True when the spectrum of ``f`` lies in the closed annulus ``2^q [3/4, 8/3]``."""
    kmag = f.grid.kmag
    outside = (kmag < INNER_RADIUS * 2.0**q) | (kmag > OUTER_RADIUS * 2.0**q)
    power = np.sum(np.abs(f.spectral) ** 2)
    return bool(np.sum(np.abs(f.spectral[:, outside]) ** 2) <= tol**2 * power)


def check_bernstein(f: SpectralField, q: int, p: float) -> tuple[float, float]:
    """Bernstein ratio ``||grad f||_p / (2^q ||f||_p)`` and its reciprocal.

    For ``p = 2`` and ``f`` supported in the annulus ``2^q [3/4, 8/3]``, the
    first value lies in ``[3/4, 8/3]``.
    """
    if f.components != 1:
        raise ValueError("check_bernstein expects a scalar field")
    base = lp_norm(f, p)
    if base == 0.0:
        raise ValueError("Bernstein ratio undefined for the zero field")
    if not in_annulus(f, q):
        raise ValueError(f"field is not supported in the annulus of block {q}")
    ratio = lp_norm(gradient(f), p) / (2.0**q * base)
    return ratio, 1.0 / ratio


def analysis_record(t: float, spec: TimeNormSpec | BesovSpec, value: float) -> dict:
    """JSON-ready record ``{t, spec: {s, p, r, theta, homogeneous}, value}``."""
    if isinstance(spec, BesovSpec):
        spec = TimeNormSpec(spec, math.inf)
    return {"t": t, "spec": spec.to_record(), "value": value}


def partition_field(partition: DyadicPartition) -> SpectralField:
    """Multipliers as one multi-component field: low block first, then q_min..q_max."""
    arrays = [partition.low] + [partition.blocks[q] for q in sorted(partition.blocks)]
    return SpectralField(partition.grid, np.stack(arrays))
