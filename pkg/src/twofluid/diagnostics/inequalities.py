"""Randomized calibrate-then-assert checkers for function-space inequalities.

Every inequality here holds with some constant that is never made explicit.
Each checker measures the ratio ``lhs / rhs`` on seeded calibration trials,
freezes ``C_hat`` as the largest ratio, then asserts ``lhs <= headroom * C_hat
* rhs`` on a disjoint set of fresh seeds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from ..littlewood_paley import (
    INNER_RADIUS,
    OUTER_RADIUS,
    BesovSpec,
    besov_norm,
    block,
    block_norm_series,
    build_partition,
    chemin_lerner_from_series,
    time_norm,
)
from ..model import phi
from ..spectral_field import GridSpec, SpectralField, gradient, jacobian, lp_norm

HEADROOM = 1.05
FRESH_OFFSET = 10_000


@dataclass
class CheckVerdict:
    """Outcome of one calibrate-then-assert run."""

    name: str
    constant: float
    headroom: float
    calibration_seeds: list
    fresh_seeds: list
    max_fresh: float
    failures: list = field(default_factory=list)
    bound: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.failures:
            return False
        return self.bound is None or self.constant <= self.bound

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        d["n_calibration"] = len(self.calibration_seeds)
        d["n_fresh"] = len(self.fresh_seeds)
        del d["calibration_seeds"], d["fresh_seeds"]
        return d


def calibrate_then_assert(
    name: str,
    ratio: Callable[[int], float | None],
    trials: int = 100,
    seed: int = 0,
    headroom: float = HEADROOM,
    bound: float | None = None,
) -> CheckVerdict:
    """Calibrate on seeds ``seed..seed+trials-1``, assert on ``FRESH_OFFSET`` beyond.

    ``ratio(seed)`` returns ``None`` for degenerate samples, which are skipped.
    """
    cal = list(range(seed, seed + trials))
    fresh = list(range(seed + FRESH_OFFSET, seed + FRESH_OFFSET + trials))
    values = [r for r in (ratio(s) for s in cal) if r is not None]
    c_hat = max(values, default=0.0)
    failures, max_fresh = [], 0.0
    for s in fresh:
        r = ratio(s)
        if r is None:
            continue
        max_fresh = max(max_fresh, r)
        if r > headroom * c_hat:
            failures.append(s)
    return CheckVerdict(name, c_hat, headroom, cal, fresh, max_fresh, failures, bound)


# random test fields ---------------------------------------------------------

def spectral_support(grid: GridSpec, kmax: float) -> np.ndarray:
    """Nyquist-free modes with ``|k| <= kmax``."""
    return grid.nyquist_free & (grid.kmag <= kmax)


def product_safe_kmax(grid: GridSpec) -> float:
    """Largest radius whose pairwise products are resolved without aliasing."""
    return grid.n / 4 - 1


def random_spectral_field(
    grid: GridSpec,
    rng: np.random.Generator,
    mask: np.ndarray,
    components: int = 1,
    slope: float = 2.0,
    aligned: bool = False,
) -> SpectralField:
    """Real field with Gaussian coefficients decaying like ``(1 + |k|)^-slope`` on ``mask``.

    ``aligned`` keeps only the coefficient magnitudes, so every mode peaks at
    the origin; such fields sit close to the extremal direction of sup-norm
    and product bounds.
    """
    shape = (components, *grid.shape)
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if aligned:
        coeffs = np.abs(coeffs)
    coeffs *= mask * (1.0 + grid.kmag) ** (-slope)
    f = SpectralField.from_spectral(grid, coeffs)
    scale = lp_norm(f, 2)
    if scale == 0:
        raise ValueError("mask selects no modes")
    return f * (1.0 / scale)


def annulus_mask(grid: GridSpec, q: int) -> np.ndarray:
    """Closed dyadic annulus ``2^q [3/4, 8/3]`` without Nyquist modes."""
    k = grid.kmag
    return grid.nyquist_free & (k >= INNER_RADIUS * 2.0**q) & (k <= OUTER_RADIUS * 2.0**q)


def annulus_blocks(grid: GridSpec) -> list[int]:
    """Blocks ``q >= 0`` whose annulus holds lattice modes."""
    qs = []
    q = 0
    while INNER_RADIUS * 2.0**q < grid.n / 2:
        if annulus_mask(grid, q).any():
            qs.append(q)
        q += 1
    return qs


def _time_series(grid, rng, mask, amplitude, times, modes=3):
    """Smooth synthetic trajectory ``sum_j cos(w_j t + p_j) xi_j`` scaled to sup ``amplitude``."""
    xis = [random_spectral_field(grid, rng, mask) for _ in range(modes)]
    omega = rng.uniform(0.2, 2.0, modes)
    phase = rng.uniform(0, 2 * np.pi, modes)
    vals = np.array([
        sum(math.cos(w * t + p) * xi.values for w, p, xi in zip(omega, phase, xis))
        for t in times
    ])
    vals *= amplitude / np.max(np.abs(vals))
    return [SpectralField(grid, v) for v in vals]


def _cl(fields, times, s, theta, partition, homogeneous=False):
    t, ser = block_norm_series(list(zip(times, fields)), 2.0, partition, homogeneous)
    return chemin_lerner_from_series(t, ser, s, 1.0, theta)


def _sup(fields) -> float:
    return max(lp_norm(f, math.inf) for f in fields)


# individual checkers --------------------------------------------------------

def product_ratio(f: SpectralField, g: SpectralField, spec: BesovSpec) -> float | None:
    partition = build_partition(f.grid)
    den = besov_norm(f, spec, partition) * besov_norm(g, spec, partition)
    if den == 0:
        return None
    fg = SpectralField(f.grid, f.values * g.values)
    return besov_norm(fg, spec, partition) / den


def check_product_estimate(
    grid: GridSpec, trials: int = 100, spec: BesovSpec | None = None, seed: int = 0
) -> CheckVerdict:
    """Algebra bound ``||fg|| <= C ||f|| ||g||`` in ``B^s_{2,1}`` with ``s >= dim/2``."""
    spec = spec or BesovSpec(1.0 + grid.dim / 2.0, 2, 1)
    mask = spectral_support(grid, product_safe_kmax(grid))

    def ratio(sd: int):
        rng = np.random.default_rng(sd)
        f = random_spectral_field(grid, rng, mask, slope=0.0, aligned=True)
        g = random_spectral_field(grid, rng, mask, slope=0.0, aligned=True)
        return product_ratio(f, g, spec)

    v = calibrate_then_assert("product", ratio, trials, seed)
    v.extra["s"] = spec.s
    return v


def composition_ratio(fields, times, gamma: float, s: float, theta: float) -> float | None:
    grid = fields[0].grid
    partition = build_partition(grid)
    rhs = (1.0 + _sup(fields)) ** (math.floor(s) + 1) * _cl(fields, times, s, theta, partition)
    if rhs == 0:
        return None
    lhs = _cl([SpectralField(grid, phi(f.values, gamma)) for f in fields], times, s, theta, partition)
    return lhs / rhs


def composition_difference_ratio(f_series, g_series, times, gamma: float, s: float) -> float | None:
    """Difference bound with ``theta = 2``, ``theta1 = theta4 = 2``, ``theta2 = theta3 = inf``.

    Both Chemin-Lerner and ``L^inf`` norms are convex, so the sup over the
    segment ``g + kappa (f - g)`` is attained at an endpoint.
    """
    grid = f_series[0].grid
    partition = build_partition(grid)
    diff = [f - g for f, g in zip(f_series, g_series)]
    lhs_fields = [SpectralField(grid, phi(f.values, gamma) - phi(g.values, gamma))
                  for f, g in zip(f_series, g_series)]
    lhs = _cl(lhs_fields, times, s, 2.0, partition)
    diff_sup = time_norm(np.array([lp_norm(d, math.inf) for d in diff]), times, 2.0)
    seg_cl = max(_cl(f_series, times, s, math.inf, partition),
                 _cl(g_series, times, s, math.inf, partition))
    seg_sup = max(_sup(f_series), _sup(g_series))
    weight = (1.0 + _sup(f_series) + _sup(g_series)) ** (math.floor(s) + 1)
    rhs = weight * (diff_sup * seg_cl + _cl(diff, times, s, 2.0, partition) * seg_sup)
    if rhs == 0:
        return None
    return lhs / rhs


def check_composition_estimate(
    grid: GridSpec,
    gamma: float = 2.0,
    trials: int = 100,
    seed: int = 0,
    n_times: int = 11,
    T: float = 2.0,
    amplitude: float = 0.3,
) -> tuple[CheckVerdict, CheckVerdict]:
    """Composition bound for ``Phi`` and its difference form, on synthetic trajectories."""
    s_c = 1.0 + grid.dim / 2.0
    times = np.linspace(0.0, T, n_times)
    mask = spectral_support(grid, product_safe_kmax(grid))

    def single(sd: int):
        rng = np.random.default_rng(sd)
        amp = amplitude * rng.uniform(0.1, 1.0)
        return composition_ratio(_time_series(grid, rng, mask, amp, times), times, gamma, s_c, 2.0)

    def difference(sd: int):
        rng = np.random.default_rng(sd)
        amp = amplitude * rng.uniform(0.1, 1.0)
        f = _time_series(grid, rng, mask, amp, times)
        g = _time_series(grid, rng, mask, amp, times)
        return composition_difference_ratio(f, g, times, gamma, s_c - 1.0)

    v1 = calibrate_then_assert("composition", single, trials, seed)
    v2 = calibrate_then_assert("composition_difference", difference, trials, seed)
    for v, s in ((v1, s_c), (v2, s_c - 1.0)):
        v.extra.update(gamma=gamma, s=s)
    return v1, v2


def quadratic_identity_defect(f: SpectralField, g: SpectralField, spec: BesovSpec) -> float:
    """``|B(Phi(f) - Phi(g)) - B((f - g)(f + g)) / 4|`` at ``gamma = 2``, relative."""
    partition = build_partition(f.grid)
    lhs = besov_norm(SpectralField(f.grid, phi(f.values, 2.0) - phi(g.values, 2.0)), spec, partition)
    rhs = besov_norm(SpectralField(f.grid, (f.values - g.values) * (f.values + g.values)),
                     spec, partition) / 4.0
    return abs(lhs - rhs) / max(rhs, np.finfo(float).tiny)


def commutator_values(f: SpectralField, g: SpectralField) -> dict[int, float]:
    """``||[f, Delta_q] grad g||_{L^2}`` for every inhomogeneous block."""
    partition = build_partition(f.grid)
    dg = gradient(g)
    fdg = SpectralField(f.grid, f.values * dg.values)
    out = {}
    for q in partition.block_range(homogeneous=False):
        c = f.values * block(dg, q, partition).values - block(fdg, q, partition).values
        out[q] = lp_norm(SpectralField(f.grid, c), 2)
    return out


def commutator_ratio(f: SpectralField, g: SpectralField, s: float) -> float | None:
    """``sum_q 2^{qs} ||[f, Delta_q] grad g|| / (||grad f||_{B^{s-1}} ||g||_{B^s})``."""
    partition = build_partition(f.grid)
    den = (besov_norm(gradient(f), BesovSpec(s - 1.0), partition)
           * besov_norm(g, BesovSpec(s), partition))
    if den == 0:
        return None
    vals = commutator_values(f, g)
    return sum(2.0 ** (q * s) * v for q, v in sorted(vals.items())) / den


def check_commutator_estimate(grid: GridSpec, trials: int = 100, seed: int = 0) -> CheckVerdict:
    s_c = 1.0 + grid.dim / 2.0
    mask = spectral_support(grid, product_safe_kmax(grid))

    def ratio(sd: int):
        rng = np.random.default_rng(sd)
        f = random_spectral_field(grid, rng, mask, slope=0.0, aligned=True)
        g = random_spectral_field(grid, rng, mask, slope=0.0, aligned=True)
        return commutator_ratio(f, g, s_c)

    v = calibrate_then_assert("commutator", ratio, trials, seed)
    v.extra["s"] = s_c
    return v


def check_embedding(grid: GridSpec, trials: int = 100, seed: int = 0) -> CheckVerdict:
    """``||f||_inf <= C ||f||_{B^{dim/2}_{2,1}}``."""
    spec = BesovSpec(grid.dim / 2.0, 2, 1)
    partition = build_partition(grid)
    mask = spectral_support(grid, grid.n / 2 - 1)

    def ratio(sd: int):
        rng = np.random.default_rng(sd)
        f = random_spectral_field(grid, rng, mask, slope=0.0, aligned=True)
        return lp_norm(f, math.inf) / besov_norm(f, spec, partition)

    return calibrate_then_assert("embedding", ratio, trials, seed)


def bernstein_sup_ratio(f: SpectralField, q: int) -> float:
    """Two-sided Bernstein factor ``max(r, 1/r)`` with ``r = ||grad f||_inf / (2^q ||f||_inf)``."""
    r = lp_norm(gradient(f), math.inf) / (2.0**q * lp_norm(f, math.inf))
    return max(r, 1.0 / r)


def check_bernstein_sup(
    grid: GridSpec, trials: int = 100, seed: int = 0, bound: float = 4.0
) -> CheckVerdict:
    """Sup-norm Bernstein factor on annulus-supported fields, for every populated block."""
    blocks = annulus_blocks(grid)

    def ratio(sd: int):
        rng = np.random.default_rng(sd)
        worst = 0.0
        for q in blocks:
            f = random_spectral_field(grid, rng, annulus_mask(grid, q), slope=0.0)
            worst = max(worst, bernstein_sup_ratio(f, q))
        return worst

    v = calibrate_then_assert("bernstein_sup", ratio, trials, seed, bound=bound)
    v.extra["blocks"] = blocks
    return v


def derivative_equivalence_ratio(f: SpectralField, s: float) -> float:
    """``||grad f||_{Bdot^s} / ||f||_{Bdot^{s+1}}`` at ``p = 2``; lies in ``[3/4, 8/3]``."""
    partition = build_partition(f.grid)
    num = besov_norm(jacobian(f), BesovSpec(s, 2, 1, homogeneous=True), partition)
    return num / besov_norm(f, BesovSpec(s + 1.0, 2, 1, homogeneous=True), partition)


def split_norm_ratios(fields, times, s: float, theta: float, r: float = 1.0) -> tuple[float, float]:
    """Both directions of the inhomogeneous versus (``L^theta_T(L^2)`` + homogeneous) comparison."""
    grid = fields[0].grid
    partition = build_partition(grid)
    samples = list(zip(times, fields))
    t, inh = block_norm_series(samples, 2.0, partition, homogeneous=False)
    _, hom = block_norm_series(samples, 2.0, partition, homogeneous=True)
    a = chemin_lerner_from_series(t, inh, s, r, theta)
    b = (time_norm(np.array([lp_norm(f, 2) for f in fields]), t, theta)
         + chemin_lerner_from_series(t, hom, s, r, theta))
    return a / b, b / a


def check_split_norm(
    grid: GridSpec, trials: int = 100, seed: int = 0, s: float = 1.0, theta: float = 2.0,
    n_times: int = 11, T: float = 2.0,
) -> tuple[CheckVerdict, CheckVerdict]:
    """Two-sided equivalence of the inhomogeneous Chemin-Lerner norm (``s > 0``, ``theta >= r``)."""
    if not (s > 0 and theta >= 1.0):
        raise ValueError("equivalence needs s > 0 and theta >= r = 1")
    times = np.linspace(0.0, T, n_times)
    mask = spectral_support(grid, grid.n / 2 - 1)

    def pair(sd: int):
        rng = np.random.default_rng(sd)
        return split_norm_ratios(_time_series(grid, rng, mask, 1.0, times), times, s, theta)

    cache: dict[int, tuple[float, float]] = {}

    def get(sd: int):
        if sd not in cache:
            cache[sd] = pair(sd)
        return cache[sd]

    upper = calibrate_then_assert("split_norm_upper", lambda sd: get(sd)[0], trials, seed)
    lower = calibrate_then_assert("split_norm_lower", lambda sd: get(sd)[1], trials, seed)
    for v in (upper, lower):
        v.extra.update(s=s, theta=theta)
    return upper, lower
