"""Named property suites behind ``twofluid check``.

Each suite returns a list of verdict dicts with at least ``check``,
``passed`` and ``failing_seeds``.
"""
from __future__ import annotations

import math

import numpy as np

from ..integrator import run, RunConfig
from ..littlewood_paley import INNER_RADIUS, OUTER_RADIUS, block, build_partition, check_bernstein
from ..model import PhysParams, make_initial_data
from ..spectral_field import GridSpec, SpectralField, lp_norm
from .convergence import gauss_growth_order, global_order, local_order
from .energy import poincare_check
from .inequalities import (
    annulus_blocks,
    annulus_mask,
    check_bernstein_sup,
    check_commutator_estimate,
    check_composition_estimate,
    check_embedding,
    check_product_estimate,
    check_split_norm,
    derivative_equivalence_ratio,
    quadratic_identity_defect,
    random_spectral_field,
    spectral_support,
)
from ..littlewood_paley import BesovSpec

SUITES = ("partition", "bernstein", "embed", "product", "composition", "commutator",
          "poincare", "convergence")


def _verdict(check: str, passed: bool, failing=(), **values) -> dict:
    return {"check": check, "passed": bool(passed), "failing_seeds": list(failing), **values}


def _from_calibrated(v) -> dict:
    d = v.to_dict()
    return _verdict(d.pop("name"), d.pop("passed"), d.pop("failures"), **d)


def partition_suite(dim: int, trials: int = 50, seed: int = 0) -> list[dict]:
    out = []
    for n in (16, 32, 64):
        grid = GridSpec(dim, n)
        P = build_partition(grid)
        defect = float(np.max(np.abs(P.inhomogeneous_sum - 1.0)))
        nonzero = grid.kmag > 0
        hom_defect = float(np.max(np.abs(P.homogeneous_sum[nonzero] - 1.0)))
        outside = 0.0
        for q, m in P.blocks.items():
            off = (grid.kmag <= INNER_RADIUS * 2.0**q) | (grid.kmag >= OUTER_RADIUS * 2.0**q)
            outside = max(outside, float(np.max(np.abs(m[off]), initial=0.0)))
        failing, worst = [], 0.0
        for sd in range(seed, seed + trials):
            f = random_spectral_field(grid, np.random.default_rng(sd),
                                      np.ones(grid.shape, bool), slope=0.0)
            recon = sum(block(f, q, P).values for q in P.block_range(homogeneous=False))
            err = float(np.linalg.norm(recon - f.values) / np.linalg.norm(f.values))
            worst = max(worst, err)
            if err > 1e-11:
                failing.append(sd)
        out.append(_verdict(f"unity_n{n}", max(defect, hom_defect) <= 1e-12,
                            defect=defect, homogeneous_defect=hom_defect))
        out.append(_verdict(f"support_n{n}", outside == 0.0, max_outside=outside))
        out.append(_verdict(f"reconstruction_n{n}", not failing, failing, max_error=worst))
    return out


def bernstein_suite(grid: GridSpec, trials: int = 100, seed: int = 0) -> list[dict]:
    failing, lo, hi = [], math.inf, 0.0
    for q in annulus_blocks(grid):
        for sd in range(seed, seed + 50):
            rng = np.random.default_rng([sd, q])
            f = random_spectral_field(grid, rng, annulus_mask(grid, q), slope=0.0)
            r, _ = check_bernstein(f, q, 2)
            lo, hi = min(lo, r), max(hi, r)
            if not (0.75 - 1e-9 <= r <= 8.0 / 3.0 + 1e-9):
                failing.append(sd)
    out = [_verdict("bernstein_l2", not failing, sorted(set(failing)), min_ratio=lo, max_ratio=hi)]
    out.append(_from_calibrated(check_bernstein_sup(grid, trials, seed)))
    failing, lo, hi = [], math.inf, 0.0
    mask = spectral_support(grid, grid.n / 2 - 1) & (grid.kmag > 0)
    for sd in range(seed, seed + trials):
        f = random_spectral_field(grid, np.random.default_rng(sd), mask, slope=1.0)
        r = derivative_equivalence_ratio(f, 1.0)
        lo, hi = min(lo, r), max(hi, r)
        if not (0.75 - 1e-9 <= r <= 8.0 / 3.0 + 1e-9):
            failing.append(sd)
    out.append(_verdict("derivative_equivalence", not failing, failing, min_ratio=lo, max_ratio=hi))
    return out


def embed_suite(grid: GridSpec, trials: int = 100, seed: int = 0) -> list[dict]:
    out = [_from_calibrated(check_embedding(grid, trials, seed))]
    out.extend(_from_calibrated(v) for v in check_split_norm(grid, trials, seed))
    return out


def composition_suite(grid: GridSpec, trials: int = 100, seed: int = 0) -> list[dict]:
    out = []
    for gamma in (2.0, 3.0):
        for v in check_composition_estimate(grid, gamma, trials, seed):
            d = _from_calibrated(v)
            d["check"] = f"{d['check']}_gamma{gamma:g}"
            if gamma == 3.0:
                d["passed"] = d["passed"] and d["constant"] == 0.0
            out.append(d)
    failing, worst = [], 0.0
    mask = spectral_support(grid, grid.n / 4 - 1)
    spec = BesovSpec(1.0 + grid.dim / 2.0)
    for sd in range(seed, seed + 20):
        rng = np.random.default_rng(sd)
        f = random_spectral_field(grid, rng, mask) * 0.3
        g = random_spectral_field(grid, rng, mask) * 0.3
        d = quadratic_identity_defect(f, g, spec)
        worst = max(worst, d)
        if d > 1e-12:
            failing.append(sd)
    out.append(_verdict("quadratic_identity_gamma2", not failing, failing, max_defect=worst))
    return out


def poincare_suite(grid: GridSpec, trials: int = 100, seed: int = 0) -> list[dict]:
    one = poincare_check(SpectralField.from_function(grid, lambda x, *_: np.sin(x)))
    two = poincare_check(SpectralField.from_function(grid, lambda x, *_: np.sin(2 * x)))
    out = [_verdict("equality_k1", abs(one - 1.0) <= 1e-12, ratio=one),
           _verdict("ratio_k2", abs(two - 0.5) <= 1e-12, ratio=two)]
    mask = spectral_support(grid, grid.n / 2 - 1) & (grid.kmag > 0)
    failing, worst = [], 0.0
    for sd in range(seed, seed + trials):
        f = random_spectral_field(grid, np.random.default_rng(sd), mask, slope=3.0)
        r = poincare_check(f)
        worst = max(worst, r)
        if r > 1.0 + 1e-12:
            failing.append(sd)
    out.append(_verdict("random_bound", not failing, failing, max_ratio=worst))
    return out


def convergence_suite(grid: GridSpec, seed: int = 0) -> list[dict]:
    params = PhysParams.for_dim(grid.dim, 2.0)
    W0 = make_initial_data(grid, params, 1.0, seed, (0, 1))
    g_order, g_errs = global_order(W0, 1.0, 0.05)
    l_order, l_errs = local_order(W0, 0.05)
    small = make_initial_data(grid, params, 1e-3, seed, (0, 1))
    c_order, growth = gauss_growth_order(small, 20.0, 0.2)
    divb = run(RunConfig(grid, params, 20.0, amplitude=1e-3, seed=seed)).monitor.max_divb
    return [
        _verdict("rk4_global_order", abs(g_order - 4.0) <= 0.2, order=g_order, errors=g_errs),
        _verdict("rk4_local_order", abs(l_order - 5.0) <= 0.2, order=l_order, errors=l_errs),
        _verdict("gauss_growth_order", c_order >= 4.5, order=c_order, growth=growth),
        _verdict("div_b", divb <= 1e-10, max_div_b=divb),
    ]


def run_suite(name: str, grid: GridSpec, trials: int = 100, seed: int = 0) -> list[dict]:
    if name == "partition":
        return partition_suite(grid.dim, min(trials, 50), seed)
    if name == "bernstein":
        return bernstein_suite(grid, trials, seed)
    if name == "embed":
        return embed_suite(grid, trials, seed)
    if name == "product":
        return [_from_calibrated(check_product_estimate(grid, trials, seed=seed))]
    if name == "composition":
        return composition_suite(grid, trials, seed)
    if name == "commutator":
        return [_from_calibrated(check_commutator_estimate(grid, trials, seed))]
    if name == "poincare":
        return poincare_suite(grid, trials, seed)
    if name == "convergence":
        return convergence_suite(grid, seed)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
