import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twofluid.diagnostics import (
    DecayChannels,
    calibrate_then_assert,
    decay_report,
    energy_report,
    poincare_check,
)
from twofluid.diagnostics.energy import CHANNELS, perturbation_fields
from twofluid.diagnostics.inequalities import (
    commutator_ratio,
    commutator_values,
    composition_difference_ratio,
    composition_ratio,
    derivative_equivalence_ratio,
    product_ratio,
    quadratic_identity_defect,
    random_spectral_field,
    spectral_support,
    split_norm_ratios,
)
from twofluid.diagnostics.convergence import global_order
from twofluid.integrator import integrate
from twofluid.littlewood_paley import BesovSpec, besov_norm, build_partition
from twofluid.model import Layout, SymState, make_initial_data
from twofluid.spectral_field import GridSpec, SpectralField

SINE_L2 = math.pi * math.sqrt(2)


def g_exact(t):
    if not 0.75 < t < 8 / 3:
        return 0.0
    return math.exp(-1.0 / ((t - 0.75) * (8 / 3 - t)))


def mult(q, k):
    """Inhomogeneous block multiplier at radius ``k`` from the bump definition."""
    total = sum(g_exact(k / 2.0**p) for p in range(-3, 12))
    if q >= 0:
        return g_exact(k / 2.0**q) / total
    return 1.0 - sum(g_exact(k / 2.0**p) for p in range(0, 12)) / total


def cos_besov(k, s):
    return SINE_L2 * sum(2.0 ** (q * s) * mult(q, k) for q in range(-1, 8))


def cosine(grid, k):
    return SpectralField.from_function(grid, lambda x, *_: np.cos(k * x))


class TestEnergyReport:
    def test_equilibrium_degenerate(self, grid32, params2d):
        rec = integrate(SymState.zeros(grid32, params2d), 1.0)
        rep = energy_report(rec)
        assert rep.degenerate and math.isnan(rep.ratio(0.1))
        assert rep.sup_norm == rep.diss_density == rep.diss_E == rep.diss_gradB == 0.0
        assert json.loads(json.dumps(rep.to_dict(0.1)))["ratio"] is None

    def test_frozen_state(self, grid32, params2d):
        W = make_initial_data(grid32, params2d, 1e-2, 0)
        T = 4.0
        samples = [(t, W) for t in np.linspace(0, T, 5)]
        rep = energy_report(samples)
        T_phys = T / math.sqrt(2.0)
        P = build_partition(grid32)
        f = perturbation_fields(W)
        b = lambda name, s: besov_norm(f[name], BesovSpec(s), P)  # noqa: E731
        assert rep.sup_norm == pytest.approx(sum(b(n, 2.0) for n in f), rel=1e-12)
        dens = sum(b(n, 2.0) for n in ("n_plus", "n_minus", "u_plus", "u_minus"))
        assert rep.diss_density == pytest.approx(math.sqrt(T_phys) * dens, rel=1e-12)
        assert rep.diss_E == pytest.approx(math.sqrt(T_phys) * b("E", 1.0), rel=1e-12)
        assert rep.initial_norm == pytest.approx(rep.sup_norm, rel=1e-12)
        assert rep.T == pytest.approx(T_phys)

    def test_needs_two_samples(self, grid32, params2d):
        with pytest.raises(ValueError):
            energy_report([(0.0, SymState.zeros(grid32, params2d))])

    def test_ratio_formula(self, canonical_run):
        rep = energy_report(canonical_run)
        mu0 = 0.1
        expected = (rep.sup_norm + mu0 * (rep.diss_density + rep.diss_E + rep.diss_gradB)) / rep.initial_norm
        assert rep.ratio(mu0) == pytest.approx(expected)
        assert all(v > 0 for v in (rep.sup_norm, rep.diss_density, rep.diss_E, rep.diss_gradB))


class TestDecay:
    def test_equilibrium_zero(self, grid32, params2d):
        dc = decay_report(integrate(SymState.zeros(grid32, params2d), 1.0))
        assert all(np.all(v == 0) for v in dc.norms.values())

    def test_eps_positive(self):
        with pytest.raises(ValueError):
            DecayChannels(0.0, np.zeros(2))

    def test_eps_sweep_monotone(self, canonical_run):
        sub = canonical_run.snapshots[::20]
        reports = [decay_report(sub, eps, min_block=0) for eps in (0.25, 0.5, 1.0)]
        for name in CHANNELS:
            for lo, hi in zip(reports, reports[1:]):
                assert np.all(hi.norms[name] <= lo.norms[name] * (1 + 1e-12))

    def test_regularity_loss_ordering(self, canonical_run):
        rates = decay_report(canonical_run).decay_rates()
        assert rates["electric"] >= rates["magnetic"] - 0.2

    def test_summary_json(self, canonical_run):
        s = decay_report(canonical_run.snapshots[::40]).summary()
        assert set(s["final_over_initial"]) == set(CHANNELS)
        json.dumps(s)


class TestPoincare:
    def test_equality_cases(self, grid32):
        assert poincare_check(SpectralField.from_function(grid32, lambda x, y: np.sin(x))) == pytest.approx(1.0, abs=1e-14)
        assert poincare_check(SpectralField.from_function(grid32, lambda x, y: np.sin(2 * x))) == pytest.approx(0.5, abs=1e-14)

    def test_errors(self, grid32):
        with pytest.raises(ValueError):
            poincare_check(SpectralField.from_function(grid32, lambda x, y: 1 + np.sin(x)))
        with pytest.raises(ValueError):
            poincare_check(SpectralField.zeros(grid32))
        with pytest.raises(ValueError):
            poincare_check(SpectralField.zeros(grid32, 2))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_bound(self, seed):
        g = GridSpec(2, 16)
        mask = spectral_support(g, 7) & (g.kmag > 0)
        f = random_spectral_field(g, np.random.default_rng(seed), mask, slope=0.0)
        assert poincare_check(f) <= 1.0 + 1e-12


class TestProduct:
    def test_constant_consistency(self, grid32):
        spec = BesovSpec(2.0)
        c = SpectralField(grid32, np.full(grid32.shape, 3.0))
        one_norm = 2.0**-2 * 2 * math.pi
        assert product_ratio(c, c, spec) == pytest.approx(1.0 / one_norm, rel=1e-12)

    def test_two_mode(self, grid32):
        s = 2.0
        f, g = cosine(grid32, 1), cosine(grid32, 8)
        expected_fg = 0.5 * SINE_L2 * sum(
            2.0 ** (q * s) * math.hypot(mult(q, 7), mult(q, 9)) for q in range(-1, 8))
        P = build_partition(grid32)
        fg = SpectralField(grid32, f.values * g.values)
        assert besov_norm(fg, BesovSpec(s), P) == pytest.approx(expected_fg, rel=1e-12)
        assert product_ratio(f, g, BesovSpec(s)) == pytest.approx(
            expected_fg / (cos_besov(1, s) * cos_besov(8, s)), rel=1e-12)

    def test_zero_skipped(self, grid32):
        assert product_ratio(SpectralField.zeros(grid32), cosine(grid32, 1), BesovSpec(2.0)) is None


class TestCommutator:
    def test_constant_f(self, grid32):
        g = random_spectral_field(grid32, np.random.default_rng(0), spectral_support(grid32, 7))
        f = SpectralField(grid32, np.full(grid32.shape, 2.5))
        assert max(commutator_values(f, g).values()) < 1e-13
        assert commutator_ratio(f, g, 2.0) is None

    @pytest.mark.parametrize("kf, kg", [(1, 6), (2, 5), (1, 3)])
    def test_two_mode(self, grid32, kf, kg):
        vals = commutator_values(cosine(grid32, kf), cosine(grid32, kg))
        for q, v in vals.items():
            a = mult(q, kg) - mult(q, kg + kf)
            b = mult(q, kg) - mult(q, abs(kg - kf))
            assert v == pytest.approx(kg / 2 * SINE_L2 * math.hypot(a, b), abs=1e-12)


class TestComposition:
    def series(self, grid, seed, amp=0.3, n_t=5):
        rng = np.random.default_rng(seed)
        mask = spectral_support(grid, 7)
        a, b = (random_spectral_field(grid, rng, mask) for _ in range(2))
        times = np.linspace(0, 1, n_t)
        fields = [math.cos(t) * a + math.sin(t) * b for t in times]
        scale = amp / max(np.max(np.abs(f.values)) for f in fields)
        return [f * scale for f in fields], times

    def test_gamma3_zero(self, grid32):
        f, t = self.series(grid32, 0)
        g, _ = self.series(grid32, 1)
        assert composition_ratio(f, t, 3.0, 2.0, 2.0) == 0.0
        assert composition_difference_ratio(f, g, t, 3.0, 1.0) == 0.0

    def test_equal_arguments(self, grid32):
        f, t = self.series(grid32, 2)
        assert composition_difference_ratio(f, f, t, 2.0, 1.0) is None

    def test_quadratic_identity(self, grid32):
        rng = np.random.default_rng(3)
        mask = spectral_support(grid32, 7)
        f = random_spectral_field(grid32, rng, mask) * 0.2
        g = random_spectral_field(grid32, rng, mask) * 0.2
        assert quadratic_identity_defect(f, g, BesovSpec(2.0)) <= 1e-13


class TestEquivalences:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), s=st.floats(-1, 2))
    def test_derivative_equivalence(self, seed, s):
        g = GridSpec(2, 16)
        mask = spectral_support(g, 7) & (g.kmag > 0)
        f = random_spectral_field(g, np.random.default_rng(seed), mask, slope=1.0)
        assert 0.75 - 1e-12 <= derivative_equivalence_ratio(f, s) <= 8 / 3 + 1e-12

    def test_split_norm_two_sided(self, grid32):
        rng = np.random.default_rng(0)
        mask = spectral_support(grid32, 15)
        a, b = (random_spectral_field(grid32, rng, mask) for _ in range(2))
        times = np.linspace(0, 1, 6)
        fields = [math.cos(t) * a + t * b for t in times]
        up, down = split_norm_ratios(fields, times, 1.0, 2.0)
        assert up == pytest.approx(1.0 / down)
        assert 0 < up < 2 and 0 < down < 2


class TestCalibration:
    def test_protocol(self):
        v = calibrate_then_assert("toy", lambda s: 1.0 + (s % 7) / 100.0, trials=20)
        assert v.constant == pytest.approx(1.06) and v.passed
        d = v.to_dict()
        assert d["n_calibration"] == 20 and d["passed"]

    def test_failure_reports_seed(self):
        v = calibrate_then_assert("toy", lambda s: 2.0 if s == 10_003 else 1.0, trials=10)
        assert not v.passed and v.failures == [10_003]

    def test_degenerate_skipped_and_bound(self):
        v = calibrate_then_assert("toy", lambda s: None if s % 2 else 3.0, trials=4, bound=2.0)
        assert v.constant == 3.0 and not v.passed


class TestConvergence:
    def test_order_ignores_resolution_trip(self, grid32, params2d):
        lay = Layout(2)
        w = np.zeros((lay.ncomp, *grid32.shape))
        x = grid32.coords[0]
        w[lay.e][1] = np.cos(2 * x)
        w[lay.b][0] = np.cos(2 * x)
        W0 = SymState.from_array(grid32, params2d, w)
        order, errs = global_order(W0, 2.0, 0.2, coupled=False)
        assert order == pytest.approx(4.0, abs=0.2)
        assert errs[0] > errs[1] > 0
